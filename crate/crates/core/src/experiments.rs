//! Experiment drivers behind the command-line tool.
//!
//! Every driver is a pure function of its config: repetitions draw their
//! randomness from seeds derived from the base seed and the repetition index,
//! so the rows do not depend on how many worker threads ran them.

use crate::distance::{hausdorff_grid_systems, hausdorff_mc, hausdorff_upper_bound, BoundKind, DistanceError, EstimateMode, HausdorffEstimate};
use crate::feasible::{build_system, FeasibleError, HalfspaceSystem, SetKind, SetSpec};
use crate::games::{empirical_profile, pi_min, sample_profile, support, GameError, StrategyProfile};
use crate::generate::random_strategy;
use crate::instances::{make_lb_instance, verify_separation, InstanceError, LbFamily, LbParams};
use crate::rates::{l1_bound, minimax_lower_bound, missing_mass_bounds, sample_size, subset_bernstein_bound, LowerBoundFamily, RateError, RateParams, Regime};
use crate::rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Version of the CSV column layouts.
pub const CSV_VERSION: u32 = 1;
/// Separation tolerance used by `verify-lb`.
pub const LB_TOLERANCE: f64 = 1e-6;
const MIN_CONVERGENCE_REPS: usize = 50;
const MIN_COVERAGE_REPS: usize = 1000;
const MAX_COVERAGE_N: usize = 6;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: &'static str, reason: String },
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Feasible(#[from] FeasibleError),
    #[error(transparent)]
    Distance(#[from] DistanceError),
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn bad(field: &'static str, reason: impl Into<String>) -> ExperimentError {
    ExperimentError::Config { field, reason: reason.into() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Estimate,
    Convergence,
    Coverage,
    VerifyLb,
    Bounds,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Estimate => "estimate",
            Command::Convergence => "convergence",
            Command::Coverage => "coverage",
            Command::VerifyLb => "verify-lb",
            Command::Bounds => "bounds",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GameKind {
    Gsg,
    Zsg,
}

impl GameKind {
    pub fn set_kinds(self) -> &'static [SetKind] {
        match self {
            GameKind::Gsg => &[SetKind::GsgRow, SetKind::GsgCol],
            GameKind::Zsg => &[SetKind::Zsg],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AutoTag {
    #[serde(rename = "auto")]
    Auto,
}

/// Number of rounds: a count or `"auto"` for the worst-case sample size.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RoundsSpec {
    Fixed(u64),
    Auto(AutoTag),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomProfile {
    pub n: usize,
    #[serde(default)]
    pub zero_prob: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LbCase {
    pub family: LbFamily,
    #[serde(default)]
    pub params: LbParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsGrid {
    pub n: Vec<usize>,
    pub epsilon: Vec<f64>,
    pub delta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub pi_min: Vec<f64>,
}

impl Default for BoundsGrid {
    fn default() -> Self {
        BoundsGrid {
            n: vec![2, 4, 8],
            epsilon: vec![0.001, 0.0025],
            delta: vec![0.05, 0.2],
            alpha: vec![0.05, 0.2],
            pi_min: vec![0.01, 0.1],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub game: GameKind,
    pub alpha: f64,
    /// Inline true profile; exclusive with `random_profile`.
    pub profile: Option<StrategyProfile>,
    /// True profile drawn from the seed.
    pub random_profile: Option<RandomProfile>,
    pub m: RoundsSpec,
    pub m_grid: Vec<u64>,
    pub m_max: u64,
    pub reps: usize,
    /// Grid-oracle resolution used for 2x2 games.
    pub resolution: f64,
    /// Hit-and-run samples per directed distance for larger games.
    pub mc_samples: usize,
    pub epsilon: f64,
    pub delta: f64,
    /// Mass cap of the subsets checked by `coverage`.
    pub beta: f64,
    pub lb_cases: Vec<LbCase>,
    pub bounds_grid: BoundsGrid,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: None,
            game: GameKind::Gsg,
            alpha: 0.0,
            profile: None,
            random_profile: None,
            m: RoundsSpec::Fixed(1000),
            m_grid: vec![100, 1000, 10_000, 100_000],
            m_max: 10_000_000,
            reps: 1,
            resolution: 0.1,
            mc_samples: 50,
            epsilon: 0.1,
            delta: 0.05,
            beta: 0.3,
            lb_cases: Vec::new(),
            bounds_grid: BoundsGrid::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(text).map_err(|e| bad("config", e.to_string()))
    }

    pub fn seed(&self) -> Result<u64, ExperimentError> {
        self.seed.ok_or_else(|| bad("seed", "missing"))
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// The true profile, inline or drawn from the seed.
    pub fn true_profile(&self) -> Result<StrategyProfile, ExperimentError> {
        match (&self.profile, &self.random_profile) {
            (Some(p), None) => Ok(p.clone()),
            (None, Some(r)) => {
                let mut g = rng::stream(self.seed()?, 2);
                let x = random_strategy(&mut g, r.n, r.zero_prob);
                let y = random_strategy(&mut g, r.n, r.zero_prob);
                Ok(StrategyProfile::new(x, y)?)
            }
            (Some(_), Some(_)) => Err(bad("profile", "give either `profile` or `random_profile`, not both")),
            (None, None) => Err(bad("profile", "give `profile` or `random_profile`")),
        }
    }

    /// Checks the fields the command reads; soft problems come back as warnings.
    pub fn validate(&self, cmd: Command) -> Result<Vec<String>, ExperimentError> {
        let mut warnings = Vec::new();
        self.seed()?;
        let unit = |field, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(bad(field, format!("{v} is outside (0, 1)")))
            }
        };
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(bad("alpha", format!("{} is not a finite nonnegative number", self.alpha)));
        }
        if let Some(r) = &self.random_profile {
            if r.n < 2 {
                return Err(bad("random_profile.n", "must be at least 2"));
            }
            if !(0.0..1.0).contains(&r.zero_prob) {
                return Err(bad("random_profile.zero_prob", "must lie in [0, 1)"));
            }
        }
        match cmd {
            Command::Estimate | Command::Convergence => {
                self.true_profile()?;
                if !(self.resolution > 0.0 && self.resolution <= 2.0) {
                    return Err(bad("resolution", "must lie in (0, 2]"));
                }
                if self.mc_samples == 0 {
                    return Err(bad("mc_samples", "must be positive"));
                }
            }
            Command::Coverage => {
                let p = self.true_profile()?;
                if p.n() > MAX_COVERAGE_N {
                    return Err(bad("profile", format!("coverage enumerates subsets; n must be at most {MAX_COVERAGE_N}")));
                }
                if !(self.delta > 0.0 && self.delta <= 1.0) {
                    return Err(bad("delta", "must lie in (0, 1]"));
                }
                if !(0.0..=1.0).contains(&self.beta) {
                    return Err(bad("beta", "must lie in [0, 1]"));
                }
            }
            Command::VerifyLb | Command::Bounds => {}
        }
        match cmd {
            Command::Estimate => match self.m {
                RoundsSpec::Fixed(0) => return Err(bad("m", "must be positive")),
                RoundsSpec::Fixed(_) => {}
                RoundsSpec::Auto(_) => {
                    unit("epsilon", self.epsilon)?;
                    unit("delta", self.delta)?;
                    if self.m_max == 0 {
                        return Err(bad("m_max", "must be positive"));
                    }
                }
            },
            Command::Convergence => {
                if self.m_grid.len() < 4 {
                    return Err(bad("m_grid", "needs at least 4 points"));
                }
                if self.m_grid[0] == 0 || self.m_grid.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(bad("m_grid", "must be positive and strictly increasing"));
                }
                if self.reps == 0 {
                    return Err(bad("reps", "must be positive"));
                }
                if self.reps < MIN_CONVERGENCE_REPS {
                    warnings.push(format!("reps = {} is below {MIN_CONVERGENCE_REPS}; medians are noisy", self.reps));
                }
            }
            Command::Coverage => {
                match self.m {
                    RoundsSpec::Fixed(m) if m > 2 => {}
                    _ => return Err(bad("m", "coverage needs a fixed m > 2")),
                }
                if self.reps == 0 {
                    return Err(bad("reps", "must be positive"));
                }
                if self.reps < MIN_COVERAGE_REPS {
                    warnings.push(format!("reps = {} is below {MIN_COVERAGE_REPS}; frequencies are noisy", self.reps));
                }
            }
            Command::VerifyLb | Command::Bounds => {}
        }
        Ok(warnings)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport<R, S> {
    pub command: Command,
    pub config: ExperimentConfig,
    pub rows: Vec<R>,
    pub summary: S,
    pub warnings: Vec<String>,
}

impl<R: Serialize, S: Serialize> ExperimentReport<R, S> {
    pub fn csv(&self) -> Result<String, ExperimentError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Writes `config.json`, `rows.csv`, `summary.json` and any extra JSON
    /// files into `<out>/<command>-<hash prefix>/`.
    pub fn write(&self, out: &Path, extra: &[(&str, serde_json::Value)], wall_clock_s: f64) -> Result<PathBuf, ExperimentError> {
        let dir = out.join(format!("{}-{}", self.command.name(), &self.config.hash()[..16]));
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join("config.json"), serde_json::to_string_pretty(&self.config)?)?;
        std::fs::write(dir.join("rows.csv"), self.csv()?)?;
        let summary = serde_json::json!({
            "command": self.command.name(),
            "summary": self.summary,
            "warnings": self.warnings,
            "wall_clock_s": wall_clock_s,
            "version": env!("CARGO_PKG_VERSION"),
            "csv_version": CSV_VERSION,
        });
        std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
        for (name, value) in extra {
            std::fs::write(dir.join(name), serde_json::to_string_pretty(value)?)?;
        }
        Ok(dir)
    }
}

/// One estimation run: sampled profile against the truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub rep: usize,
    pub m: u64,
    pub l1_x: f64,
    pub l1_y: f64,
    /// Closed-form distance bound; empty when no bound applies (exact regime, supports differ).
    pub bound: Option<f64>,
    pub bound_kind: Option<BoundKind>,
    pub hausdorff: f64,
    pub hausdorff_mode: EstimateMode,
    pub support_match: bool,
}

fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[k] } else { 0.5 * (v[k - 1] + v[k]) })
}

fn systems(game: GameKind, p: &StrategyProfile, alpha: f64) -> Result<Vec<HalfspaceSystem>, ExperimentError> {
    game.set_kinds()
        .iter()
        .map(|&k| Ok(build_system(&SetSpec::new(k, p.x.clone(), p.y.clone(), alpha)?)))
        .collect()
}

/// Hausdorff diagnostic between the sets of two profiles: the grid oracle
/// for 2x2 games, sampled lower bounds otherwise. General-sum sets are
/// products, so the factor distances are combined by max.
pub fn distance_diagnostic(cfg: &ExperimentConfig, truth: &StrategyProfile, est: &StrategyProfile, seed: u64) -> Result<HausdorffEstimate, ExperimentError> {
    let a = systems(cfg.game, truth, cfg.alpha)?;
    let b = systems(cfg.game, est, cfg.alpha)?;
    let mut out: Option<HausdorffEstimate> = None;
    for (sa, sb) in a.iter().zip(&b) {
        let h = if truth.n() == 2 {
            hausdorff_grid_systems(sa, sb, cfg.resolution)?
        } else {
            hausdorff_mc(sa, sb, cfg.mc_samples, seed)?
        };
        out = Some(match out {
            None => h,
            Some(prev) => prev.product(&h),
        });
    }
    Ok(out.expect("at least one factor"))
}

/// Closed-form bound on the distance between the two profiles' sets, if one applies.
pub fn distance_bound(cfg: &ExperimentConfig, truth: &StrategyProfile, est: &StrategyProfile) -> Result<Option<(f64, BoundKind)>, ExperimentError> {
    let kind = if cfg.alpha > 0.0 {
        BoundKind::Approx
    } else if support(&truth.x) != support(&est.x) || support(&truth.y) != support(&est.y) {
        return Ok(None);
    } else if cfg.game == GameKind::Gsg {
        BoundKind::ExactGsg
    } else {
        BoundKind::ExactZsg
    };
    Ok(Some((hausdorff_upper_bound(kind, &truth.x, &est.x, &truth.y, &est.y, cfg.alpha)?, kind)))
}

fn run_once(cfg: &ExperimentConfig, truth: &StrategyProfile, rep: usize, m: u64, seed: u64) -> Result<(RunRow, StrategyProfile), ExperimentError> {
    let est = empirical_profile(&sample_profile(truth, m, seed)?)?;
    let h = distance_diagnostic(cfg, truth, &est, seed)?;
    let b = distance_bound(cfg, truth, &est)?;
    let row = RunRow {
        rep,
        m,
        l1_x: truth.x.l1_distance(&est.x),
        l1_y: truth.y.l1_distance(&est.y),
        bound: b.map(|v| v.0),
        bound_kind: b.map(|v| v.1),
        hausdorff: h.value,
        hausdorff_mode: h.mode,
        support_match: support(&truth.x) == support(&est.x) && support(&truth.y) == support(&est.y),
    };
    Ok((row, est))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateSummary {
    pub m: u64,
    /// Worst-case sample size before capping, when `m` was `"auto"`.
    pub m_auto: Option<u64>,
    pub true_profile: StrategyProfile,
    pub estimated_profile: StrategyProfile,
    /// Recommended sets, built from the estimated profile.
    pub systems: Vec<HalfspaceSystem>,
}

pub type EstimateReport = ExperimentReport<RunRow, EstimateSummary>;

/// Sample size for `"auto"` rounds: the worst-case formula for the regime.
pub fn auto_rounds(cfg: &ExperimentConfig, truth: &StrategyProfile) -> Result<u64, ExperimentError> {
    let (regime, alpha, pm) = if cfg.alpha > 0.0 {
        (Regime::Approx, Some(cfg.alpha), None)
    } else {
        (Regime::Exact, None, Some(pi_min(truth)))
    };
    let p = RateParams { n: truth.n(), epsilon: cfg.epsilon, delta: cfg.delta, alpha, pi_min: pm };
    Ok(sample_size(regime, &p)?)
}

pub fn run_estimate(cfg: &ExperimentConfig) -> Result<EstimateReport, ExperimentError> {
    let mut warnings = cfg.validate(Command::Estimate)?;
    let truth = cfg.true_profile()?;
    let (m, m_auto) = match cfg.m {
        RoundsSpec::Fixed(m) => (m, None),
        RoundsSpec::Auto(_) => {
            let m = auto_rounds(cfg, &truth)?;
            if m > cfg.m_max {
                warnings.push(format!("auto sample size {m} exceeds m_max; capped at {}", cfg.m_max));
            }
            (m.min(cfg.m_max), Some(m))
        }
    };
    let seed = rng::rep_seed(cfg.seed()?, 0);
    let (row, est) = run_once(cfg, &truth, 0, m, seed)?;
    let summary = EstimateSummary {
        m,
        m_auto,
        systems: systems(cfg.game, &est, cfg.alpha)?,
        true_profile: truth,
        estimated_profile: est,
    };
    Ok(ExperimentReport { command: Command::Estimate, config: cfg.clone(), rows: vec![row], summary, warnings })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundsSummary {
    pub m: u64,
    pub median_bound: Option<f64>,
    pub median_hausdorff: f64,
    pub support_match_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSummary {
    pub per_m: Vec<RoundsSummary>,
    /// Least-squares slope of log median bound against log m.
    pub bound_slope: Option<f64>,
    pub hausdorff_nonincreasing: bool,
}

pub type ConvergenceReport = ExperimentReport<RunRow, ConvergenceSummary>;

fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 || points.iter().any(|&(x, y)| x <= 0.0 || y <= 0.0) {
        return None;
    }
    let pts: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

pub fn run_convergence(cfg: &ExperimentConfig) -> Result<ConvergenceReport, ExperimentError> {
    let warnings = cfg.validate(Command::Convergence)?;
    let truth = cfg.true_profile()?;
    let seed = cfg.seed()?;
    let jobs: Vec<(usize, usize)> = (0..cfg.m_grid.len()).flat_map(|i| (0..cfg.reps).map(move |r| (i, r))).collect();
    let rows: Vec<RunRow> = jobs
        .par_iter()
        .map(|&(i, r)| {
            let s = rng::rep_seed(rng::rep_seed(seed, r as u64), i as u64);
            run_once(cfg, &truth, r, cfg.m_grid[i], s).map(|v| v.0)
        })
        .collect::<Result<_, _>>()?;
    let mut per_m = Vec::new();
    for (i, &m) in cfg.m_grid.iter().enumerate() {
        let block = &rows[i * cfg.reps..(i + 1) * cfg.reps];
        let mut bounds: Vec<f64> = block.iter().filter_map(|r| r.bound).collect();
        let mut hs: Vec<f64> = block.iter().map(|r| r.hausdorff).collect();
        per_m.push(RoundsSummary {
            m,
            median_bound: if bounds.len() == block.len() { median(&mut bounds) } else { None },
            median_hausdorff: median(&mut hs).expect("reps > 0"),
            support_match_rate: block.iter().filter(|r| r.support_match).count() as f64 / block.len() as f64,
        });
    }
    let pts: Option<Vec<(f64, f64)>> = per_m.iter().map(|s| s.median_bound.map(|b| (s.m as f64, b))).collect();
    let summary = ConvergenceSummary {
        bound_slope: pts.and_then(|p| loglog_slope(&p)),
        hausdorff_nonincreasing: per_m.windows(2).all(|w| w[1].median_hausdorff <= w[0].median_hausdorff),
        per_m,
    };
    Ok(ExperimentReport { command: Command::Convergence, config: cfg.clone(), rows, summary, warnings })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub rep: usize,
    pub l1_deviation: f64,
    pub l1_violated: bool,
    /// Largest deviation over subsets of true mass at most `beta`.
    pub subset_deviation: f64,
    pub subset_violated: bool,
    pub missing_mass: f64,
    pub missing_violated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub l1_bound: f64,
    pub subset_bound: f64,
    pub missing_deviation_bound: f64,
    pub missing_mass_mean: f64,
    pub l1_violation_rate: f64,
    pub subset_violation_rate: f64,
    pub missing_violation_rate: f64,
    pub passed: bool,
}

pub type CoverageReport = ExperimentReport<CoverageRow, CoverageSummary>;

/// Empirical violation frequencies of the concentration bounds for the row player's draws.
pub fn run_coverage(cfg: &ExperimentConfig) -> Result<CoverageReport, ExperimentError> {
    let warnings = cfg.validate(Command::Coverage)?;
    let truth = cfg.true_profile()?;
    let x = truth.x.probs().to_vec();
    let d = x.len();
    let RoundsSpec::Fixed(m) = cfg.m else { unreachable!("validated") };
    let (delta, beta, seed) = (cfg.delta, cfg.beta, cfg.seed()?);
    let l1b = l1_bound(d, m, delta)?;
    let subb = subset_bernstein_bound(d, m, delta, beta)?;
    let (mmb, _) = missing_mass_bounds(d, m, delta)?;
    let small: Vec<u32> = (1u32..1 << d)
        .filter(|mask| (0..d).filter(|i| mask >> i & 1 == 1).map(|i| x[i]).sum::<f64>() <= beta)
        .collect();
    let mut rows: Vec<CoverageRow> = (0..cfg.reps)
        .into_par_iter()
        .map(|r| {
            let rec = sample_profile(&truth, m, rng::rep_seed(seed, r as u64))?;
            let xh: Vec<f64> = rec.row_counts.iter().map(|&c| c as f64 / m as f64).collect();
            let l1: f64 = x.iter().zip(&xh).map(|(a, b)| (a - b).abs()).sum();
            let sub = small
                .iter()
                .map(|mask| (0..d).filter(|i| mask >> i & 1 == 1).map(|i| xh[i] - x[i]).sum::<f64>().abs())
                .fold(0.0, f64::max);
            let missing: f64 = (0..d).filter(|&i| rec.row_counts[i] == 0).map(|i| x[i]).sum();
            Ok(CoverageRow {
                rep: r,
                l1_deviation: l1,
                l1_violated: l1 > l1b,
                subset_deviation: sub,
                subset_violated: sub > subb,
                missing_mass: missing,
                missing_violated: false,
            })
        })
        .collect::<Result<_, ExperimentError>>()?;
    let k = rows.len() as f64;
    let mean = rows.iter().map(|r| r.missing_mass).sum::<f64>() / k;
    for r in &mut rows {
        r.missing_violated = r.missing_mass - mean > mmb;
    }
    let rate = |f: fn(&CoverageRow) -> bool| rows.iter().filter(|r| f(r)).count() as f64 / k;
    let (l1r, subr, mmr) = (rate(|r| r.l1_violated), rate(|r| r.subset_violated), rate(|r| r.missing_violated));
    let summary = CoverageSummary {
        l1_bound: l1b,
        subset_bound: subb,
        missing_deviation_bound: mmb,
        missing_mass_mean: mean,
        l1_violation_rate: l1r,
        subset_violation_rate: subr,
        missing_violation_rate: mmr,
        passed: l1r <= delta && subr <= delta && mmr <= delta,
    };
    Ok(ExperimentReport { command: Command::Coverage, config: cfg.clone(), rows, summary, warnings })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LbRow {
    pub family: LbFamily,
    pub pi: Option<f64>,
    pub epsilon: Option<f64>,
    pub alpha: f64,
    pub n: usize,
    pub certified: f64,
    pub measured: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LbSummary {
    pub cases: usize,
    pub failures: usize,
    pub passed: bool,
}

pub type LbReport = ExperimentReport<LbRow, LbSummary>;

/// Parameter grid checked by `verify-lb` when the config lists no cases.
pub fn default_lb_cases() -> Vec<LbCase> {
    let base = LbParams::default();
    let mut cases = Vec::new();
    for pi in [0.1, 0.3, 0.5] {
        cases.push(LbCase { family: LbFamily::Impossibility, params: LbParams { pi, ..base.clone() } });
    }
    for epsilon in [0.01, 0.05, 0.1] {
        cases.push(LbCase { family: LbFamily::EpsFamily, params: LbParams { epsilon, ..base.clone() } });
    }
    for alpha in [0.05, 0.2] {
        for epsilon in [0.01, 0.05] {
            cases.push(LbCase { family: LbFamily::AlphaLog, params: LbParams { alpha, epsilon, ..base.clone() } });
        }
    }
    for n in [8, 16] {
        cases.push(LbCase { family: LbFamily::NPacking, params: LbParams { n, epsilon: 1.0 / 400.0, ..base.clone() } });
    }
    for alpha in [0.1, 0.3] {
        cases.push(LbCase { family: LbFamily::AlphaN, params: LbParams { n: 9, alpha, epsilon: 1.0 / 128.0, ..base.clone() } });
    }
    cases
}

pub fn run_verify_lb(cfg: &ExperimentConfig) -> Result<LbReport, ExperimentError> {
    let warnings = cfg.validate(Command::VerifyLb)?;
    let cases = if cfg.lb_cases.is_empty() { default_lb_cases() } else { cfg.lb_cases.clone() };
    let rows: Vec<LbRow> = cases
        .par_iter()
        .map(|c| {
            let inst = make_lb_instance(c.family, &c.params).map_err(|e| match e {
                InstanceError::Range { .. } => bad("lb_cases", e.to_string()),
                other => other.into(),
            })?;
            let (pass, measured) = verify_separation(&inst, LB_TOLERANCE)?;
            Ok(LbRow {
                family: c.family,
                pi: inst.params.pi,
                epsilon: inst.params.epsilon,
                alpha: inst.alpha,
                n: inst.profiles[0].n(),
                certified: inst.certified_separation,
                measured,
                pass,
            })
        })
        .collect::<Result<_, ExperimentError>>()?;
    let failures = rows.iter().filter(|r| !r.pass).count();
    let summary = LbSummary { cases: rows.len(), failures, passed: failures == 0 };
    Ok(ExperimentReport { command: Command::VerifyLb, config: cfg.clone(), rows, summary, warnings })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsRow {
    pub regime: Regime,
    pub n: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub alpha: Option<f64>,
    pub pi_min: Option<f64>,
    pub sample_size: u64,
    pub family: LowerBoundFamily,
    /// Empty when the parameters fall outside the family's validity range.
    pub lower_bound: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsSummary {
    pub rows: usize,
    /// Rows whose sample size is below a valid lower bound.
    pub inconsistent: usize,
}

pub type BoundsReport = ExperimentReport<BoundsRow, BoundsSummary>;

pub fn run_bounds(cfg: &ExperimentConfig) -> Result<BoundsReport, ExperimentError> {
    let warnings = cfg.validate(Command::Bounds)?;
    let g = &cfg.bounds_grid;
    let mut rows = Vec::new();
    for &n in &g.n {
        for &epsilon in &g.epsilon {
            for &delta in &g.delta {
                let mut settings = Vec::new();
                for &pm in &g.pi_min {
                    settings.push((Regime::Exact, None, Some(pm)));
                }
                for &a in &g.alpha {
                    settings.push((Regime::Approx, Some(a), None));
                }
                for (regime, alpha, pi_min) in settings {
                    let p = RateParams { n, epsilon, delta, alpha, pi_min };
                    let m = sample_size(regime, &p).map_err(|e| bad("bounds_grid", e.to_string()))?;
                    let families: &[LowerBoundFamily] = match regime {
                        Regime::Exact => &[LowerBoundFamily::ExactPiMin, LowerBoundFamily::ExactEps, LowerBoundFamily::ExactN],
                        Regime::Approx => &[LowerBoundFamily::ApproxLog, LowerBoundFamily::ApproxN],
                    };
                    for &family in families {
                        rows.push(BoundsRow {
                            regime,
                            n,
                            epsilon,
                            delta,
                            alpha,
                            pi_min,
                            sample_size: m,
                            family,
                            lower_bound: minimax_lower_bound(family, &p).ok(),
                        });
                    }
                }
            }
        }
    }
    let inconsistent = rows.iter().filter(|r| r.lower_bound.is_some_and(|lb| (r.sample_size as f64) < lb)).count();
    let summary = BoundsSummary { rows: rows.len(), inconsistent };
    Ok(ExperimentReport { command: Command::Bounds, config: cfg.clone(), rows, summary, warnings })
}
