//! Hard instance families behind the sample-complexity lower bounds, a greedy
//! packing-set builder, categorical KL, and LP checks of the separations.

use crate::distance::{point_to_set, DistanceError};
use crate::feasible::{build_system, membership, FeasibleError, SetKind, SetSpec};
use crate::games::{GameError, PayoffMatrix, Strategy, StrategyProfile};
use crate::rng;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstanceError {
    #[error("{name} = {value} is outside {range}")]
    Range { name: &'static str, value: f64, range: &'static str },
    #[error("packing stopped at {achieved} of {target} vectors")]
    Packing { achieved: usize, target: usize },
    #[error("p puts mass on action {0} where q has none")]
    AbsoluteContinuity(usize),
    #[error("distributions have different lengths")]
    Dimension,
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Feasible(#[from] FeasibleError),
    #[error(transparent)]
    Distance(#[from] DistanceError),
}

fn check(name: &'static str, value: f64, ok: bool, range: &'static str) -> Result<(), InstanceError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(InstanceError::Range { name, value, range })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LbFamily {
    Impossibility,
    EpsFamily,
    NPacking,
    AlphaLog,
    AlphaN,
}

impl LbFamily {
    pub const ALL: [LbFamily; 5] = [LbFamily::Impossibility, LbFamily::EpsFamily, LbFamily::NPacking, LbFamily::AlphaLog, LbFamily::AlphaN];

    pub fn is_packing(self) -> bool {
        matches!(self, LbFamily::NPacking | LbFamily::AlphaN)
    }
}

/// Inputs to [`make_lb_instance`]; each family reads only the fields it needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LbParams {
    pub pi: f64,
    pub epsilon: f64,
    pub alpha: f64,
    /// Number of actions for the packing families.
    pub n: usize,
    /// Packing vectors to generate.
    pub target: usize,
    pub seed: u64,
}

impl Default for LbParams {
    fn default() -> Self {
        LbParams { pi: 0.3, epsilon: 0.01, alpha: 0.1, n: 8, target: 4, seed: 0 }
    }
}

/// Derived constants of an instance, as used in its construction.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LbRecord {
    pub pi: Option<f64>,
    pub gamma: Option<f64>,
    pub beta: Option<f64>,
    pub epsilon: Option<f64>,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PackingSet {
    #[serde(rename = "D")]
    pub d: usize,
    pub vectors: Vec<Vec<i8>>,
    /// Smallest pairwise ℓ1 distance; `2 D` (the diameter) when fewer than two vectors.
    pub min_pairwise_l1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LbInstance {
    pub family: LbFamily,
    /// Pair families hold two profiles; packing families one per packing vector.
    pub profiles: Vec<StrategyProfile>,
    pub alpha: f64,
    pub kind: SetKind,
    pub certified_separation: f64,
    /// Point of the first profile's set that is far from the second profile's set.
    pub witness: Option<PayoffMatrix>,
    pub params: LbRecord,
    pub packing: Option<PackingSet>,
}

fn l1_signs(a: &[i8], b: &[i8]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).unsigned_abs() as f64).sum()
}

/// Greedy packing of balanced ±1 vectors at pairwise ℓ1 distance at least `d / 16`.
pub fn greedy_packing(d: usize, target: usize, seed: u64) -> Result<PackingSet, InstanceError> {
    check("D", d as f64, d >= 4 && d.is_multiple_of(2), "even integers >= 4")?;
    let min_dist = d as f64 / 16.0;
    let budget = 1000 * target.max(1);
    let mut r = rng::stream(seed, 0);
    let mut base: Vec<i8> = (0..d).map(|k| if k < d / 2 { 1 } else { -1 }).collect();
    let mut kept: Vec<Vec<i8>> = Vec::new();
    for _ in 0..budget {
        if kept.len() >= target {
            break;
        }
        base.shuffle(&mut r);
        if kept.iter().all(|v| l1_signs(v, &base) >= min_dist) {
            kept.push(base.clone());
        }
    }
    if kept.len() < target {
        return Err(InstanceError::Packing { achieved: kept.len(), target });
    }
    let mut min_pairwise_l1 = 2.0 * d as f64;
    for i in 0..kept.len() {
        for j in i + 1..kept.len() {
            min_pairwise_l1 = min_pairwise_l1.min(l1_signs(&kept[i], &kept[j]));
        }
    }
    assert!(min_pairwise_l1 >= min_dist);
    Ok(PackingSet { d, vectors: kept, min_pairwise_l1 })
}

/// KL divergence in nats.
pub fn kl_categorical(p: &Strategy, q: &Strategy) -> Result<f64, InstanceError> {
    if p.n() != q.n() {
        return Err(InstanceError::Dimension);
    }
    let mut kl = 0.0;
    for (i, (&a, &b)) in p.probs().iter().zip(q.probs()).enumerate() {
        if a > 0.0 {
            if b <= 0.0 {
                return Err(InstanceError::AbsoluteContinuity(i));
            }
            kl += a * (a / b).ln();
        }
    }
    Ok(kl)
}

fn profile(x: Vec<f64>, y: Vec<f64>) -> Result<StrategyProfile, InstanceError> {
    Ok(StrategyProfile::new(Strategy::new(x)?, Strategy::new(y)?)?)
}

fn e1(n: usize) -> Vec<f64> {
    Strategy::pure(n, 0).probs().to_vec()
}

fn pair_sets(v: &[i8], w: &[i8]) -> (Vec<usize>, Vec<usize>) {
    let plus = (0..v.len()).filter(|&k| v[k] == 1 && w[k] == -1).collect();
    let minus = (0..v.len()).filter(|&k| v[k] == -1 && w[k] == 1).collect();
    (plus, minus)
}

fn npacking_profile(v: &[i8], gamma: f64) -> Result<StrategyProfile, InstanceError> {
    let n = v.len();
    let y = v.iter().map(|&s| (1.0 + gamma * s as f64) / n as f64).collect();
    profile(e1(n), y)
}

fn alpha_n_profile(v: &[i8], alpha: f64, gamma: f64) -> Result<StrategyProfile, InstanceError> {
    let d = v.len();
    let mut x: Vec<f64> = v.iter().map(|&s| (alpha + gamma * s as f64) / d as f64).collect();
    x.push(1.0 - alpha);
    profile(x, e1(d + 1))
}

/// Witness matrix in the set of profile `i` of a packing instance, built against profile `j`.
pub fn packing_witness(inst: &LbInstance, i: usize, j: usize) -> Option<PayoffMatrix> {
    let pack = inst.packing.as_ref()?;
    let (v, w) = (pack.vectors.get(i)?, pack.vectors.get(j)?);
    let (plus, minus) = pair_sets(v, w);
    let gamma = inst.params.gamma?;
    match inst.family {
        LbFamily::NPacking => {
            let n = v.len();
            let kappa = (1.0 + gamma) / (1.0 - gamma);
            let y = inst.profiles[i].y.probs();
            let ratio = plus.iter().map(|&k| y[k]).sum::<f64>() / minus.iter().map(|&k| y[k]).sum::<f64>();
            assert!((ratio - kappa).abs() <= 1e-12 * kappa.max(1.0), "kappa {kappa} vs ratio {ratio}");
            let mut m = vec![vec![0.0; n]; n];
            for row in m.iter_mut().skip(1) {
                for &k in &plus {
                    row[k] = 1.0 / 3.0;
                }
                for &k in &minus {
                    row[k] = -kappa / 3.0;
                }
            }
            PayoffMatrix::new(m).ok()
        }
        LbFamily::AlphaN => {
            let n = v.len() + 1;
            let a = inst.alpha;
            let kappa = (a - gamma) / (a + gamma);
            let mut m = vec![vec![-1.0; n]; n];
            for row in m.iter_mut().take(n - 1) {
                row[0] = 0.0;
            }
            for &k in &plus {
                m[k][0] = -kappa;
            }
            for &k in &minus {
                m[k][0] = 1.0;
            }
            PayoffMatrix::new(m).ok()
        }
        _ => None,
    }
}

/// Builds the named hard family with its certified separation and witness.
pub fn make_lb_instance(family: LbFamily, p: &LbParams) -> Result<LbInstance, InstanceError> {
    let eps = p.epsilon;
    let mut rec = LbRecord { n: 2, ..LbRecord::default() };
    let mut inst = match family {
        LbFamily::Impossibility => {
            check("pi", p.pi, p.pi > 0.0 && p.pi < 1.0, "(0, 1)")?;
            rec.pi = Some(p.pi);
            LbInstance {
                family,
                profiles: vec![profile(vec![0.0, 1.0], vec![1.0, 0.0])?, profile(vec![p.pi, 1.0 - p.pi], vec![1.0, 0.0])?],
                alpha: 0.0,
                kind: SetKind::GsgRow,
                certified_separation: 1.0,
                witness: Some(PayoffMatrix::new(vec![vec![1.0, 0.0], vec![-1.0, 0.0]])?),
                params: rec,
                packing: None,
            }
        }
        LbFamily::EpsFamily => {
            check("epsilon", eps, eps > 0.0 && eps < 1.0 / 32f64.sqrt(), "(0, 1/sqrt(32))")?;
            let g = 2.0 * eps;
            rec.gamma = Some(g);
            rec.epsilon = Some(eps);
            LbInstance {
                family,
                profiles: vec![profile(vec![0.5, 0.5], vec![0.5, 0.5])?, profile(vec![0.5 + g, 0.5 - g], vec![0.5, 0.5])?],
                alpha: 0.0,
                kind: SetKind::GsgCol,
                certified_separation: 2.0 * eps,
                witness: Some(PayoffMatrix::identity(2)),
                params: rec,
                packing: None,
            }
        }
        LbFamily::AlphaLog => {
            let a = p.alpha;
            check("alpha", a, a > 0.0 && a < 0.25, "(0, 1/4)")?;
            check("epsilon", eps, eps > 0.0 && eps <= 0.125, "(0, 1/8]")?;
            let beta = 8.0 / 3.0 * eps * a;
            rec.beta = Some(beta);
            rec.epsilon = Some(eps);
            let x1 = a / 2.0 + beta / 2.0;
            LbInstance {
                family,
                profiles: vec![profile(vec![a / 2.0, 1.0 - a / 2.0], vec![1.0, 0.0])?, profile(vec![x1, 1.0 - x1], vec![1.0, 0.0])?],
                alpha: a,
                kind: SetKind::GsgRow,
                certified_separation: 2.0 * eps,
                witness: Some(PayoffMatrix::new(vec![vec![1.0, -1.0], vec![-1.0, -1.0]])?),
                params: rec,
                packing: None,
            }
        }
        LbFamily::NPacking => {
            check("epsilon", eps, eps > 0.0 && eps <= 1.0 / 384.0, "(0, 1/384]")?;
            let gamma = 192.0 * eps;
            let pack = greedy_packing(p.n, p.target.max(2), p.seed)?;
            rec.gamma = Some(gamma);
            rec.epsilon = Some(eps);
            rec.n = p.n;
            let profiles = pack.vectors.iter().map(|v| npacking_profile(v, gamma)).collect::<Result<_, _>>()?;
            LbInstance {
                family,
                profiles,
                alpha: 0.0,
                kind: SetKind::GsgRow,
                certified_separation: 2.0 * eps,
                witness: None,
                params: rec,
                packing: Some(pack),
            }
        }
        LbFamily::AlphaN => {
            let a = p.alpha;
            check("alpha", a, a > 0.0 && a < 0.5, "(0, 1/2)")?;
            check("epsilon", eps, eps > 0.0 && eps <= 1.0 / 128.0, "(0, 1/128]")?;
            check("n", p.n as f64, p.n >= 5 && p.n % 2 == 1, "odd integers >= 5")?;
            let gamma = 128.0 * a * eps;
            let pack = greedy_packing(p.n - 1, p.target.max(2), p.seed)?;
            rec.gamma = Some(gamma);
            rec.epsilon = Some(eps);
            rec.n = p.n;
            let profiles = pack.vectors.iter().map(|v| alpha_n_profile(v, a, gamma)).collect::<Result<_, _>>()?;
            LbInstance {
                family,
                profiles,
                alpha: a,
                kind: SetKind::GsgRow,
                certified_separation: 2.0 * eps,
                witness: None,
                params: rec,
                packing: Some(pack),
            }
        }
    };
    if family.is_packing() {
        inst.witness = packing_witness(&inst, 0, 1);
    }
    Ok(inst)
}

fn spec_of(inst: &LbInstance, k: usize) -> Result<SetSpec, InstanceError> {
    let pr = &inst.profiles[k];
    Ok(SetSpec::new(inst.kind, pr.x.clone(), pr.y.clone(), inst.alpha)?)
}

/// Is the witness a member of its own profile's set?
pub fn witness_feasible(inst: &LbInstance, tol: f64) -> Result<bool, InstanceError> {
    let Some(w) = &inst.witness else { return Ok(false) };
    Ok(membership(w.flat(), &build_system(&spec_of(inst, 0)?), tol)?.0)
}

/// LP distance from the witness to the second profile's set, against the certified value.
pub fn verify_separation(inst: &LbInstance, tol: f64) -> Result<(bool, f64), InstanceError> {
    let Some(w) = &inst.witness else { return Ok((false, 0.0)) };
    let measured = point_to_set(w.flat(), &build_system(&spec_of(inst, 1)?))?;
    Ok((measured >= inst.certified_separation - tol, measured))
}
