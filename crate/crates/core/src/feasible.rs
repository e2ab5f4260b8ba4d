//! Feasible payoff sets as halfspace systems over flattened matrices.
//!
//! A matrix `M` is flattened row-major, `z[i * n + j] = M[i][j]`. Every system
//! also carries the box `[-1, 1]` on each coordinate.

use crate::games::{PayoffMatrix, Strategy};
use crate::lp::{solve_lp, LpError, LpProblem, LpStatus};
use crate::rng;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Chebyshev radius below which a set is treated as having empty interior.
pub const MIN_INTERIOR_RADIUS: f64 = 1e-10;
const SAMPLE_TOL: f64 = 1e-9;
const EQUALITY_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeasibleError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("alpha must be finite and nonnegative, got {0}")]
    BadAlpha(f64),
    #[error("linear program ended with status {0:?}")]
    Lp(LpStatus),
    #[error(transparent)]
    Malformed(#[from] LpError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub c: Vec<f64>,
    pub b: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SetKind {
    /// Row player's constraints in a general-sum game.
    GsgRow,
    /// Column player's constraints in a general-sum game.
    GsgCol,
    /// Both players' constraints on the single matrix of a zero-sum game.
    Zsg,
}

/// `{ z : c_r · z <= b_r for all r, |z_k| <= box }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfspaceSystem {
    pub dim: usize,
    pub rows: Vec<Halfspace>,
    #[serde(rename = "box")]
    pub box_bound: f64,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetSpec {
    pub kind: SetKind,
    pub x: Strategy,
    pub y: Strategy,
    pub alpha: f64,
}

impl SetSpec {
    pub fn new(kind: SetKind, x: Strategy, y: Strategy, alpha: f64) -> Result<Self, FeasibleError> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(FeasibleError::BadAlpha(alpha));
        }
        if x.n() != y.n() {
            return Err(FeasibleError::Dimension {
                expected: x.n(),
                got: y.n(),
            });
        }
        Ok(SetSpec { kind, x, y, alpha })
    }

    pub fn n(&self) -> usize {
        self.x.n()
    }
}

impl HalfspaceSystem {
    /// The bare box `[-1, 1]^dim`.
    pub fn box_only(dim: usize) -> Self {
        HalfspaceSystem {
            dim,
            rows: Vec::new(),
            box_bound: 1.0,
            label: "Box".into(),
        }
    }

    pub fn row_value(&self, r: usize, z: &[f64]) -> f64 {
        self.rows[r].c.iter().zip(z).map(|(a, v)| a * v).sum()
    }

    /// LP over the set with the given objective.
    pub fn to_lp(&self, objective: Vec<f64>) -> LpProblem {
        let mut p = LpProblem::new(objective, vec![-self.box_bound; self.dim], vec![self.box_bound; self.dim]);
        for h in &self.rows {
            p.add_row(h.c.clone(), h.b);
        }
        p
    }
}

fn kd(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

fn row_rows(x: &[f64], y: &[f64], alpha: f64) -> Vec<Halfspace> {
    let n = x.len();
    (0..n)
        .map(|i| {
            let mut c = vec![0.0; n * n];
            for k in 0..n {
                for j in 0..n {
                    c[k * n + j] = (x[k] - kd(k, i)) * y[j];
                }
            }
            Halfspace { c, b: alpha }
        })
        .collect()
}

fn col_rows(x: &[f64], y: &[f64], alpha: f64, maximizer: bool) -> Vec<Halfspace> {
    let n = x.len();
    let sign = if maximizer { -1.0 } else { 1.0 };
    (0..n)
        .map(|j| {
            let mut c = vec![0.0; n * n];
            for i in 0..n {
                for k in 0..n {
                    c[i * n + k] = sign * x[i] * (y[k] - kd(k, j));
                }
            }
            Halfspace { c, b: alpha }
        })
        .collect()
}

/// Halfspace description of the feasible set named by `spec`.
pub fn build_system(spec: &SetSpec) -> HalfspaceSystem {
    let (x, y, a) = (spec.x.probs(), spec.y.probs(), spec.alpha);
    let rows = match spec.kind {
        SetKind::GsgRow => row_rows(x, y, a),
        SetKind::GsgCol => col_rows(x, y, a, false),
        SetKind::Zsg => {
            let mut r = row_rows(x, y, a);
            r.extend(col_rows(x, y, a, true));
            r
        }
    };
    HalfspaceSystem {
        dim: spec.n() * spec.n(),
        rows,
        box_bound: 1.0,
        label: format!("{:?}", spec.kind),
    }
}

/// Largest violation over rows and box; member iff it is at most `tol`.
///
/// Rows with an all-zero normal and nonnegative bound hold for every point and
/// are skipped, so a strictly interior point has a negative violation.
pub fn membership(z: &[f64], sys: &HalfspaceSystem, tol: f64) -> Result<(bool, f64), FeasibleError> {
    if z.len() != sys.dim {
        return Err(FeasibleError::Dimension {
            expected: sys.dim,
            got: z.len(),
        });
    }
    let mut worst = f64::NEG_INFINITY;
    for (r, h) in sys.rows.iter().enumerate() {
        if h.b >= 0.0 && h.c.iter().all(|v| *v == 0.0) {
            continue;
        }
        worst = worst.max(sys.row_value(r, z) - h.b);
    }
    for v in z {
        worst = worst.max(v.abs() - sys.box_bound);
    }
    Ok((worst <= tol, worst))
}

pub fn matrix_membership(m: &PayoffMatrix, sys: &HalfspaceSystem, tol: f64) -> Result<(bool, f64), FeasibleError> {
    membership(m.flat(), sys, tol)
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Chebyshev center of the set, or the zero vector when the set has empty interior.
pub fn interior_point(sys: &HalfspaceSystem) -> Result<Vec<f64>, FeasibleError> {
    let d = sys.dim;
    // variables (z, r), maximize r
    let mut obj = vec![0.0; d + 1];
    obj[d] = -1.0;
    let mut lo = vec![-sys.box_bound; d + 1];
    let mut hi = vec![sys.box_bound; d + 1];
    lo[d] = 0.0;
    hi[d] = sys.box_bound;
    let mut p = LpProblem::new(obj, lo, hi);
    for h in &sys.rows {
        let nrm = norm2(&h.c);
        if nrm == 0.0 {
            continue;
        }
        let mut c = h.c.clone();
        c.push(nrm);
        p.add_row(c, h.b);
    }
    for k in 0..d {
        for s in [1.0, -1.0] {
            let mut c = vec![0.0; d + 1];
            c[k] = s;
            c[d] = 1.0;
            p.add_row(c, sys.box_bound);
        }
    }
    let sol = solve_lp(&p)?;
    if sol.status != LpStatus::Optimal {
        return Err(FeasibleError::Lp(sol.status));
    }
    if sol.point[d] <= MIN_INTERIOR_RADIUS {
        return Ok(vec![0.0; d]);
    }
    Ok(sol.point[..d].to_vec())
}

/// Rows that hold with equality on the whole set.
pub fn implicit_equalities(sys: &HalfspaceSystem) -> Result<Vec<usize>, FeasibleError> {
    let mut eq = Vec::new();
    for (r, h) in sys.rows.iter().enumerate() {
        if h.c.iter().all(|v| *v == 0.0) {
            continue;
        }
        let sol = solve_lp(&sys.to_lp(h.c.clone()))?;
        if sol.status != LpStatus::Optimal {
            return Err(FeasibleError::Lp(sol.status));
        }
        if h.b - sol.value <= EQUALITY_SLACK {
            eq.push(r);
        }
    }
    Ok(eq)
}

// Orthonormal basis of the span of `vs` by modified Gram-Schmidt.
fn orthonormal_span(vs: &[&[f64]]) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vs {
        let mut w = v.to_vec();
        for q in &basis {
            let dot: f64 = w.iter().zip(q).map(|(a, b)| a * b).sum();
            for (wi, qi) in w.iter_mut().zip(q) {
                *wi -= dot * qi;
            }
        }
        let nrm = norm2(&w);
        if nrm > 1e-10 * norm2(v).max(1.0) {
            basis.push(w.iter().map(|a| a / nrm).collect());
        }
    }
    basis
}

/// Hit-and-run chain started from [`interior_point`].
///
/// Directions are drawn uniformly on the sphere of the affine hull of the
/// set, so equality-like sets are explored inside their hull instead of
/// collapsing onto the start point.
pub fn hit_and_run_sample(sys: &HalfspaceSystem, k: usize, burn_in: usize, seed: u64) -> Result<Vec<Vec<f64>>, FeasibleError> {
    let d = sys.dim;
    let mut z = interior_point(sys)?;
    let flat = membership(&z, sys, 0.0)?.1 >= -MIN_INTERIOR_RADIUS;
    let equalities = if flat { implicit_equalities(sys)? } else { Vec::new() };
    let normals: Vec<&[f64]> = equalities.iter().map(|&r| sys.rows[r].c.as_slice()).collect();
    let fixed = orthonormal_span(&normals);
    let active: Vec<usize> = (0..sys.rows.len()).filter(|r| !equalities.contains(r)).collect();

    let mut rng = rng::stream(seed, 0);
    let steps_per_sample = 3;
    let mut out = Vec::with_capacity(k);
    let total = burn_in + k * steps_per_sample;
    for step in 0..total {
        let mut dir: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        for q in &fixed {
            let dot: f64 = dir.iter().zip(q).map(|(a, b)| a * b).sum();
            for (di, qi) in dir.iter_mut().zip(q) {
                *di -= dot * qi;
            }
        }
        let nrm = norm2(&dir);
        let u: f64 = rng.gen();
        if nrm > 1e-12 {
            for v in dir.iter_mut() {
                *v /= nrm;
            }
            let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
            for &r in &active {
                let cd: f64 = sys.rows[r].c.iter().zip(&dir).map(|(a, b)| a * b).sum();
                let slack = (sys.rows[r].b - sys.row_value(r, &z)).max(0.0);
                if cd > 1e-14 {
                    hi = hi.min(slack / cd);
                } else if cd < -1e-14 {
                    lo = lo.max(slack / cd);
                }
            }
            for (zk, dk) in z.iter().zip(&dir) {
                if dk.abs() > 1e-14 {
                    let a = (sys.box_bound - zk) / dk;
                    let b = (-sys.box_bound - zk) / dk;
                    hi = hi.min(a.max(b));
                    lo = lo.max(a.min(b));
                }
            }
            if hi > lo {
                let t = lo + u * (hi - lo);
                let cand: Vec<f64> = z.iter().zip(&dir).map(|(a, b)| a + t * b).collect();
                if membership(&cand, sys, SAMPLE_TOL)?.0 {
                    z = cand;
                }
            }
        }
        if step >= burn_in && (step - burn_in + 1).is_multiple_of(steps_per_sample) {
            out.push(z.clone());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::{is_alpha_nash, Game, StrategyProfile, MEMBERSHIP_TOL};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn s(v: &[f64]) -> Strategy {
        Strategy::new(v.to_vec()).unwrap()
    }

    fn spec(kind: SetKind, x: &[f64], y: &[f64], a: f64) -> SetSpec {
        SetSpec::new(kind, s(x), s(y), a).unwrap()
    }

    // count of rows that are not identically zero, each checked against an expected normal
    fn nonzero_rows(sys: &HalfspaceSystem) -> Vec<Vec<f64>> {
        sys.rows.iter().filter(|h| h.c.iter().any(|v| *v != 0.0)).map(|h| h.c.clone()).collect()
    }

    #[test]
    fn pure_profile_row_system() {
        let sys = build_system(&spec(SetKind::GsgRow, &[0.0, 1.0], &[1.0, 0.0], 0.0));
        // a21 - a11 <= 0
        assert_eq!(nonzero_rows(&sys), vec![vec![-1.0, 0.0, 1.0, 0.0]]);
    }

    #[test]
    fn mixed_profile_row_system_is_an_equality() {
        let p = 0.3;
        let sys = build_system(&spec(SetKind::GsgRow, &[p, 1.0 - p], &[1.0, 0.0], 0.0));
        let rows = nonzero_rows(&sys);
        assert_eq!(rows.len(), 2);
        // the two rows are opposite multiples of a11 - a21
        assert!((rows[0][0] + (1.0 - p)).abs() < 1e-15 && (rows[0][2] - (1.0 - p)).abs() < 1e-15);
        assert!((rows[1][0] - p).abs() < 1e-15 && (rows[1][2] + p).abs() < 1e-15);
    }

    #[test]
    fn zero_sum_pure_system_orders_entries() {
        let sys = build_system(&spec(SetKind::Zsg, &[0.0, 1.0], &[1.0, 0.0], 0.0));
        let rows = nonzero_rows(&sys);
        // a21 <= a11 and a22 <= a21
        assert!(rows.contains(&vec![-1.0, 0.0, 1.0, 0.0]));
        assert!(rows.contains(&vec![0.0, 0.0, -1.0, 1.0]));
        assert_eq!(rows.len(), 2);
    }

    #[test]
    fn membership_examples() {
        let sys0 = build_system(&spec(SetKind::GsgRow, &[0.0, 1.0], &[1.0, 0.0], 0.0));
        assert!(membership(&[0.0; 4], &sys0, 1e-9).unwrap().0);
        let (ok, v) = membership(&[1.0, 0.0, -1.0, 0.0], &sys0, 1e-9).unwrap();
        assert!(ok && v <= 0.0);
        let row_viol = sys0.row_value(0, &[1.0, 0.0, -1.0, 0.0]) - sys0.rows[0].b;
        assert_eq!(row_viol, -2.0);
        let sys = build_system(&spec(SetKind::GsgRow, &[0.0, 1.0], &[1.0, 0.0], 0.2));
        let (ok, v) = membership(&[0.0, 0.0, 0.3, 0.0], &sys, 1e-9).unwrap();
        assert!(!ok);
        assert!((v - 0.1).abs() < 1e-12);
        assert!(membership(&[0.0; 3], &sys, 1e-9).is_err());
    }

    #[test]
    fn interior_point_examples() {
        let sys = build_system(&spec(SetKind::GsgRow, &[0.0, 1.0], &[1.0, 0.0], 0.0));
        let z = interior_point(&sys).unwrap();
        assert!(z[0] - z[2] > 0.5);
        assert!(membership(&z, &sys, 0.0).unwrap().1 < 0.0);
        let flat = build_system(&spec(SetKind::GsgRow, &[0.5, 0.5], &[1.0, 0.0], 0.0));
        assert_eq!(interior_point(&flat).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn zero_sum_rows_contain_row_player_rows() {
        let sz = build_system(&spec(SetKind::Zsg, &[0.2, 0.3, 0.5], &[0.6, 0.0, 0.4], 0.1));
        let sr = build_system(&spec(SetKind::GsgRow, &[0.2, 0.3, 0.5], &[0.6, 0.0, 0.4], 0.1));
        for h in &sr.rows {
            assert!(sz.rows.contains(h));
        }
    }

    fn random_strategy(rng: &mut ChaCha8Rng, n: usize) -> Strategy {
        let w: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.25) { 0.0 } else { rng.gen() }).collect();
        Strategy::from_weights(&w).unwrap_or_else(|_| Strategy::pure(n, 0))
    }

    #[test]
    fn membership_agrees_with_gap_checks() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for kind in [SetKind::GsgRow, SetKind::GsgCol, SetKind::Zsg] {
            for _ in 0..1000 {
                let n = rng.gen_range(1..=6);
                let x = random_strategy(&mut rng, n);
                let y = random_strategy(&mut rng, n);
                let alpha = rng.gen_range(0.0..0.6);
                let a = PayoffMatrix::from_flat(n, (0..n * n).map(|_| rng.gen_range(-1.0..=1.0)).collect()).unwrap();
                let sys = build_system(&SetSpec::new(kind, x.clone(), y.clone(), alpha).unwrap());
                let p = StrategyProfile::new(x, y).unwrap();
                let zero = PayoffMatrix::zeros(n);
                let game = match kind {
                    SetKind::GsgRow => Game::Gsg { a: a.clone(), b: zero },
                    SetKind::GsgCol => Game::Gsg { a: zero, b: a.clone() },
                    SetKind::Zsg => Game::Zsg { a: a.clone() },
                };
                let by_gap = is_alpha_nash(&game, &p, alpha, MEMBERSHIP_TOL).unwrap();
                let (by_sys, _) = membership(a.flat(), &sys, MEMBERSHIP_TOL).unwrap();
                assert_eq!(by_gap, by_sys);
                if by_sys {
                    let wider = build_system(&SetSpec::new(kind, p.x.clone(), p.y.clone(), alpha + 0.1).unwrap());
                    assert!(membership(a.flat(), &wider, MEMBERSHIP_TOL).unwrap().0);
                }
            }
        }
    }

    #[test]
    fn box_sampler_is_centered_and_deterministic() {
        let sys = HalfspaceSystem::box_only(4);
        let pts = hit_and_run_sample(&sys, 1000, 100, 3).unwrap();
        assert_eq!(pts.len(), 1000);
        for k in 0..4 {
            let mean = pts.iter().map(|p| p[k]).sum::<f64>() / 1000.0;
            assert!(mean.abs() < 0.1, "coordinate {k} mean {mean}");
        }
        assert_eq!(pts, hit_and_run_sample(&sys, 1000, 100, 3).unwrap());
    }

    #[test]
    fn sampler_stays_feasible_and_explores_flat_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let n = rng.gen_range(2..=3);
            let kind = [SetKind::GsgRow, SetKind::GsgCol, SetKind::Zsg][rng.gen_range(0..3)];
            let alpha = if rng.gen_bool(0.5) { 0.0 } else { 0.2 };
            let sys = build_system(&SetSpec::new(kind, random_strategy(&mut rng, n), random_strategy(&mut rng, n), alpha).unwrap());
            let pts = hit_and_run_sample(&sys, 50, 20, 1).unwrap();
            assert_eq!(pts.len(), 50);
            for p in &pts {
                assert!(membership(p, &sys, 1e-9).unwrap().0);
            }
        }
        let flat = build_system(&spec(SetKind::GsgRow, &[0.5, 0.5], &[1.0, 0.0], 0.0));
        let pts = hit_and_run_sample(&flat, 200, 50, 2).unwrap();
        let spread = pts.iter().map(|p| p[1].abs()).fold(0.0, f64::max);
        assert!(spread > 0.5);
        for p in &pts {
            assert!((p[0] - p[2]).abs() < 1e-9);
        }
    }

    #[test]
    fn system_json_shape() {
        let sys = build_system(&spec(SetKind::GsgRow, &[0.0, 1.0], &[1.0, 0.0], 0.0));
        let v: serde_json::Value = serde_json::to_value(&sys).unwrap();
        assert_eq!(v["dim"], 4);
        assert_eq!(v["box"], 1.0);
        assert_eq!(v["label"], "GsgRow");
        assert_eq!(v["rows"][0]["c"].as_array().unwrap().len(), 4);
        let back: HalfspaceSystem = serde_json::from_value(v).unwrap();
        assert_eq!(back, sys);
    }
}
