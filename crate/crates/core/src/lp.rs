//! Dense bounded-variable simplex for small box-constrained linear programs.
//!
//! Problems have the form `min c·x` subject to `a_r·x <= b_r` for every row and
//! `lo <= x <= hi`. Everything used in this crate is box-bounded, so the
//! objective is always bounded and the only terminal statuses are optimal,
//! infeasible, or a numerical failure.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

/// Tolerance on reduced costs when deciding optimality.
pub const REDUCED_COST_TOL: f64 = 1e-9;
/// Largest constraint violation accepted for an optimal point.
pub const OPTIMAL_VIOLATION_TOL: f64 = 1e-8;

const PIVOT_TOL: f64 = 1e-9;
const RATIO_TIE_TOL: f64 = 1e-12;
const PHASE_ONE_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("row {row} has {got} coefficients, expected {expected}")]
    RowLength { row: usize, got: usize, expected: usize },
    #[error("bound vectors have lengths {lo} and {hi}, expected {expected}")]
    BoundLength { lo: usize, hi: usize, expected: usize },
    #[error("variable {0} has a non-finite or inverted box")]
    BadBox(usize),
    #[error("non-finite data in row {0}")]
    NonFinite(usize),
}

/// A minimization problem over a finite box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub rows: Vec<(Vec<f64>, f64)>,
    pub var_lo: Vec<f64>,
    pub var_hi: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    NumericFailure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub point: Vec<f64>,
    pub value: f64,
    pub max_violation: f64,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

impl LpProblem {
    pub fn new(objective: Vec<f64>, var_lo: Vec<f64>, var_hi: Vec<f64>) -> Self {
        LpProblem {
            objective,
            rows: Vec::new(),
            var_lo,
            var_hi,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, bound: f64) {
        self.rows.push((coeffs, bound));
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.var_lo.len() != n || self.var_hi.len() != n {
            return Err(LpError::BoundLength {
                lo: self.var_lo.len(),
                hi: self.var_hi.len(),
                expected: n,
            });
        }
        for j in 0..n {
            let (l, h) = (self.var_lo[j], self.var_hi[j]);
            if !l.is_finite() || !h.is_finite() || l > h || !self.objective[j].is_finite() {
                return Err(LpError::BadBox(j));
            }
        }
        for (r, (c, b)) in self.rows.iter().enumerate() {
            if c.len() != n {
                return Err(LpError::RowLength {
                    row: r,
                    got: c.len(),
                    expected: n,
                });
            }
            if !b.is_finite() || c.iter().any(|v| !v.is_finite()) {
                return Err(LpError::NonFinite(r));
            }
        }
        Ok(())
    }

    /// Largest violation of any row or box bound at `x` (negative when strictly inside).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for (c, b) in &self.rows {
            let lhs: f64 = c.iter().zip(x).map(|(a, v)| a * v).sum();
            worst = worst.max(lhs - b);
        }
        for j in 0..x.len() {
            worst = worst.max(self.var_lo[j] - x[j]).max(x[j] - self.var_hi[j]);
        }
        worst
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Fixed-format MPS text, for feeding the same problem to an external solver.
    pub fn to_mps(&self, name: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "NAME          {name}");
        s.push_str("ROWS\n N  COST\n");
        for r in 0..self.rows.len() {
            let _ = writeln!(s, " L  R{r}");
        }
        s.push_str("COLUMNS\n");
        for j in 0..self.num_vars() {
            let col = format!("X{j}");
            if self.objective[j] != 0.0 {
                let _ = writeln!(s, "    {:<8}  {:<8}  {:>12e}", col, "COST", self.objective[j]);
            }
            for (r, (c, _)) in self.rows.iter().enumerate() {
                if c[j] != 0.0 {
                    let _ = writeln!(s, "    {:<8}  {:<8}  {:>12e}", col, format!("R{r}"), c[j]);
                }
            }
        }
        s.push_str("RHS\n");
        for (r, (_, b)) in self.rows.iter().enumerate() {
            if *b != 0.0 {
                let _ = writeln!(s, "    {:<8}  {:<8}  {:>12e}", "RHS", format!("R{r}"), b);
            }
        }
        s.push_str("BOUNDS\n");
        for j in 0..self.num_vars() {
            let col = format!("X{j}");
            let _ = writeln!(s, " LO {:<8}  {:<8}  {:>12e}", "BND", col, self.var_lo[j]);
            let _ = writeln!(s, " UP {:<8}  {:<8}  {:>12e}", "BND", col, self.var_hi[j]);
        }
        s.push_str("ENDATA\n");
        s
    }
}

/// Working tableau. Columns are structural variables (shifted to start at 0),
/// then one slack per row, then artificials; the last column holds `B^-1 b`.
struct Tableau {
    rows: usize,
    cols: usize,
    t: Vec<f64>,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    at_upper: Vec<bool>,
    upper: Vec<f64>,
}

enum PhaseEnd {
    Optimal,
    Failed,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, j: usize) -> f64 {
        self.t[r * (self.cols + 1) + j]
    }

    fn basic_values(&self) -> Vec<f64> {
        let stride = self.cols + 1;
        let mut vals: Vec<f64> = (0..self.rows).map(|r| self.t[r * stride + self.cols]).collect();
        for j in 0..self.cols {
            if !self.in_basis[j] && self.at_upper[j] {
                let u = self.upper[j];
                for (r, v) in vals.iter_mut().enumerate() {
                    *v -= self.t[r * stride + j] * u;
                }
            }
        }
        vals
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for r in 0..self.rows {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                let row = &self.t[r * (self.cols + 1)..r * (self.cols + 1) + self.cols];
                for (dj, a) in d.iter_mut().zip(row) {
                    *dj -= cb * a;
                }
            }
        }
        d
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let stride = self.cols + 1;
        let piv = self.t[pr * stride + pc];
        for k in 0..stride {
            self.t[pr * stride + k] /= piv;
        }
        let prow: Vec<f64> = self.t[pr * stride..(pr + 1) * stride].to_vec();
        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let f = self.t[r * stride + pc];
            if f != 0.0 {
                let row = &mut self.t[r * stride..(r + 1) * stride];
                for (a, p) in row.iter_mut().zip(&prow) {
                    *a -= f * p;
                }
                row[pc] = 0.0;
            }
        }
        let leaving = self.basis[pr];
        self.in_basis[leaving] = false;
        self.in_basis[pc] = true;
        self.at_upper[pc] = false;
        self.basis[pr] = pc;
    }

    /// Bland-rule simplex over the columns accepted by `allowed`.
    fn run(&mut self, cost: &[f64], allowed: usize, max_iter: usize) -> PhaseEnd {
        for _ in 0..max_iter {
            let d = self.reduced_costs(cost);
            let entering = (0..allowed).find(|&j| {
                !self.in_basis[j]
                    && self.upper[j] > 0.0
                    && ((!self.at_upper[j] && d[j] < -REDUCED_COST_TOL)
                        || (self.at_upper[j] && d[j] > REDUCED_COST_TOL))
            });
            let Some(j) = entering else {
                return PhaseEnd::Optimal;
            };
            let dir = if self.at_upper[j] { -1.0 } else { 1.0 };
            let vals = self.basic_values();

            let mut step = self.upper[j];
            let mut leave: Option<(usize, bool)> = None;
            for r in 0..self.rows {
                let a = self.at(r, j);
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let rate = -dir * a;
                let k = self.basis[r];
                let (lim, to_upper) = if rate < 0.0 {
                    (vals[r].max(0.0) / -rate, false)
                } else if self.upper[k].is_finite() {
                    ((self.upper[k] - vals[r]).max(0.0) / rate, true)
                } else {
                    continue;
                };
                let better = if lim < step - RATIO_TIE_TOL {
                    true
                } else if lim <= step + RATIO_TIE_TOL {
                    match leave {
                        None => true,
                        Some((lr, _)) => k < self.basis[lr],
                    }
                } else {
                    false
                };
                if better {
                    step = lim;
                    leave = Some((r, to_upper));
                }
            }
            if !step.is_finite() {
                return PhaseEnd::Failed;
            }
            match leave {
                None => self.at_upper[j] = !self.at_upper[j],
                Some((r, to_upper)) => {
                    let k = self.basis[r];
                    self.pivot(r, j);
                    self.at_upper[k] = to_upper;
                }
            }
        }
        PhaseEnd::Failed
    }
}

/// Solve `p` with a two-phase bounded simplex using Bland's rule.
pub fn solve_lp(p: &LpProblem) -> Result<LpSolution, LpError> {
    p.validate()?;
    let nv = p.num_vars();
    let nr = p.rows.len();

    let width: Vec<f64> = p.var_lo.iter().zip(&p.var_hi).map(|(l, h)| h - l).collect();
    let shifted: Vec<f64> = p
        .rows
        .iter()
        .map(|(c, b)| b - c.iter().zip(&p.var_lo).map(|(a, l)| a * l).sum::<f64>())
        .collect();
    let negative: Vec<bool> = shifted.iter().map(|b| *b < 0.0).collect();
    let n_art = negative.iter().filter(|v| **v).count();
    let cols = nv + nr + n_art;
    let stride = cols + 1;

    let mut tab = Tableau {
        rows: nr,
        cols,
        t: vec![0.0; nr * stride],
        basis: vec![0; nr],
        in_basis: vec![false; cols],
        at_upper: vec![false; cols],
        upper: width.iter().copied().chain(std::iter::repeat_n(f64::INFINITY, nr + n_art)).collect(),
    };
    let mut art = nv + nr;
    for (r, (c, _)) in p.rows.iter().enumerate() {
        let sign = if negative[r] { -1.0 } else { 1.0 };
        for j in 0..nv {
            tab.t[r * stride + j] = sign * c[j];
        }
        tab.t[r * stride + nv + r] = sign;
        tab.t[r * stride + cols] = sign * shifted[r];
        let b = if negative[r] {
            tab.t[r * stride + art] = 1.0;
            art += 1;
            art - 1
        } else {
            nv + r
        };
        tab.basis[r] = b;
        tab.in_basis[b] = true;
    }

    let max_iter = 200 * (cols + nr + 10);
    if n_art > 0 {
        let mut cost1 = vec![0.0; cols];
        for c in cost1.iter_mut().skip(nv + nr) {
            *c = 1.0;
        }
        if let PhaseEnd::Failed = tab.run(&cost1, cols, max_iter) {
            return Ok(failure(p, LpStatus::NumericFailure));
        }
        let vals = tab.basic_values();
        let infeas: f64 = (0..nr)
            .filter(|&r| tab.basis[r] >= nv + nr)
            .map(|r| vals[r].max(0.0))
            .sum();
        let scale = 1.0 + shifted.iter().fold(0.0f64, |m, b| m.max(b.abs()));
        if infeas > PHASE_ONE_TOL * scale {
            return Ok(failure(p, LpStatus::Infeasible));
        }
        for u in tab.upper.iter_mut().skip(nv + nr) {
            *u = 0.0;
        }
    }

    let mut cost2 = vec![0.0; cols];
    cost2[..nv].copy_from_slice(&p.objective);
    if let PhaseEnd::Failed = tab.run(&cost2, nv + nr, max_iter) {
        return Ok(failure(p, LpStatus::NumericFailure));
    }

    let vals = tab.basic_values();
    let mut shifted_x = vec![0.0; nv];
    for (j, xj) in shifted_x.iter_mut().enumerate() {
        if tab.at_upper[j] && !tab.in_basis[j] {
            *xj = width[j];
        }
    }
    for r in 0..nr {
        let k = tab.basis[r];
        if k < nv {
            shifted_x[k] = vals[r];
        }
    }
    let point: Vec<f64> = (0..nv)
        .map(|j| p.var_lo[j] + shifted_x[j].clamp(0.0, width[j]))
        .collect();
    let value = p.objective_value(&point);
    let max_violation = p.max_violation(&point);
    let status = if max_violation <= OPTIMAL_VIOLATION_TOL {
        LpStatus::Optimal
    } else {
        LpStatus::NumericFailure
    };
    Ok(LpSolution {
        status,
        point,
        value,
        max_violation,
    })
}

fn failure(p: &LpProblem, status: LpStatus) -> LpSolution {
    LpSolution {
        status,
        point: p.var_lo.clone(),
        value: f64::NAN,
        max_violation: f64::NAN,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn one_dimensional_lower_cut() {
        let mut p = LpProblem::new(vec![1.0], vec![-1.0], vec![1.0]);
        p.add_row(vec![-1.0], -0.3);
        let s = solve_lp(&p).unwrap();
        assert!(s.is_optimal());
        assert!((s.value - 0.3).abs() < 1e-12);
    }

    #[test]
    fn epigraph_of_two_absolute_values() {
        // variables (t, s): minimize s with s >= |1-t| and s >= |1+t|
        let mut p = LpProblem::new(vec![0.0, 1.0], vec![-1.0, 0.0], vec![1.0, 4.0]);
        p.add_row(vec![-1.0, -1.0], -1.0);
        p.add_row(vec![1.0, -1.0], 1.0);
        p.add_row(vec![1.0, -1.0], -1.0);
        p.add_row(vec![-1.0, -1.0], 1.0);
        let s = solve_lp(&p).unwrap();
        assert!(s.is_optimal());
        assert!((s.value - 1.0).abs() < 1e-12);
        assert!(s.point[0].abs() < 1e-12);
    }

    #[test]
    fn infeasible_toy() {
        let mut p = LpProblem::new(vec![1.0], vec![-1.0], vec![1.0]);
        p.add_row(vec![1.0], -2.0);
        assert_eq!(solve_lp(&p).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn malformed_row_is_an_error() {
        let mut p = LpProblem::new(vec![1.0, 0.0], vec![0.0, 0.0], vec![1.0, 1.0]);
        p.add_row(vec![1.0], 1.0);
        assert!(matches!(solve_lp(&p), Err(LpError::RowLength { .. })));
    }

    #[test]
    fn fixed_variables_are_respected() {
        let mut p = LpProblem::new(vec![-1.0, -1.0], vec![0.5, -1.0], vec![0.5, 1.0]);
        p.add_row(vec![1.0, 1.0], 1.2);
        let s = solve_lp(&p).unwrap();
        assert!(s.is_optimal());
        assert!((s.point[0] - 0.5).abs() < 1e-12);
        assert!((s.point[1] - 0.7).abs() < 1e-12);
    }

    fn random_problem(rng: &mut ChaCha8Rng) -> (LpProblem, Vec<f64>) {
        let n = rng.gen_range(1..7);
        let m = rng.gen_range(0..10);
        let lo: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..0.0)).collect();
        let hi: Vec<f64> = lo.iter().map(|l| l + rng.gen_range(0.0..3.0)).collect();
        let anchor: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| rng.gen_range(*l..=*h)).collect();
        let mut p = LpProblem::new((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(), lo, hi);
        for _ in 0..m {
            let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lhs: f64 = c.iter().zip(&anchor).map(|(a, v)| a * v).sum();
            p.add_row(c, lhs + rng.gen_range(0.0..0.5));
        }
        (p, anchor)
    }

    #[test]
    fn weak_duality_against_feasible_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let (p, anchor) = random_problem(&mut rng);
            let s = solve_lp(&p).unwrap();
            assert!(s.is_optimal());
            assert!(s.max_violation <= 1e-8);
            assert!((s.value - p.objective_value(&s.point)).abs() <= 1e-8);
            assert!(s.value <= p.objective_value(&anchor) + 1e-8);
            for _ in 0..50 {
                let z: Vec<f64> = p
                    .var_lo
                    .iter()
                    .zip(&p.var_hi)
                    .map(|(l, h)| rng.gen_range(*l..=*h))
                    .collect();
                if p.max_violation(&z) <= 0.0 {
                    assert!(s.value <= p.objective_value(&z) + 1e-8);
                }
            }
        }
    }

    #[test]
    fn identical_problems_give_identical_bits() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (p, _) = random_problem(&mut rng);
        let a = solve_lp(&p).unwrap();
        let b = solve_lp(&p.clone()).unwrap();
        assert_eq!(a.point.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                   b.point.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn mps_export_lists_every_row() {
        let mut p = LpProblem::new(vec![1.0, 0.0], vec![0.0, -1.0], vec![1.0, 1.0]);
        p.add_row(vec![1.0, 1.0], 0.5);
        p.add_row(vec![0.0, -1.0], 0.25);
        let text = p.to_mps("toy");
        assert!(text.starts_with("NAME"));
        assert!(text.contains(" L  R1"));
        assert!(text.trim_end().ends_with("ENDATA"));
    }
}
