//! Closed-form concentration bounds, subset sups, sample sizes, and minimax
//! lower bounds. All logarithms are natural.

use crate::games::{Strategy, SUPPORT_THRESHOLD};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest support handled by the brute-force subset enumeration.
pub const MAX_EXACT_SUBSET_DIM: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RateError {
    #[error("{name} = {value} is outside {range}")]
    Range { name: &'static str, value: f64, range: &'static str },
    #[error("missing parameter {0}")]
    Missing(&'static str),
    #[error("exact subset enumeration limited to {MAX_EXACT_SUBSET_DIM} actions, got {0}")]
    TooLarge(usize),
    #[error("strategies have different lengths")]
    Dimension,
}

fn check(name: &'static str, value: f64, ok: bool, range: &'static str) -> Result<(), RateError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(RateError::Range { name, value, range })
    }
}

fn unit_open(name: &'static str, v: f64) -> Result<(), RateError> {
    check(name, v, v > 0.0 && v < 1.0, "(0, 1)")
}

/// High-probability ℓ1 deviation of an empirical distribution on `d` atoms after `m` draws.
pub fn l1_bound(d: usize, m: u64, delta: f64) -> Result<f64, RateError> {
    check("m", m as f64, m >= 1, "[1, inf)")?;
    check("delta", delta, delta > 0.0 && delta <= 1.0, "(0, 1]")?;
    let m = m as f64;
    Ok(((2.0 * (1.0 / delta).ln() + 2.0 * d as f64 * (6.0 * m).ln()) / m).sqrt())
}

/// Draws after which every action of probability at least `beta` has been seen, w.p. `1 - delta`.
pub fn support_id_samples(d: usize, beta: f64, delta: f64) -> Result<f64, RateError> {
    unit_open("beta", beta)?;
    unit_open("delta", delta)?;
    Ok((d as f64 / delta).ln() / (1.0 / (1.0 - beta)).ln())
}

/// Uniform deviation bound over subsets of true mass at most `beta`.
pub fn subset_bernstein_bound(d: usize, m: u64, delta: f64, beta: f64) -> Result<f64, RateError> {
    check("m", m as f64, m > 2, "(2, inf)")?;
    check("delta", delta, delta > 0.0 && delta <= 1.0, "(0, 1]")?;
    check("beta", beta, (0.0..=1.0).contains(&beta), "[0, 1]")?;
    let (m, l) = (m as f64, d as f64 + (1.0 / delta).ln());
    Ok((4.0 * beta * l / m).sqrt() + 4.0 * l / m)
}

/// Companion of [`subset_bernstein_bound`] driven by the empirical mass of the subset.
pub fn empirical_subset_bound(d: usize, m: u64, delta: f64, empirical_mass: f64) -> Result<f64, RateError> {
    check("m", m as f64, m > 2, "(2, inf)")?;
    check("delta", delta, delta > 0.0 && delta <= 1.0, "(0, 1]")?;
    check("empirical_mass", empirical_mass, (0.0..=1.0).contains(&empirical_mass), "[0, 1]")?;
    let (m, l) = (m as f64, d as f64 + (4.0 / delta).ln());
    Ok((2.0 * empirical_mass * l / m).sqrt() + 4.0 * l / (m - 1.0))
}

/// `(deviation, mean)` bounds on the missing mass after `m` draws on `d` atoms.
pub fn missing_mass_bounds(d: usize, m: u64, delta: f64) -> Result<(f64, f64), RateError> {
    check("m", m as f64, m >= 1, "[1, inf)")?;
    check("delta", delta, delta > 0.0 && delta <= 1.0, "(0, 1]")?;
    let (m, d) = (m as f64, d as f64);
    Ok((3.0 * d.sqrt() * (1.0 / delta).ln() / m, d / m))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnapsackSup {
    /// Best subset of small-mass actions.
    pub exact: f64,
    /// Greedy optimum of the continuous relaxation.
    pub fractional_upper: f64,
}

/// `max { sum_{i in S} (q_i - p_i) : p_i > 0 on S, sum_S p_i <= alpha / 2 }`, the empty set included.
pub fn subset_sup(p: &[f64], q: &[f64], alpha: f64) -> Result<f64, RateError> {
    if p.len() != q.len() {
        return Err(RateError::Dimension);
    }
    let items: Vec<usize> = (0..p.len()).filter(|&i| p[i] > SUPPORT_THRESHOLD).collect();
    if items.len() > MAX_EXACT_SUBSET_DIM {
        return Err(RateError::TooLarge(items.len()));
    }
    let cap = alpha / 2.0;
    let mut best = 0.0f64;
    for mask in 1u32..(1u32 << items.len()) {
        let (mut mass, mut gain) = (0.0, 0.0);
        for (b, &i) in items.iter().enumerate() {
            if mask >> b & 1 == 1 {
                mass += p[i];
                gain += q[i] - p[i];
            }
        }
        if mass <= cap {
            best = best.max(gain);
        }
    }
    Ok(best)
}

/// Greedy optimum of `max sum c_i (q_i - p_i) / p_i` over `c_i in [0, 2 p_i]`, `sum c_i <= alpha`.
pub fn fractional_knapsack(p: &[f64], q: &[f64], alpha: f64) -> Result<f64, RateError> {
    if p.len() != q.len() {
        return Err(RateError::Dimension);
    }
    let mut items: Vec<(f64, f64)> = (0..p.len())
        .filter(|&i| p[i] > SUPPORT_THRESHOLD)
        .map(|i| ((q[i] - p[i]) / p[i], 2.0 * p[i]))
        .filter(|(ratio, _)| *ratio > 0.0)
        .collect();
    items.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (mut room, mut value) = (alpha, 0.0);
    for (ratio, cap) in items {
        if room <= 0.0 {
            break;
        }
        let take = cap.min(room);
        value += ratio * take;
        room -= take;
    }
    Ok(value)
}

pub fn knapsack_subset_sup(x: &Strategy, xh: &Strategy, alpha: f64) -> Result<KnapsackSup, RateError> {
    check("alpha", alpha, alpha > 0.0, "(0, inf)")?;
    Ok(KnapsackSup {
        exact: subset_sup(x.probs(), xh.probs(), alpha)?,
        fractional_upper: fractional_knapsack(x.probs(), xh.probs(), alpha)?,
    })
}

/// One player's term of the approximate-equilibrium distance bound.
pub fn f_alpha(x: &Strategy, xh: &Strategy, alpha: f64) -> Result<f64, RateError> {
    check("alpha", alpha, alpha > 0.0, "(0, inf)")?;
    let (p, q) = (x.probs(), xh.probs());
    let missing: f64 = (0..p.len()).filter(|&i| q[i] <= SUPPORT_THRESHOLD).map(|i| p[i]).sum();
    Ok(16.0 / alpha * (subset_sup(p, q, alpha)? + subset_sup(q, p, alpha)? + missing))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    pub n: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub alpha: Option<f64>,
    pub pi_min: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Exact,
    Approx,
}

/// Sample count that the estimator needs for accuracy `epsilon` with risk `delta`.
pub fn sample_size(regime: Regime, p: &RateParams) -> Result<u64, RateError> {
    unit_open("epsilon", p.epsilon)?;
    unit_open("delta", p.delta)?;
    check("n", p.n as f64, p.n >= 1, "[1, inf)")?;
    let (n, eps, d) = (p.n as f64, p.epsilon, p.delta);
    let m = match regime {
        Regime::Exact => {
            let pi = p.pi_min.ok_or(RateError::Missing("pi_min"))?;
            unit_open("pi_min", pi)?;
            let k2 = eps * eps / 128.0;
            let support = (4.0 * n / d).ln() / (1.0 / (1.0 - pi)).ln();
            let conc = 2.0 * (2.0 + 4.0 * (4.0 / d).ln() / k2 + 4.0 * n / k2 * (12.0 * n / k2).ln());
            support.max(conc)
        }
        Regime::Approx => {
            let a = p.alpha.ok_or(RateError::Missing("alpha"))?;
            check("alpha", a, a > 0.0, "(0, inf)")?;
            let l6 = (6.0 / d).ln();
            let m1 = 1.0 + 4.0 * (n + (24.0 / d).ln()) / a;
            let m2 = 16.0 * 192.0 * 192.0 * (n + l6) / (a * eps * eps);
            let m3 = 960.0 * (n + l6) / (a * eps);
            let m4 = 576.0 * n.sqrt() * l6 / (eps * a);
            m1.max(m2).max(m3).max(m4)
        }
    };
    Ok(m.ceil() as u64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LowerBoundFamily {
    ExactPiMin,
    ExactEps,
    ExactN,
    ApproxLog,
    ApproxN,
}

impl LowerBoundFamily {
    pub fn regime(self) -> Regime {
        match self {
            LowerBoundFamily::ExactPiMin | LowerBoundFamily::ExactEps | LowerBoundFamily::ExactN => Regime::Exact,
            LowerBoundFamily::ApproxLog | LowerBoundFamily::ApproxN => Regime::Approx,
        }
    }
}

fn small_delta(d: f64) -> Result<(), RateError> {
    check("delta", d, d > 0.0 && d < 0.25, "(0, 1/4)")
}

/// Minimax lower bound on the sample count for the named hard family.
pub fn minimax_lower_bound(family: LowerBoundFamily, p: &RateParams) -> Result<f64, RateError> {
    let (n, eps, d) = (p.n as f64, p.epsilon, p.delta);
    check("epsilon", eps, eps > 0.0, "(0, inf)")?;
    let ln2 = std::f64::consts::LN_2;
    match family {
        LowerBoundFamily::ExactPiMin => {
            small_delta(d)?;
            let pi = p.pi_min.ok_or(RateError::Missing("pi_min"))?;
            check("pi_min", pi, pi > 0.0 && pi < 1.0, "(0, 1)")?;
            Ok((1.0 / (4.0 * d)).ln() / (1.0 / (1.0 - pi)).ln())
        }
        LowerBoundFamily::ExactEps => {
            small_delta(d)?;
            check("epsilon", eps, eps < 1.0 / 32f64.sqrt(), "(0, 1/sqrt(32))")?;
            Ok((1.0 / (4.0 * d)).ln() / (16.0 * eps * eps))
        }
        LowerBoundFamily::ExactN => {
            check("epsilon", eps, eps <= 1.0 / 384.0, "(0, 1/384]")?;
            Ok(ln2 * n / (40.0 * 192.0 * 192.0 * eps * eps))
        }
        LowerBoundFamily::ApproxLog => {
            small_delta(d)?;
            let a = p.alpha.ok_or(RateError::Missing("alpha"))?;
            check("alpha", a, a > 0.0 && a < 0.25, "(0, 1/4)")?;
            check("epsilon", eps, eps <= 0.125, "(0, 1/8]")?;
            Ok((1.0 / (4.0 * d)).ln() / (18.0 * eps * eps * a))
        }
        LowerBoundFamily::ApproxN => {
            let a = p.alpha.ok_or(RateError::Missing("alpha"))?;
            check("alpha", a, a > 0.0 && a < 0.5, "(0, 1/2)")?;
            check("epsilon", eps, eps <= 1.0 / 128.0, "(0, 1/128]")?;
            Ok(ln2 * n / (20.0 * 128.0 * 128.0 * a * eps * eps))
        }
    }
}

fn tech_params(c1: f64, c2: f64, k: f64, delta: f64) -> Result<(), RateError> {
    check("c1", c1, c1 > 0.0, "(0, inf)")?;
    check("c2", c2, c2 >= 1.0, "[1, inf)")?;
    check("K", k, k > 0.0, "(0, inf)")?;
    unit_open("delta", delta)
}

/// Closed-form upper bound on the first integer `t` with
/// `(log(c1/delta) + n log(c2 t)) / t <= K^2`.
pub fn tech_lemma_bound(c1: f64, c2: f64, k: f64, n: usize, delta: f64) -> Result<f64, RateError> {
    tech_params(c1, c2, k, delta)?;
    let (k2, n) = (k * k, n as f64);
    let log_term = if n > 0.0 { 4.0 * n / k2 * (2.0 * n * c2 / k2).ln() } else { 0.0 };
    Ok(2.0 * (2.0 + 4.0 * (c1 / delta).ln() / k2 + log_term))
}

/// The first integer `t >= 1` meeting the condition of [`tech_lemma_bound`], found by search.
pub fn tech_lemma_search(c1: f64, c2: f64, k: f64, n: usize, delta: f64) -> Result<u64, RateError> {
    tech_params(c1, c2, k, delta)?;
    let l = (c1 / delta).ln();
    let nf = n as f64;
    let ok = |t: u64| (l + nf * (c2 * t as f64).ln()) / t as f64 <= k * k;
    if ok(1) {
        return Ok(1);
    }
    // the ratio rises up to its peak and falls afterwards; it fails at 1, so
    // it fails everywhere before the peak and bisection past the peak is valid
    let peak = if nf > 0.0 { ((1.0 - l / nf).exp() / c2).max(1.0) } else { 1.0 };
    let mut lo = peak.floor() as u64;
    let mut hi = lo * 2;
    while !ok(hi) {
        lo = hi;
        hi *= 2;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
