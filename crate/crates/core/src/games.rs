//! Strategies, payoff matrices, equilibrium checks, and sampling of play.
//!
//! Payoffs are losses: the row player wants small `x'Ay`, the column player
//! in a general-sum game wants small `x'By`, and in a zero-sum game the column
//! player wants large `x'Ay`.

use crate::rng;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Entries at or below this value count as zero probability.
pub const SUPPORT_THRESHOLD: f64 = 1e-12;
/// Default additive slack on every inequality check.
pub const MEMBERSHIP_TOL: f64 = 1e-9;
const SUM_TOL: f64 = 1e-12;
const ENTRY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("strategy entry {index} is {value}, outside [0, 1]")]
    EntryOutOfRange { index: usize, value: f64 },
    #[error("strategy sums to {0}, not 1")]
    NotNormalized(f64),
    #[error("empty strategy")]
    Empty,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("payoff entry ({row}, {col}) is {value}, outside [-1, 1]")]
    PayoffOutOfRange { row: usize, col: usize, value: f64 },
    #[error("matrix is not square")]
    NotSquare,
    #[error("number of rounds must be positive")]
    ZeroRounds,
    #[error("counts sum to {got}, expected {expected}")]
    CountMismatch { expected: u64, got: u64 },
}

/// A probability vector over `n` actions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Strategy {
    probs: Vec<f64>,
}

impl TryFrom<Vec<f64>> for Strategy {
    type Error = GameError;
    fn try_from(v: Vec<f64>) -> Result<Self, GameError> {
        Strategy::new(v)
    }
}

impl From<Strategy> for Vec<f64> {
    fn from(s: Strategy) -> Vec<f64> {
        s.probs
    }
}

impl Strategy {
    pub fn new(probs: Vec<f64>) -> Result<Self, GameError> {
        if probs.is_empty() {
            return Err(GameError::Empty);
        }
        for (index, &value) in probs.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(GameError::EntryOutOfRange { index, value });
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(GameError::NotNormalized(total));
        }
        Ok(Strategy { probs })
    }

    /// Rescale nonnegative weights to sum to one.
    pub fn from_weights(w: &[f64]) -> Result<Self, GameError> {
        let total: f64 = w.iter().sum();
        if !(total > 0.0) {
            return Err(GameError::NotNormalized(total));
        }
        let mut probs: Vec<f64> = w.iter().map(|v| v / total).collect();
        // push the rounding residue into the largest entry
        let resid = 1.0 - probs.iter().sum::<f64>();
        let big = argmax(&probs);
        probs[big] = (probs[big] + resid).clamp(0.0, 1.0);
        Strategy::new(probs)
    }

    pub fn pure(n: usize, i: usize) -> Self {
        let mut probs = vec![0.0; n];
        probs[i] = 1.0;
        Strategy { probs }
    }

    pub fn uniform(n: usize) -> Self {
        Strategy::from_weights(&vec![1.0; n]).expect("uniform weights are valid")
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn n(&self) -> usize {
        self.probs.len()
    }

    pub fn support(&self) -> Vec<usize> {
        support(self)
    }

    pub fn l1_distance(&self, other: &Strategy) -> f64 {
        l1_distance(&self.probs, &other.probs)
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// ℓ1 distance summed left to right.
pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (u, v) in a.iter().zip(b) {
        s += (u - v).abs();
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProfile")]
pub struct StrategyProfile {
    pub x: Strategy,
    pub y: Strategy,
}

#[derive(Deserialize)]
struct RawProfile {
    x: Strategy,
    y: Strategy,
}

impl TryFrom<RawProfile> for StrategyProfile {
    type Error = GameError;
    fn try_from(r: RawProfile) -> Result<Self, GameError> {
        StrategyProfile::new(r.x, r.y)
    }
}

impl StrategyProfile {
    pub fn new(x: Strategy, y: Strategy) -> Result<Self, GameError> {
        if x.n() != y.n() {
            return Err(GameError::Dimension {
                expected: x.n(),
                got: y.n(),
            });
        }
        Ok(StrategyProfile { x, y })
    }

    pub fn n(&self) -> usize {
        self.x.n()
    }
}

/// Square payoff matrix stored row-major, entries in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix", into = "RawMatrix")]
pub struct PayoffMatrix {
    n: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawMatrix {
    entries: Vec<Vec<f64>>,
}

impl TryFrom<RawMatrix> for PayoffMatrix {
    type Error = GameError;
    fn try_from(r: RawMatrix) -> Result<Self, GameError> {
        PayoffMatrix::new(r.entries)
    }
}

impl From<PayoffMatrix> for RawMatrix {
    fn from(m: PayoffMatrix) -> RawMatrix {
        RawMatrix { entries: m.rows() }
    }
}

impl PayoffMatrix {
    pub fn new(entries: Vec<Vec<f64>>) -> Result<Self, GameError> {
        let n = entries.len();
        if n == 0 {
            return Err(GameError::Empty);
        }
        if entries.iter().any(|r| r.len() != n) {
            return Err(GameError::NotSquare);
        }
        PayoffMatrix::from_flat(n, entries.into_iter().flatten().collect())
    }

    pub fn from_flat(n: usize, data: Vec<f64>) -> Result<Self, GameError> {
        if data.len() != n * n || n == 0 {
            return Err(GameError::Dimension {
                expected: n * n,
                got: data.len(),
            });
        }
        for (k, &value) in data.iter().enumerate() {
            if !(value.abs() <= 1.0 + ENTRY_TOL) {
                return Err(GameError::PayoffOutOfRange {
                    row: k / n,
                    col: k % n,
                    value,
                });
            }
        }
        Ok(PayoffMatrix { n, data })
    }

    pub fn zeros(n: usize) -> Self {
        PayoffMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = PayoffMatrix::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Row-major flattening: entry `(i, j)` sits at `i * n + j`.
    pub fn flat(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    pub fn transpose(&self) -> PayoffMatrix {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[j * n + i] = self.data[i * n + j];
            }
        }
        PayoffMatrix { n, data }
    }

    pub fn scaled(&self, s: f64) -> PayoffMatrix {
        PayoffMatrix {
            n: self.n,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// Entrywise max-norm distance.
    pub fn linf_distance(&self, other: &PayoffMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()))
    }

    /// `M y`: loss of each pure row against `y`.
    pub fn row_values(&self, y: &[f64]) -> Vec<f64> {
        self.data
            .chunks(self.n)
            .map(|r| r.iter().zip(y).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `x' M`: value of each pure column against `x`.
    pub fn col_values(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (i, xi) in x.iter().enumerate() {
            for (j, o) in out.iter_mut().enumerate() {
                *o += xi * self.data[i * self.n + j];
            }
        }
        out
    }

    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(self.row_values(y)).map(|(a, b)| a * b).sum()
    }
}

/// Indices with probability above [`SUPPORT_THRESHOLD`].
pub fn support(s: &Strategy) -> Vec<usize> {
    s.probs
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > SUPPORT_THRESHOLD)
        .map(|(i, _)| i)
        .collect()
}

/// Smallest positive probability across both players.
pub fn pi_min(p: &StrategyProfile) -> f64 {
    p.x.probs
        .iter()
        .chain(p.y.probs.iter())
        .filter(|v| **v > SUPPORT_THRESHOLD)
        .fold(1.0, |m, v| m.min(*v))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GapKind {
    GsgRow,
    GsgCol,
    ZsgCol,
}

fn check_dims(m: &PayoffMatrix, x: &Strategy, y: &Strategy) -> Result<(), GameError> {
    for got in [x.n(), y.n()] {
        if got != m.n() {
            return Err(GameError::Dimension {
                expected: m.n(),
                got,
            });
        }
    }
    Ok(())
}

/// Largest gain from a unilateral pure deviation.
///
/// `GsgRow`: `max_i x'My - e_i'My`; `GsgCol`: `max_j x'My - x'Me_j`;
/// `ZsgCol`: `max_j x'Me_j - x'My`.
pub fn nash_gap(kind: GapKind, m: &PayoffMatrix, x: &Strategy, y: &Strategy) -> Result<f64, GameError> {
    check_dims(m, x, y)?;
    let value = m.bilinear(&x.probs, &y.probs);
    let gap = match kind {
        GapKind::GsgRow => m
            .row_values(&y.probs)
            .iter()
            .fold(f64::NEG_INFINITY, |g, v| g.max(value - v)),
        GapKind::GsgCol => m
            .col_values(&x.probs)
            .iter()
            .fold(f64::NEG_INFINITY, |g, v| g.max(value - v)),
        GapKind::ZsgCol => m
            .col_values(&x.probs)
            .iter()
            .fold(f64::NEG_INFINITY, |g, v| g.max(v - value)),
    };
    Ok(gap)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Game {
    Gsg { a: PayoffMatrix, b: PayoffMatrix },
    Zsg { a: PayoffMatrix },
}

pub fn is_alpha_nash(game: &Game, p: &StrategyProfile, alpha: f64, tol: f64) -> Result<bool, GameError> {
    let lim = alpha + tol;
    Ok(match game {
        Game::Gsg { a, b } => {
            nash_gap(GapKind::GsgRow, a, &p.x, &p.y)? <= lim && nash_gap(GapKind::GsgCol, b, &p.x, &p.y)? <= lim
        }
        Game::Zsg { a } => {
            nash_gap(GapKind::GsgRow, a, &p.x, &p.y)? <= lim && nash_gap(GapKind::ZsgCol, a, &p.x, &p.y)? <= lim
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SupportKind {
    RowOnly,
    ZeroSum,
}

// Values on the support are equal and no off-support value beats them.
// `lower_is_better` picks the direction of "beats".
fn support_condition(values: &[f64], supp: &[usize], lower_is_better: bool, tol: f64) -> bool {
    let on: Vec<f64> = supp.iter().map(|&i| values[i]).collect();
    let hi = on.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = on.iter().cloned().fold(f64::INFINITY, f64::min);
    if hi - lo > tol {
        return false;
    }
    values.iter().enumerate().all(|(i, v)| {
        supp.contains(&i) || if lower_is_better { *v >= hi - tol } else { *v <= lo + tol }
    })
}

/// Equilibrium test phrased through supports rather than gaps.
pub fn support_characterization(a: &PayoffMatrix, x: &Strategy, y: &Strategy, kind: SupportKind) -> bool {
    if check_dims(a, x, y).is_err() {
        return false;
    }
    let rows_ok = support_condition(&a.row_values(&y.probs), &support(x), true, MEMBERSHIP_TOL);
    match kind {
        SupportKind::RowOnly => rows_ok,
        SupportKind::ZeroSum => rows_ok && support_condition(&a.col_values(&x.probs), &support(y), false, MEMBERSHIP_TOL),
    }
}

/// Aggregated record of `m` independent rounds of play.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub m: u64,
    pub row_counts: Vec<u64>,
    pub col_counts: Vec<u64>,
    pub seed: u64,
}

impl SampleRecord {
    pub fn n(&self) -> usize {
        self.row_counts.len()
    }

    pub fn validate(&self) -> Result<(), GameError> {
        if self.m == 0 {
            return Err(GameError::ZeroRounds);
        }
        if self.row_counts.len() != self.col_counts.len() {
            return Err(GameError::Dimension {
                expected: self.row_counts.len(),
                got: self.col_counts.len(),
            });
        }
        for c in [&self.row_counts, &self.col_counts] {
            let got: u64 = c.iter().sum();
            if got != self.m {
                return Err(GameError::CountMismatch { expected: self.m, got });
            }
        }
        Ok(())
    }
}

/// Draw one action by inverse CDF. Zero-probability actions are never returned.
pub fn draw_categorical<R: Rng>(cum: &[f64], last_positive: usize, rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    for (i, c) in cum.iter().enumerate() {
        if u < *c {
            return i;
        }
    }
    last_positive
}

pub(crate) fn cumulative(p: &[f64]) -> (Vec<f64>, usize) {
    let mut acc = 0.0;
    let cum = p
        .iter()
        .map(|v| {
            acc += v;
            acc
        })
        .collect();
    let last = p.iter().rposition(|v| *v > 0.0).unwrap_or(0);
    (cum, last)
}

fn counts_from(p: &Strategy, m: u64, seed: u64, stream: u64) -> Vec<u64> {
    let (cum, last) = cumulative(&p.probs);
    let mut rng = rng::stream(seed, stream);
    let mut counts = vec![0u64; p.n()];
    for _ in 0..m {
        counts[draw_categorical(&cum, last, &mut rng)] += 1;
    }
    counts
}

/// `m` i.i.d. draws from each player's strategy, fixed by `seed`.
pub fn sample_profile(p: &StrategyProfile, m: u64, seed: u64) -> Result<SampleRecord, GameError> {
    if m == 0 {
        return Err(GameError::ZeroRounds);
    }
    Ok(SampleRecord {
        m,
        row_counts: counts_from(&p.x, m, seed, 0),
        col_counts: counts_from(&p.y, m, seed, 1),
        seed,
    })
}

fn frequencies(counts: &[u64], m: u64) -> Strategy {
    let probs: Vec<f64> = counts.iter().map(|c| *c as f64 / m as f64).collect();
    Strategy::new(probs.clone()).unwrap_or_else(|_| Strategy::from_weights(&probs).expect("counts are nonnegative"))
}

/// Maximum-likelihood estimate: empirical frequencies.
pub fn empirical_profile(r: &SampleRecord) -> Result<StrategyProfile, GameError> {
    r.validate()?;
    StrategyProfile::new(frequencies(&r.row_counts, r.m), frequencies(&r.col_counts, r.m))
}
