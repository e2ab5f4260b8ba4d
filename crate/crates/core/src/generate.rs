//! Random strategies and matrices with prescribed equilibrium structure.
//!
//! Used by the test suites and by experiments that draw a random true profile.

use crate::construct::kind_gap;
use crate::feasible::SetKind;
use crate::games::{support, PayoffMatrix, Strategy};
use rand::Rng;

/// Random strategy; each entry is zero with probability `zero_prob`, at least one is positive.
pub fn random_strategy<R: Rng>(rng: &mut R, n: usize, zero_prob: f64) -> Strategy {
    let mut w: Vec<f64> = (0..n)
        .map(|_| if rng.gen_bool(zero_prob) { 0.0 } else { rng.gen_range(0.05..1.0) })
        .collect();
    if w.iter().all(|v| *v == 0.0) {
        w[rng.gen_range(0..n)] = 1.0;
    }
    Strategy::from_weights(&w).expect("positive weights")
}

/// Multiply each supported entry by a factor in `[e^-scale, e^scale]` and renormalize.
pub fn perturb_same_support<R: Rng>(rng: &mut R, s: &Strategy, scale: f64) -> Strategy {
    let supp = support(s);
    let w: Vec<f64> = s
        .probs()
        .iter()
        .enumerate()
        .map(|(i, p)| if supp.contains(&i) { p * (scale * rng.gen_range(-1.0..=1.0)).exp() } else { 0.0 })
        .collect();
    Strategy::from_weights(&w).expect("support is nonempty")
}

/// Like [`perturb_same_support`] but each supported entry is dropped with
/// probability `drop_prob`, keeping at least one.
pub fn perturb_within_support<R: Rng>(rng: &mut R, s: &Strategy, scale: f64, drop_prob: f64) -> Strategy {
    let base = perturb_same_support(rng, s, scale);
    let supp = support(&base);
    let keep = supp[rng.gen_range(0..supp.len())];
    let w: Vec<f64> = base
        .probs()
        .iter()
        .enumerate()
        .map(|(i, p)| if i != keep && rng.gen_bool(drop_prob) { 0.0 } else { *p })
        .collect();
    Strategy::from_weights(&w).expect("one entry kept")
}

/// Entries uniform on `[-1, 1]`.
pub fn uniform_matrix<R: Rng>(rng: &mut R, n: usize) -> PayoffMatrix {
    PayoffMatrix::from_flat(n, (0..n * n).map(|_| rng.gen_range(-1.0..=1.0)).collect()).expect("entries in range")
}

fn rescaled(n: usize, data: Vec<f64>) -> PayoffMatrix {
    let big = data.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    PayoffMatrix::from_flat(n, data.iter().map(|v| v / big).collect()).expect("rescaled into range")
}

// Row shifts that equalize supported rows against y and leave the others no better.
fn leveled_rows<R: Rng>(rng: &mut R, x: &Strategy, y: &Strategy) -> Vec<f64> {
    let n = x.n();
    let mut data: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let a = PayoffMatrix::from_flat(n, data.clone()).expect("entries in range");
    let v = a.row_values(y.probs());
    let supp = support(x);
    let target = supp.iter().map(|&i| v[i]).fold(f64::INFINITY, f64::min);
    for i in 0..n {
        let extra = if supp.contains(&i) || rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..0.5) };
        for j in 0..n {
            data[i * n + j] += target - v[i] + extra;
        }
    }
    data
}

/// Random matrix for which `(x, y)` is an exact row-player equilibrium.
pub fn gsg_row_matrix<R: Rng>(rng: &mut R, x: &Strategy, y: &Strategy) -> PayoffMatrix {
    rescaled(x.n(), leveled_rows(rng, x, y))
}

/// Random matrix for which `(x, y)` is an exact column-player equilibrium.
pub fn gsg_col_matrix<R: Rng>(rng: &mut R, x: &Strategy, y: &Strategy) -> PayoffMatrix {
    gsg_row_matrix(rng, y, x).transpose()
}

/// Random zero-sum matrix with `(x, y)` as an exact equilibrium.
pub fn zsg_matrix<R: Rng>(rng: &mut R, x: &Strategy, y: &Strategy) -> PayoffMatrix {
    let n = x.n();
    let mut data = leveled_rows(rng, x, y);
    let a = PayoffMatrix::from_flat(n, data.iter().map(|v| v / 4.0).collect()).expect("entries in range");
    for v in data.iter_mut() {
        *v /= 4.0;
    }
    let w = a.col_values(x.probs());
    let cols = support(y);
    let top = cols.iter().map(|&j| w[j]).fold(f64::NEG_INFINITY, f64::max);
    for j in 0..n {
        let drop = if cols.contains(&j) || rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..0.5) };
        for i in 0..n {
            data[i * n + j] += top - w[j] - drop;
        }
    }
    rescaled(n, data)
}

/// Random matrix in the `alpha`-feasible set of `kind` at `(x, y)`.
pub fn alpha_feasible_matrix<R: Rng>(rng: &mut R, kind: SetKind, x: &Strategy, y: &Strategy, alpha: f64) -> PayoffMatrix {
    let m = uniform_matrix(rng, x.n());
    let g = kind_gap(kind, &m, x, y).expect("dimensions agree");
    if g <= alpha {
        m
    } else {
        m.scaled(alpha / g)
    }
}
