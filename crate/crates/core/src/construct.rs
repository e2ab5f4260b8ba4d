//! Explicit matrix constructions.
//!
//! Each construction takes a matrix that is feasible for one profile and
//! returns a nearby matrix feasible for a perturbed profile, together with the
//! distance actually moved and the distance the construction guarantees.

use crate::feasible::{build_system, membership, SetKind, SetSpec};
use crate::games::{l1_distance, nash_gap, support, GameError, GapKind, PayoffMatrix, Strategy, MEMBERSHIP_TOL};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstructError {
    #[error("supports differ: {0:?} vs {1:?}")]
    SupportMismatch(Vec<usize>, Vec<usize>),
    #[error("input matrix is not feasible for the source profile (gap {0:e})")]
    NotFeasible(f64),
    #[error("alpha must be positive, got {0}")]
    BadAlpha(f64),
    #[error(transparent)]
    Game(#[from] GameError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstructionReport {
    pub output: PayoffMatrix,
    /// Max-norm distance between input and output.
    pub distance: f64,
    /// Distance the construction guarantees.
    pub certified_bound: f64,
    /// Largest constraint violation of the output in its target set.
    pub membership_violation: f64,
}

fn same_support(a: &Strategy, b: &Strategy) -> Result<(), ConstructError> {
    let (sa, sb) = (support(a), support(b));
    if sa != sb {
        return Err(ConstructError::SupportMismatch(sa, sb));
    }
    Ok(())
}

fn require_gap(kind: GapKind, m: &PayoffMatrix, x: &Strategy, y: &Strategy) -> Result<(), ConstructError> {
    let g = nash_gap(kind, m, x, y)?;
    if g > MEMBERSHIP_TOL {
        return Err(ConstructError::NotFeasible(g));
    }
    Ok(())
}

fn violation(kind: SetKind, m: &PayoffMatrix, x: &Strategy, y: &Strategy, alpha: f64) -> f64 {
    let spec = SetSpec::new(kind, x.clone(), y.clone(), alpha).expect("validated strategies");
    membership(m.flat(), &build_system(&spec), 0.0).expect("dimensions checked").1
}

// Level the rows in `rows` to the largest of their values against `yh`, lift
// every other row by `delta`, and divide by 1 + delta.
fn level_rows(a: &PayoffMatrix, rows: &[usize], yh: &Strategy, delta: f64) -> PayoffMatrix {
    let n = a.n();
    let v = a.row_values(yh.probs());
    let top = rows.iter().map(|&i| v[i]).fold(f64::NEG_INFINITY, f64::max);
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let shift = if rows.contains(&i) { top - v[i] } else { delta };
        for j in 0..n {
            out.push((a.get(i, j) + shift) / (1.0 + delta));
        }
    }
    PayoffMatrix::from_flat(n, out).expect("shifts never leave [-1, 1]")
}

/// Row-player matrix for the perturbed profile `(xh, yh)` from `A` feasible at `(x, y)`.
///
/// The source column strategy `y` enters through `2 * |y - yh|_1`, the amount
/// off-support rows are lifted by.
pub fn exact_gsg_row(a: &PayoffMatrix, x: &Strategy, y: &Strategy, xh: &Strategy, yh: &Strategy) -> Result<ConstructionReport, ConstructError> {
    same_support(x, xh)?;
    require_gap(GapKind::GsgRow, a, x, y)?;
    let eta = l1_distance(y.probs(), yh.probs());
    let delta = 2.0 * eta;
    let out = level_rows(a, &support(x), yh, delta);
    Ok(ConstructionReport {
        distance: a.linf_distance(&out),
        certified_bound: 4.0 * eta,
        membership_violation: violation(SetKind::GsgRow, &out, xh, yh, 0.0),
        output: out,
    })
}

/// Column-player counterpart of [`exact_gsg_row`], built on the transpose.
pub fn exact_gsg_col(b: &PayoffMatrix, x: &Strategy, y: &Strategy, xh: &Strategy, yh: &Strategy) -> Result<ConstructionReport, ConstructError> {
    same_support(y, yh)?;
    require_gap(GapKind::GsgCol, b, x, y)?;
    let eta = l1_distance(x.probs(), xh.probs());
    let out = level_rows(&b.transpose(), &support(y), xh, 2.0 * eta).transpose();
    Ok(ConstructionReport {
        distance: b.linf_distance(&out),
        certified_bound: 4.0 * eta,
        membership_violation: violation(SetKind::GsgCol, &out, xh, yh, 0.0),
        output: out,
    })
}

fn require_zero_sum(a: &PayoffMatrix, x: &Strategy, y: &Strategy) -> Result<(), ConstructError> {
    require_gap(GapKind::GsgRow, a, x, y)?;
    require_gap(GapKind::ZsgCol, a, x, y)
}

/// Zero-sum matrix for `(x, yh)` from `A` feasible at `(x, y)`; only the rows move.
pub fn exact_zsg_fix_x(a: &PayoffMatrix, x: &Strategy, y: &Strategy, yh: &Strategy) -> Result<ConstructionReport, ConstructError> {
    same_support(y, yh)?;
    require_zero_sum(a, x, y)?;
    let eta = l1_distance(y.probs(), yh.probs());
    let out = level_rows(a, &support(x), yh, 2.0 * eta);
    Ok(ConstructionReport {
        distance: a.linf_distance(&out),
        certified_bound: 4.0 * eta,
        membership_violation: violation(SetKind::Zsg, &out, x, yh, 0.0),
        output: out,
    })
}

/// Zero-sum matrix for `(xh, y)` from `A` feasible at `(x, y)`; only the columns move.
///
/// Supported columns are raised to the best supported column value under
/// `xh`; unsupported columns are lowered by `2 * |x - xh|_1`.
pub fn exact_zsg_fix_y(a: &PayoffMatrix, x: &Strategy, y: &Strategy, xh: &Strategy) -> Result<ConstructionReport, ConstructError> {
    same_support(x, xh)?;
    require_zero_sum(a, x, y)?;
    let n = a.n();
    let eta = l1_distance(x.probs(), xh.probs());
    let delta = 2.0 * eta;
    let w = a.col_values(xh.probs());
    let cols = support(y);
    let top = cols.iter().map(|&j| w[j]).fold(f64::NEG_INFINITY, f64::max);
    let shift: Vec<f64> = (0..n).map(|j| if cols.contains(&j) { top - w[j] } else { -delta }).collect();
    let mut data = Vec::with_capacity(n * n);
    for i in 0..n {
        for (j, s) in shift.iter().enumerate() {
            data.push((a.get(i, j) + s) / (1.0 + delta));
        }
    }
    let out = PayoffMatrix::from_flat(n, data)?;
    Ok(ConstructionReport {
        distance: a.linf_distance(&out),
        certified_bound: 4.0 * eta,
        membership_violation: violation(SetKind::Zsg, &out, xh, y, 0.0),
        output: out,
    })
}

/// The deviation gap that decides membership of `m` in the `kind` set at `(x, y)`.
pub fn kind_gap(kind: SetKind, m: &PayoffMatrix, x: &Strategy, y: &Strategy) -> Result<f64, GameError> {
    Ok(match kind {
        SetKind::GsgRow => nash_gap(GapKind::GsgRow, m, x, y)?,
        SetKind::GsgCol => nash_gap(GapKind::GsgCol, m, x, y)?,
        SetKind::Zsg => nash_gap(GapKind::GsgRow, m, x, y)?.max(nash_gap(GapKind::ZsgCol, m, x, y)?),
    })
}

/// Shrink `m` toward zero until its gap at `(xp, yp)` is at most `alpha`.
pub fn approx_scale(kind: SetKind, m: &PayoffMatrix, xp: &Strategy, yp: &Strategy, alpha: f64) -> Result<ConstructionReport, ConstructError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(ConstructError::BadAlpha(alpha));
    }
    let g = kind_gap(kind, m, xp, yp)?;
    let (out, bound) = if g <= alpha {
        (m.clone(), 0.0)
    } else {
        (m.scaled(alpha / g), 2.0 * (g - alpha) / g)
    };
    Ok(ConstructionReport {
        distance: m.linf_distance(&out),
        certified_bound: bound,
        membership_violation: violation(kind, &out, xp, yp, alpha),
        output: out,
    })
}
