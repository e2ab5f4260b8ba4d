//! Max-norm distances between payoff sets.
//!
//! Point-to-set distances are exact (one LP). Set-to-set distances come from
//! an outer search over points of the first set: vertex enumeration when the
//! dimension is tiny, an exhaustive grid for 2x2 games, or hit-and-run samples
//! otherwise. Every estimate records which of these produced it.

use crate::feasible::{build_system, hit_and_run_sample, interior_point, membership, FeasibleError, HalfspaceSystem, SetSpec};
use crate::games::{l1_distance, support, Strategy};
use crate::lp::{solve_lp, LpProblem, LpStatus};
use crate::rates::{f_alpha, RateError};
use crate::rng;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use thiserror::Error;

/// Points violating no constraint by more than this are treated as members.
pub const POINT_TOL: f64 = 1e-9;
const MAX_VERTEX_COMBINATIONS: u64 = 500_000;
const MAX_CORNERS: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistanceError {
    #[error(transparent)]
    Feasible(#[from] FeasibleError),
    #[error("linear program ended with status {0:?}")]
    Lp(LpStatus),
    #[error("grid oracle needs 2x2 games, got n = {0}")]
    NotTwoByTwo(usize),
    #[error("resolution must be in (0, 2], got {0}")]
    BadResolution(f64),
    #[error("supports differ for the {0} player")]
    SupportMismatch(&'static str),
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error("sets live in different dimensions ({0} vs {1})")]
    Dimension(usize, usize),
    #[error("vertex enumeration would need {0} subsystems")]
    TooManyVertices(u64),
}

impl From<crate::lp::LpError> for DistanceError {
    fn from(e: crate::lp::LpError) -> Self {
        DistanceError::Feasible(FeasibleError::Malformed(e))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimateMode {
    /// Exact up to LP tolerance.
    Exact,
    /// Sampled lower bound.
    McLower,
    /// Grid search, within one resolution step below the truth.
    GridOracle,
    /// Closed-form upper bound.
    PaperUpper,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HausdorffEstimate {
    pub value: f64,
    pub mode: EstimateMode,
    /// Grid step, sample count, or vertex count, depending on `mode`.
    pub resolution_or_samples: f64,
    pub directed_ab: f64,
    pub directed_ba: f64,
}

impl HausdorffEstimate {
    fn new(mode: EstimateMode, param: f64, ab: f64, ba: f64) -> Self {
        HausdorffEstimate {
            value: ab.max(ba),
            mode,
            resolution_or_samples: param,
            directed_ab: ab,
            directed_ba: ba,
        }
    }

    /// Distance between product sets from the distances between their factors.
    pub fn product(&self, other: &HausdorffEstimate) -> HausdorffEstimate {
        let mode = if self.mode == other.mode { self.mode } else { EstimateMode::McLower };
        HausdorffEstimate::new(
            mode,
            self.resolution_or_samples.max(other.resolution_or_samples),
            self.directed_ab.max(other.directed_ab),
            self.directed_ba.max(other.directed_ba),
        )
    }
}

/// Nearest point of `sys` to `z` in max-norm, with its distance.
pub fn project(z: &[f64], sys: &HalfspaceSystem) -> Result<(f64, Vec<f64>), DistanceError> {
    if membership(z, sys, POINT_TOL)?.0 {
        return Ok((0.0, z.to_vec()));
    }
    let d = sys.dim;
    let mut obj = vec![0.0; d + 1];
    obj[d] = 1.0;
    let mut lo = vec![-sys.box_bound; d + 1];
    let mut hi = vec![sys.box_bound; d + 1];
    lo[d] = 0.0;
    hi[d] = 2.0 * sys.box_bound + z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut p = LpProblem::new(obj, lo, hi);
    for h in &sys.rows {
        let mut c = h.c.clone();
        c.push(0.0);
        p.add_row(c, h.b);
    }
    for (k, zk) in z.iter().enumerate() {
        let mut c = vec![0.0; d + 1];
        c[k] = 1.0;
        c[d] = -1.0;
        p.add_row(c.clone(), *zk);
        c[k] = -1.0;
        p.add_row(c, -zk);
    }
    let sol = solve_lp(&p)?;
    if sol.status != LpStatus::Optimal {
        return Err(DistanceError::Lp(sol.status));
    }
    Ok((sol.value.max(0.0), sol.point[..d].to_vec()))
}

/// Exact max-norm distance from `z` to the set.
pub fn point_to_set(z: &[f64], sys: &HalfspaceSystem) -> Result<f64, DistanceError> {
    if z.len() != sys.dim {
        return Err(DistanceError::Dimension(z.len(), sys.dim));
    }
    Ok(project(z, sys)?.0)
}

fn same_dim(a: &HalfspaceSystem, b: &HalfspaceSystem) -> Result<(), DistanceError> {
    if a.dim != b.dim {
        return Err(DistanceError::Dimension(a.dim, b.dim));
    }
    Ok(())
}

// Farthest feasible point on the segment from `start` toward `target`.
fn clip_toward(sys: &HalfspaceSystem, start: &[f64], target: &[f64]) -> Vec<f64> {
    let dir: Vec<f64> = target.iter().zip(start).map(|(t, s)| t - s).collect();
    let mut t_max = 1.0f64;
    for (r, h) in sys.rows.iter().enumerate() {
        let cd: f64 = h.c.iter().zip(&dir).map(|(a, b)| a * b).sum();
        if cd > 1e-15 {
            let slack = (h.b - sys.row_value(r, start)).max(0.0);
            t_max = t_max.min(slack / cd);
        }
    }
    start.iter().zip(&dir).map(|(s, d)| s + t_max * d).collect()
}

// Corners of the box, all of them when there are few, otherwise a fixed random subset.
fn box_corners(dim: usize, bound: f64, seed: u64) -> Vec<Vec<f64>> {
    let corner = |mask: u64| -> Vec<f64> { (0..dim).map(|k| if mask >> k & 1 == 1 { bound } else { -bound }).collect() };
    if dim < 64 && (1u64 << dim) <= MAX_CORNERS as u64 {
        (0..1u64 << dim).map(corner).collect()
    } else {
        let mut r = rng::stream(seed, 1);
        (0..MAX_CORNERS)
            .map(|_| (0..dim).map(|_| if r.gen_bool(0.5) { bound } else { -bound }).collect())
            .collect()
    }
}

/// Sampled lower bound on `sup_{p in from} d(p, to)`.
///
/// The candidates are the interior point, its clipped rays toward box
/// corners, and `k` hit-and-run samples. The chain for a larger `k` extends
/// the chain for a smaller one, so the estimate never decreases in `k`.
pub fn directed_distance_mc(from: &HalfspaceSystem, to: &HalfspaceSystem, k: usize, seed: u64) -> Result<f64, DistanceError> {
    same_dim(from, to)?;
    let start = interior_point(from)?;
    let mut best = point_to_set(&start, to)?;
    for c in box_corners(from.dim, from.box_bound, seed) {
        let p = clip_toward(from, &start, &c);
        best = best.max(point_to_set(&p, to)?);
    }
    for p in hit_and_run_sample(from, k, 10 * from.dim, seed)? {
        best = best.max(point_to_set(&p, to)?);
    }
    Ok(best)
}

pub fn hausdorff_mc(a: &HalfspaceSystem, b: &HalfspaceSystem, k: usize, seed: u64) -> Result<HausdorffEstimate, DistanceError> {
    let ab = directed_distance_mc(a, b, k, seed)?;
    let ba = directed_distance_mc(b, a, k, seed)?;
    Ok(HausdorffEstimate::new(EstimateMode::McLower, k as f64, ab, ba))
}

fn solve_square(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-10 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            if f != 0.0 {
                for c in col..n {
                    m[r][c] -= f * m[col][c];
                }
                rhs[r] -= f * rhs[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| m[r][c] * x[c]).sum();
        x[r] = (rhs[r] - s) / m[r][r];
    }
    Some(x)
}

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1u64, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Vertices of a bounded system by brute-force enumeration of active sets.
pub fn vertices(sys: &HalfspaceSystem) -> Result<Vec<Vec<f64>>, DistanceError> {
    let lo = vec![-sys.box_bound; sys.dim];
    let hi = vec![sys.box_bound; sys.dim];
    vertices_in_box(sys, &lo, &hi)
}

// Vertices of `sys` intersected with the axis box `[lo, hi]`.
fn vertices_in_box(sys: &HalfspaceSystem, lo: &[f64], hi: &[f64]) -> Result<Vec<Vec<f64>>, DistanceError> {
    let d = sys.dim;
    let mut cons: Vec<(Vec<f64>, f64)> = sys
        .rows
        .iter()
        .filter(|h| h.c.iter().any(|v| *v != 0.0))
        .map(|h| (h.c.clone(), h.b))
        .collect();
    for k in 0..d {
        for (s, b) in [(1.0, hi[k]), (-1.0, -lo[k])] {
            let mut c = vec![0.0; d];
            c[k] = s;
            cons.push((c, b));
        }
    }
    let total = binomial(cons.len() as u64, d as u64);
    if total > MAX_VERTEX_COMBINATIONS {
        return Err(DistanceError::TooManyVertices(total));
    }
    let inside = |v: &[f64]| -> Result<bool, DistanceError> {
        Ok((0..d).all(|k| v[k] >= lo[k] - POINT_TOL && v[k] <= hi[k] + POINT_TOL) && membership(v, sys, POINT_TOL)?.0)
    };
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut idx: Vec<usize> = (0..d).collect();
    loop {
        let m: Vec<Vec<f64>> = idx.iter().map(|&i| cons[i].0.clone()).collect();
        let rhs: Vec<f64> = idx.iter().map(|&i| cons[i].1).collect();
        if let Some(v) = solve_square(m, rhs) {
            if inside(&v)? && !out.iter().any(|u| u.iter().zip(&v).all(|(a, b)| (a - b).abs() < 1e-9)) {
                out.push(v);
            }
        }
        // next combination in lexicographic order
        let mut i = d;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            if idx[i] < cons.len() - d + i {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..d {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Exact directed distance: the max of a convex function over a polytope sits at a vertex.
pub fn directed_distance_exact(from: &HalfspaceSystem, to: &HalfspaceSystem) -> Result<(f64, usize), DistanceError> {
    same_dim(from, to)?;
    let vs = vertices(from)?;
    let mut best = 0.0f64;
    for v in &vs {
        best = best.max(point_to_set(v, to)?);
    }
    Ok((best, vs.len()))
}

/// Exact Hausdorff distance for low-dimensional systems (vertex enumeration).
pub fn hausdorff_exact(a: &HalfspaceSystem, b: &HalfspaceSystem) -> Result<HausdorffEstimate, DistanceError> {
    let (ab, na) = directed_distance_exact(a, b)?;
    let (ba, nb) = directed_distance_exact(b, a)?;
    Ok(HausdorffEstimate::new(EstimateMode::Exact, (na + nb) as f64, ab, ba))
}

struct Grid<'a> {
    from: &'a HalfspaceSystem,
    to: &'a HalfspaceSystem,
    res: f64,
    cells: usize,
}

#[derive(Clone)]
struct Block {
    lo: [usize; 4],
    hi: [usize; 4],
    upper: f64,
}

impl PartialEq for Block {
    fn eq(&self, o: &Self) -> bool {
        self.upper.total_cmp(&o.upper) == Ordering::Equal && self.lo == o.lo && self.hi == o.hi
    }
}
impl Eq for Block {}
impl PartialOrd for Block {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Block {
    fn cmp(&self, o: &Self) -> Ordering {
        self.upper.total_cmp(&o.upper).then_with(|| o.lo.cmp(&self.lo)).then_with(|| o.hi.cmp(&self.hi))
    }
}

impl Grid<'_> {
    fn center(&self, i: usize) -> f64 {
        -1.0 + self.res * (i as f64 + 0.5)
    }

    // Center of the block and per-axis half-spread of its grid points.
    fn geometry(&self, lo: &[usize; 4], hi: &[usize; 4]) -> ([f64; 4], [f64; 4]) {
        let mut w = [0.0; 4];
        let mut h = [0.0; 4];
        for k in 0..4 {
            let (a, b) = (self.center(lo[k]), self.center(hi[k] - 1));
            w[k] = 0.5 * (a + b);
            h[k] = 0.5 * (b - a);
        }
        (w, h)
    }

    // Could some grid point of the block lie within res/2 of `from`?
    fn may_hold_candidates(&self, w: &[f64; 4], h: &[f64; 4]) -> bool {
        let half = 0.5 * self.res;
        self.from.rows.iter().all(|row| {
            let low: f64 = (0..4).map(|k| row.c[k] * w[k] - row.c[k].abs() * (h[k] + half)).sum();
            low <= row.b + 1e-12
        })
    }

    // Is every point within res/2 of the block inside `to`?
    fn inside_target(&self, w: &[f64; 4], h: &[f64; 4]) -> bool {
        let half = 0.5 * self.res;
        (0..4).all(|k| w[k].abs() + h[k] + half <= self.to.box_bound)
            && self.to.rows.iter().all(|row| {
                let high: f64 = (0..4).map(|k| row.c[k] * w[k] + row.c[k].abs() * (h[k] + half)).sum();
                high <= row.b
            })
    }

    // Largest distance to `to` over the part of `from` that grid points of
    // the block can project to; `None` when nothing there can beat `best`.
    fn upper(&self, lo: &[usize; 4], hi: &[usize; 4], best: f64) -> Result<Option<f64>, DistanceError> {
        let (w, h) = self.geometry(lo, hi);
        if !self.may_hold_candidates(&w, &h) || self.inside_target(&w, &h) {
            return Ok(None);
        }
        let reach: Vec<f64> = (0..4).map(|k| h[k] + 0.5 * self.res).collect();
        let lipschitz = point_to_set(&w, self.to)? + reach.iter().cloned().fold(0.0, f64::max);
        if lipschitz <= best {
            return Ok(None);
        }
        let blo: Vec<f64> = (0..4).map(|k| (w[k] - reach[k]).max(-self.from.box_bound)).collect();
        let bhi: Vec<f64> = (0..4).map(|k| (w[k] + reach[k]).min(self.from.box_bound)).collect();
        let mut top: Option<f64> = None;
        for v in vertices_in_box(self.from, &blo, &bhi)? {
            top = Some(top.unwrap_or(0.0).max(point_to_set(&v, self.to)?));
        }
        Ok(top.filter(|&t| t > best))
    }

    fn leaf(&self, idx: &[usize; 4]) -> Result<f64, DistanceError> {
        let g: Vec<f64> = idx.iter().map(|&i| self.center(i)).collect();
        let (d, z) = project(&g, self.from)?;
        if d > 0.5 * self.res + 1e-12 {
            return Ok(0.0);
        }
        point_to_set(&z, self.to)
    }

    fn directed(&self) -> Result<f64, DistanceError> {
        let mut best = 0.0f64;
        let mut heap = BinaryHeap::new();
        let (lo, hi) = ([0; 4], [self.cells; 4]);
        if self.cells == 1 {
            return self.leaf(&lo);
        }
        if let Some(u) = self.upper(&lo, &hi, best)? {
            heap.push(Block { lo, hi, upper: u });
        }
        while let Some(b) = heap.pop() {
            if b.upper <= best {
                break;
            }
            let axis = (0..4).max_by_key(|&k| (b.hi[k] - b.lo[k], 4 - k)).expect("four axes");
            let len = b.hi[axis] - b.lo[axis];
            let mid = b.lo[axis] + len / 2;
            for (l, h) in [(b.lo[axis], mid), (mid, b.hi[axis])] {
                let (mut clo, mut chi) = (b.lo, b.hi);
                clo[axis] = l;
                chi[axis] = h;
                if (0..4).all(|k| chi[k] - clo[k] == 1) {
                    best = best.max(self.leaf(&clo)?);
                } else if let Some(u) = self.upper(&clo, &chi, best)? {
                    heap.push(Block { lo: clo, hi: chi, upper: u });
                }
            }
        }
        Ok(best)
    }
}

fn grid_cells(res: f64) -> Result<usize, DistanceError> {
    if !(res > 0.0 && res <= 2.0) {
        return Err(DistanceError::BadResolution(res));
    }
    Ok((2.0 / res - 1e-9).ceil() as usize)
}

/// Grid estimate of the directed distance between two 2x2 systems.
///
/// Grid cell centers within `res / 2` of `from` are projected onto `from`
/// and their exact distance to `to` is taken. Blocks are searched best
/// first and skipped once the largest distance over the vertices of the
/// part of `from` they can project to cannot beat the running maximum. The result
/// lies in `[truth - res, truth]` and equals the maximum over all such
/// projected grid points (up to LP tolerance).
pub fn directed_distance_grid(from: &HalfspaceSystem, to: &HalfspaceSystem, res: f64) -> Result<f64, DistanceError> {
    same_dim(from, to)?;
    if from.dim != 4 {
        return Err(DistanceError::NotTwoByTwo((from.dim as f64).sqrt() as usize));
    }
    let cells = grid_cells(res)?;
    Grid { from, to, res, cells }.directed()
}

pub fn hausdorff_grid_systems(a: &HalfspaceSystem, b: &HalfspaceSystem, res: f64) -> Result<HausdorffEstimate, DistanceError> {
    let ab = directed_distance_grid(a, b, res)?;
    let ba = directed_distance_grid(b, a, res)?;
    Ok(HausdorffEstimate::new(EstimateMode::GridOracle, res, ab, ba))
}

/// Grid-oracle Hausdorff distance between two feasible sets of a 2x2 game.
pub fn hausdorff_grid_2x2(a: &SetSpec, b: &SetSpec, res: f64) -> Result<HausdorffEstimate, DistanceError> {
    for s in [a, b] {
        if s.n() != 2 {
            return Err(DistanceError::NotTwoByTwo(s.n()));
        }
    }
    grid_cells(res)?;
    hausdorff_grid_systems(&build_system(a), &build_system(b), res)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundKind {
    ExactGsg,
    ExactZsg,
    Approx,
}

/// Closed-form upper bound on the distance between the sets at `(x, y)` and `(xh, yh)`.
pub fn hausdorff_upper_bound(kind: BoundKind, x: &Strategy, xh: &Strategy, y: &Strategy, yh: &Strategy, alpha: f64) -> Result<f64, DistanceError> {
    match kind {
        BoundKind::ExactGsg | BoundKind::ExactZsg => {
            if support(x) != support(xh) {
                return Err(DistanceError::SupportMismatch("row"));
            }
            if support(y) != support(yh) {
                return Err(DistanceError::SupportMismatch("column"));
            }
            let c = if kind == BoundKind::ExactGsg { 4.0 } else { 8.0 };
            Ok(c * (l1_distance(x.probs(), xh.probs()) + l1_distance(y.probs(), yh.probs())))
        }
        BoundKind::Approx => Ok(f_alpha(x, xh, alpha)? + f_alpha(y, yh, alpha)?),
    }
}

pub fn upper_bound_estimate(value: f64) -> HausdorffEstimate {
    HausdorffEstimate::new(EstimateMode::PaperUpper, 0.0, value, value)
}
