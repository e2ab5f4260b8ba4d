//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_FAILURES` test closed-form bounds that admit
//! counterexamples; they are still evaluated in full and reported as FAIL,
//! but only an unexpected failure makes the process exit nonzero.
//!
//! `ACCEPTANCE_RESOLUTION` overrides the grid resolution of criterion 4
//! (default 0.05; 0.1 is the coarse setting).

use payoffset::construct::{approx_scale, exact_gsg_col, exact_gsg_row, exact_zsg_fix_x, exact_zsg_fix_y, ConstructionReport};
use payoffset::distance::{hausdorff_grid_2x2, hausdorff_upper_bound, BoundKind, HausdorffEstimate};
use payoffset::experiments::{run_convergence, run_coverage, ExperimentConfig, GameKind, RoundsSpec};
use payoffset::feasible::{build_system, matrix_membership, SetKind, SetSpec};
use payoffset::games::{PayoffMatrix, Strategy, StrategyProfile};
use payoffset::generate::{gsg_col_matrix, gsg_row_matrix, perturb_same_support, perturb_within_support, random_strategy, uniform_matrix, zsg_matrix};
use payoffset::instances::{make_lb_instance, verify_separation, LbFamily, LbParams};
use payoffset::lp::{solve_lp, LpProblem};
use payoffset::rates::{fractional_knapsack, minimax_lower_bound, sample_size, subset_sup, LowerBoundFamily, RateParams, Regime};
use payoffset::rng::{stream, StreamRng};
use rand::Rng;
use std::time::Instant;

const KNOWN_FAILURES: [(u32, &str); 2] = [
    (4, "the alpha > 0 closed-form bound is zero when no action fits under alpha / 2"),
    (5, "a partially packed item makes the fractional optimum positive while every admissible subset is empty"),
];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn s(v: &[f64]) -> Strategy {
    Strategy::new(v.to_vec()).unwrap()
}

fn l1(a: &Strategy, b: &Strategy) -> f64 {
    a.probs().iter().zip(b.probs()).map(|(u, v)| (u - v).abs()).sum()
}

// Deviation gaps computed entry by entry.
fn row_values(m: &PayoffMatrix, y: &[f64]) -> Vec<f64> {
    (0..m.n()).map(|i| (0..m.n()).map(|j| m.get(i, j) * y[j]).sum()).collect()
}

fn col_values(m: &PayoffMatrix, x: &[f64]) -> Vec<f64> {
    (0..m.n()).map(|j| (0..m.n()).map(|i| x[i] * m.get(i, j)).sum()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

fn gap(kind: SetKind, m: &PayoffMatrix, x: &Strategy, y: &Strategy) -> f64 {
    let (x, y) = (x.probs(), y.probs());
    let r = row_values(m, y);
    let c = col_values(m, x);
    let v = dot(x, &r);
    let row = v - r.iter().cloned().fold(f64::INFINITY, f64::min);
    match kind {
        SetKind::GsgRow => row,
        SetKind::GsgCol => v - c.iter().cloned().fold(f64::INFINITY, f64::min),
        SetKind::Zsg => row.max(c.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v),
    }
}

fn linf(a: &PayoffMatrix, b: &PayoffMatrix) -> f64 {
    a.flat().iter().zip(b.flat()).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
}

struct SoundnessTally {
    cases: usize,
    worst_violation: f64,
    worst_excess: f64,
}

impl SoundnessTally {
    fn add(&mut self, input: &PayoffMatrix, r: &ConstructionReport, bound: f64, gap_excess: f64) {
        self.cases += 1;
        self.worst_violation = self.worst_violation.max(r.membership_violation).max(gap_excess);
        self.worst_excess = self.worst_excess.max(linf(input, &r.output) - bound);
    }
}

fn criterion_1() -> Outcome {
    const TOL: f64 = 1e-7;
    let start = Instant::now();
    let mut rng = stream(101, 0);
    let mut tallies: Vec<(&str, SoundnessTally)> = ["gsg_row", "gsg_col", "zsg_fix_x", "zsg_fix_y", "approx_scale"]
        .iter()
        .map(|&n| (n, SoundnessTally { cases: 0, worst_violation: 0.0, worst_excess: f64::NEG_INFINITY }))
        .collect();
    for n in 2..=6 {
        for _ in 0..500 {
            let x = random_strategy(&mut rng, n, 0.3);
            let y = random_strategy(&mut rng, n, 0.3);
            let any_x = random_strategy(&mut rng, n, 0.3);
            let any_y = random_strategy(&mut rng, n, 0.3);
            let xh = perturb_same_support(&mut rng, &x, 0.5);
            let yh = perturb_same_support(&mut rng, &y, 0.5);

            let a = gsg_row_matrix(&mut rng, &x, &y);
            let r = exact_gsg_row(&a, &x, &y, &xh, &any_y).unwrap();
            tallies[0].1.add(&a, &r, 4.0 * l1(&y, &any_y), gap(SetKind::GsgRow, &r.output, &xh, &any_y));

            let b = gsg_col_matrix(&mut rng, &x, &y);
            let r = exact_gsg_col(&b, &x, &y, &any_x, &yh).unwrap();
            tallies[1].1.add(&b, &r, 4.0 * l1(&x, &any_x), gap(SetKind::GsgCol, &r.output, &any_x, &yh));

            let z = zsg_matrix(&mut rng, &x, &y);
            let r = exact_zsg_fix_x(&z, &x, &y, &yh).unwrap();
            tallies[2].1.add(&z, &r, 4.0 * l1(&y, &yh), gap(SetKind::Zsg, &r.output, &x, &yh));
            let r = exact_zsg_fix_y(&z, &x, &y, &xh).unwrap();
            tallies[3].1.add(&z, &r, 4.0 * l1(&x, &xh), gap(SetKind::Zsg, &r.output, &xh, &y));

            let kind = [SetKind::GsgRow, SetKind::GsgCol, SetKind::Zsg][rng.gen_range(0..3)];
            let m = uniform_matrix(&mut rng, n);
            let alpha = rng.gen_range(0.01..0.5);
            let g = gap(kind, &m, &any_x, &any_y);
            let bound = if g <= alpha { 0.0 } else { 2.0 * (g - alpha) / g };
            let r = approx_scale(kind, &m, &any_x, &any_y, alpha).unwrap();
            tallies[4].1.add(&m, &r, bound, gap(kind, &r.output, &any_x, &any_y) - alpha);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = secs < 60.0 && tallies.iter().all(|(_, t)| t.cases == 2500 && t.worst_violation <= TOL && t.worst_excess <= TOL);
    let detail = tallies
        .iter()
        .map(|(n, t)| format!("{n}: viol {:.1e} excess {:.1e}", t.worst_violation, t.worst_excess))
        .collect::<Vec<_>>()
        .join("; ");
    outcome(pass, format!("{detail}; {secs:.1}s"))
}

fn criterion_2() -> Outcome {
    let a = PayoffMatrix::new(vec![vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
    let (x, y, xh, yh) = (s(&[0.5, 0.5]), s(&[0.5, 0.5]), s(&[0.6, 0.4]), s(&[0.4, 0.6]));
    let r = exact_gsg_row(&a, &x, &y, &xh, &yh).unwrap();
    let expected = PayoffMatrix::new(vec![vec![1.0, -3.0 / 7.0], vec![-5.0 / 7.0, 5.0 / 7.0]]).unwrap();
    let err = linf(&r.output, &expected);
    let zero_sum = build_system(&SetSpec::new(SetKind::Zsg, xh.clone(), yh.clone(), 0.0).unwrap());
    let (member, viol) = matrix_membership(&r.output, &zero_sum, 1e-9).unwrap();
    let col_gap = gap(SetKind::Zsg, &r.output, &xh, &yh);
    outcome(err <= 1e-6 && !member, format!("max error {err:.1e}; zero-sum member {member} (violation {viol:.4}, gap {col_gap:.4})"))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut details = Vec::new();
    let mut pass = true;
    let mut check = |family: LbFamily, p: LbParams, accept: &dyn Fn(f64) -> bool, label: String| {
        let inst = make_lb_instance(family, &p).unwrap();
        let (_, measured) = verify_separation(&inst, 1e-6).unwrap();
        let ok = accept(measured);
        pass &= ok;
        details.push(format!("{label}={measured:.4}{}", if ok { "" } else { "!" }));
    };
    for pi in [0.1, 0.3, 0.5] {
        check(LbFamily::Impossibility, LbParams { pi, ..LbParams::default() }, &|m| (m - 1.0).abs() <= 1e-6, format!("imp(pi={pi})"));
    }
    for epsilon in [0.01, 0.05, 0.1] {
        check(LbFamily::EpsFamily, LbParams { epsilon, ..LbParams::default() }, &|m| m >= 2.0 * epsilon - 1e-6, format!("eps({epsilon})"));
    }
    for alpha in [0.05, 0.2] {
        for epsilon in [0.01, 0.05] {
            check(
                LbFamily::AlphaLog,
                LbParams { alpha, epsilon, ..LbParams::default() },
                &|m| m >= 2.0 * epsilon - 1e-6,
                format!("alog({alpha},{epsilon})"),
            );
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(pass && secs < 10.0, format!("{} in {secs:.2}s", details.join(" ")))
}

fn pair(rng: &mut StreamRng, zero_prob: f64) -> StrategyProfile {
    StrategyProfile::new(random_strategy(rng, 2, zero_prob), random_strategy(rng, 2, zero_prob)).unwrap()
}

fn grid(kind: SetKind, a: &StrategyProfile, b: &StrategyProfile, alpha: f64, res: f64) -> HausdorffEstimate {
    let sa = SetSpec::new(kind, a.x.clone(), a.y.clone(), alpha).unwrap();
    let sb = SetSpec::new(kind, b.x.clone(), b.y.clone(), alpha).unwrap();
    hausdorff_grid_2x2(&sa, &sb, res).unwrap()
}

fn game_grid(game: GameKind, a: &StrategyProfile, b: &StrategyProfile, alpha: f64, res: f64) -> f64 {
    match game {
        GameKind::Gsg => grid(SetKind::GsgRow, a, b, alpha, res).product(&grid(SetKind::GsgCol, a, b, alpha, res)).value,
        GameKind::Zsg => grid(SetKind::Zsg, a, b, alpha, res).value,
    }
}

fn criterion_4() -> Outcome {
    let res: f64 = std::env::var("ACCEPTANCE_RESOLUTION").ok().and_then(|v| v.parse().ok()).unwrap_or(0.05);
    let start = Instant::now();
    let mut rng = stream(404, 0);

    let mut decomposition_failures = 0;
    for _ in 0..50 {
        let p = pair(&mut rng, 0.2);
        let q = pair(&mut rng, 0.2);
        let alpha = if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.0..0.3) };
        let mid = StrategyProfile::new(q.x.clone(), p.y.clone()).unwrap();
        for kind in [SetKind::GsgRow, SetKind::GsgCol, SetKind::Zsg] {
            let whole = grid(kind, &p, &q, alpha, res).value;
            let split = grid(kind, &p, &mid, alpha, res).value + grid(kind, &mid, &q, alpha, res).value;
            if whole > split + 2.0 * res {
                decomposition_failures += 1;
            }
        }
    }

    let mut exact_failures = 0;
    let mut exact_cases = 0;
    for game in [GameKind::Gsg, GameKind::Zsg] {
        for _ in 0..50 {
            let p = pair(&mut rng, 0.2);
            let q = StrategyProfile::new(perturb_same_support(&mut rng, &p.x, 0.3), perturb_same_support(&mut rng, &p.y, 0.3)).unwrap();
            let kind = if game == GameKind::Gsg { BoundKind::ExactGsg } else { BoundKind::ExactZsg };
            let bound = hausdorff_upper_bound(kind, &p.x, &q.x, &p.y, &q.y, 0.0).unwrap();
            exact_cases += 1;
            if game_grid(game, &p, &q, 0.0, res) > bound + res {
                exact_failures += 1;
            }
        }
    }

    let mut approx_failures = 0;
    let mut approx_cases = 0;
    let mut example = String::new();
    for game in [GameKind::Gsg, GameKind::Zsg] {
        for _ in 0..50 {
            let p = pair(&mut rng, 0.2);
            let q = StrategyProfile::new(perturb_within_support(&mut rng, &p.x, 0.3, 0.1), perturb_within_support(&mut rng, &p.y, 0.3, 0.1)).unwrap();
            let alpha = rng.gen_range(0.05..0.5);
            let bound = hausdorff_upper_bound(BoundKind::Approx, &p.x, &q.x, &p.y, &q.y, alpha).unwrap();
            let h = game_grid(game, &p, &q, alpha, res);
            approx_cases += 1;
            if h > bound + res {
                approx_failures += 1;
                if example.is_empty() {
                    example = format!(
                        " (e.g. {game:?} x={:.3?} xh={:.3?} y={:.3?} yh={:.3?} alpha={alpha:.3}: grid {h:.4} > bound {bound:.4})",
                        p.x.probs(),
                        q.x.probs(),
                        p.y.probs(),
                        q.y.probs()
                    );
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        decomposition_failures == 0 && exact_failures == 0 && approx_failures == 0 && secs < 600.0,
        format!(
            "resolution {res}: decomposition {decomposition_failures}/150 fail; exact bound {exact_failures}/{exact_cases} fail; \
             alpha bound {approx_failures}/{approx_cases} fail{example}; {secs:.1}s"
        ),
    )
}

// Best subset by recursive include/exclude over the supported actions.
fn subset_oracle(p: &[f64], q: &[f64], cap: f64) -> f64 {
    fn go(i: usize, p: &[f64], q: &[f64], room: f64, gain: f64, best: &mut f64) {
        if i == p.len() {
            *best = best.max(gain);
            return;
        }
        go(i + 1, p, q, room, gain, best);
        if p[i] > 1e-12 && p[i] <= room {
            go(i + 1, p, q, room - p[i], gain + q[i] - p[i], best);
        }
    }
    let mut best = 0.0;
    go(0, p, q, cap, 0.0, &mut best);
    best
}

fn knapsack_lp(p: &[f64], q: &[f64], alpha: f64) -> f64 {
    let items: Vec<usize> = (0..p.len()).filter(|&i| p[i] > 1e-12).collect();
    let obj: Vec<f64> = items.iter().map(|&i| -(q[i] - p[i]) / p[i]).collect();
    let hi: Vec<f64> = items.iter().map(|&i| 2.0 * p[i]).collect();
    let mut lp = LpProblem::new(obj, vec![0.0; items.len()], hi);
    lp.add_row(vec![1.0; items.len()], alpha);
    let sol = solve_lp(&lp).unwrap();
    assert!(sol.is_optimal());
    -sol.value
}

fn criterion_5() -> Outcome {
    let mut rng = stream(505, 0);
    let mut mismatches = 0;
    let mut ratio_failures = 0;
    let mut example = String::new();
    for _ in 0..1000 {
        let n = rng.gen_range(2..=12);
        let x = random_strategy(&mut rng, n, 0.2);
        let xh = random_strategy(&mut rng, n, 0.2);
        let alpha = rng.gen_range(0.01..1.0);
        let exact = subset_sup(x.probs(), xh.probs(), alpha).unwrap();
        let frac = fractional_knapsack(x.probs(), xh.probs(), alpha).unwrap();
        if (exact - subset_oracle(x.probs(), xh.probs(), alpha / 2.0)).abs() > 1e-12 {
            mismatches += 1;
        }
        if frac > 4.0 * exact + 1e-12 {
            ratio_failures += 1;
        }
    }
    // smallest instance of the ratio failure
    let (x, xh, alpha) = ([0.5, 0.5], [0.6, 0.4], 0.2);
    let (e, f) = (subset_sup(&x, &xh, alpha).unwrap(), fractional_knapsack(&x, &xh, alpha).unwrap());
    if f > 4.0 * e {
        example = format!(" (e.g. x={x:?} xh={xh:?} alpha={alpha}: exact {e} fractional {f:.3})");
    }
    let mut lp_err: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.gen_range(2..=12);
        let x = random_strategy(&mut rng, n, 0.2);
        let xh = random_strategy(&mut rng, n, 0.2);
        let alpha = rng.gen_range(0.01..1.0);
        let g = fractional_knapsack(x.probs(), xh.probs(), alpha).unwrap();
        lp_err = lp_err.max((g - knapsack_lp(x.probs(), xh.probs(), alpha)).abs());
    }
    outcome(
        mismatches == 0 && ratio_failures == 0 && lp_err <= 1e-9,
        format!("oracle mismatches {mismatches}/1000; fractional > 4 exact on {ratio_failures}/1000{example}; greedy vs LP max error {lp_err:.1e}"),
    )
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        seed: Some(606),
        profile: Some(StrategyProfile::new(s(&[0.1, 0.15, 0.25, 0.5]), s(&[1.0, 0.0, 0.0, 0.0])).unwrap()),
        m: RoundsSpec::Fixed(200),
        delta: 0.1,
        beta: 0.3,
        reps: 2000,
        ..ExperimentConfig::default()
    };
    let r = run_coverage(&cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let sm = &r.summary;
    outcome(
        sm.l1_violation_rate <= 0.1 && sm.subset_violation_rate <= 0.1 && sm.missing_violation_rate <= 0.1 && secs < 30.0,
        format!(
            "violation rates l1 {:.4} subset {:.4} missing mass {:.4} (delta 0.1); {secs:.2}s",
            sm.l1_violation_rate, sm.subset_violation_rate, sm.missing_violation_rate
        ),
    )
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        seed: Some(707),
        game: GameKind::Gsg,
        alpha: 0.25,
        profile: Some(StrategyProfile::new(s(&[0.05, 0.05, 0.9]), s(&[0.9, 0.05, 0.05])).unwrap()),
        m_grid: vec![100, 1_000, 10_000, 100_000],
        reps: 200,
        mc_samples: 50,
        ..ExperimentConfig::default()
    };
    let r = run_convergence(&cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let slope = r.summary.bound_slope.unwrap_or(f64::NAN);
    let medians: Vec<String> = r
        .summary
        .per_m
        .iter()
        .map(|p| format!("m={} bound {:.4} H {:.4}", p.m, p.median_bound.unwrap_or(f64::NAN), p.median_hausdorff))
        .collect();
    outcome(
        (-0.65..=-0.35).contains(&slope) && r.summary.hausdorff_nonincreasing && secs < 300.0,
        format!("slope {slope:.3}; {}; {secs:.1}s", medians.join(", ")),
    )
}

fn sig4(v: f64) -> String {
    format!("{v:.3e}")
}

fn criterion_8() -> Outcome {
    let (n, eps, delta, pi) = (2.0f64, 0.1f64, 0.05f64, 0.1f64);
    let k = eps / 128f64.sqrt();
    let t1 = (4.0 * n / delta).ln() / (1.0 / (1.0 - pi)).ln();
    let t2 = 2.0 * (2.0 + 4.0 * (4.0 / delta).ln() / (k * k) + (4.0 * n / (k * k)) * (12.0 * n / (k * k)).ln());
    let hand_m = t1.max(t2).ceil();
    let hand_lb = (1.0 / (4.0 * delta)).ln() / (16.0 * eps * eps);
    let exact = RateParams { n: 2, epsilon: eps, delta, alpha: None, pi_min: Some(pi) };
    let m = sample_size(Regime::Exact, &exact).unwrap() as f64;
    let lb = minimax_lower_bound(LowerBoundFamily::ExactEps, &exact).unwrap();
    let values_ok = sig4(m) == sig4(hand_m) && sig4(m) == "3.036e6" && sig4(lb) == sig4(hand_lb) && format!("{lb:.2}") == "10.06";

    let mut points = 0;
    let mut violations = 0;
    for n in [2, 4, 8, 16, 32] {
        for epsilon in [0.001, 0.0025] {
            for delta in [0.01, 0.05, 0.1, 0.2, 0.24] {
                for (regime, alpha, pi_min) in [(Regime::Exact, None, Some(0.05)), (Regime::Approx, Some(0.1), None)] {
                    let p = RateParams { n, epsilon, delta, alpha, pi_min };
                    let m = sample_size(regime, &p).unwrap() as f64;
                    points += 1;
                    let families: &[LowerBoundFamily] = match regime {
                        Regime::Exact => &[LowerBoundFamily::ExactPiMin, LowerBoundFamily::ExactEps, LowerBoundFamily::ExactN],
                        Regime::Approx => &[LowerBoundFamily::ApproxLog, LowerBoundFamily::ApproxN],
                    };
                    for &f in families {
                        if m < minimax_lower_bound(f, &p).unwrap() {
                            violations += 1;
                        }
                    }
                }
            }
        }
    }
    outcome(
        values_ok && points == 100 && violations == 0,
        format!("m = {m} (hand {hand_m}), lower bound {lb:.4} (hand {hand_lb:.4}); {violations} violations on {points} grid points"),
    )
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        (1, "construction soundness", criterion_1),
        (2, "worked construction example", criterion_2),
        (3, "lower-bound separations", criterion_3),
        (4, "grid oracle checks", criterion_4),
        (5, "knapsack sups", criterion_5),
        (6, "concentration coverage", criterion_6),
        (7, "convergence rate", criterion_7),
        (8, "formula cross-checks", criterion_8),
    ];
    let mut unexpected = 0;
    let mut passed = 0;
    for (id, name, f) in criteria {
        let o = f();
        let known = KNOWN_FAILURES.iter().find(|k| k.0 == id);
        let status = if o.pass { "PASS" } else { "FAIL" };
        let note = match (o.pass, known) {
            (false, Some((_, why))) => format!(" [expected: {why}]"),
            (true, Some(_)) => " [expected failure did not occur]".to_string(),
            _ => String::new(),
        };
        println!("criterion {id} {status}: {name}: {}{note}", o.detail);
        if o.pass {
            passed += 1;
        } else if known.is_none() {
            unexpected += 1;
        }
    }
    println!("acceptance: {passed}/8 criteria pass, {unexpected} unexpected failures");
    if unexpected > 0 {
        std::process::exit(1);
    }
}
