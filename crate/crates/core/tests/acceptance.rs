//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any criterion fails.

use dataext_core::dataio::emit_plot;
use dataext_core::externality::{delta, detect, slope_scan, DeltaReport, SlopeSegment};
use dataext_core::intervention::{build_split, evaluate_intervention, SplitOptions};
use dataext_core::learners::lasso::coordinate_descent;
use dataext_core::learners::logistic::LogisticProblem;
use dataext_core::learners::{fit_with_lambda, Family, InterceptMode, TrainConfig};
use dataext_core::metrics::{auroc, Metric};
use dataext_core::sweep::{grid_axis, run_sweep, run_sweep_with_threads, DataSource, RiskSurface, SweepPlan};
use dataext_core::synthetic::{example1_spec, example2_spec, AffineGroupSpec};
use dataext_core::{Allocation, GroupId, GroupedDataset, Instance, Task};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::{Duration, Instant};

const SEED: u64 = 20_210_521;
const TRIALS: usize = 10;
const EVAL_SIZE: usize = 10_000;
const Z: f64 = 2.0;
const N_B: [usize; 5] = [0, 100, 1_000, 10_000, 100_000];

struct Outcome {
    pass: bool,
    detail: String,
}

fn g(name: &str) -> GroupId {
    name.into()
}

fn axis_grid(n_a: usize) -> Vec<Allocation> {
    grid_axis(&Allocation::from_pairs([("A", n_a)]), &g("B"), &N_B)
}

fn sweep(spec: AffineGroupSpec, n_a: usize, train: TrainConfig, threads: usize) -> RiskSurface {
    let plan = SweepPlan::synthetic(spec, axis_grid(n_a), TRIALS, train, SEED, EVAL_SIZE).unwrap();
    if threads == 0 {
        run_sweep(&plan).unwrap()
    } else {
        run_sweep_with_threads(&plan, threads).unwrap()
    }
}

fn cell_stats(s: &RiskSurface, n_b: usize, group: &str) -> (f64, f64) {
    let i = s.grid().iter().position(|a| a.get(&g("B")) == n_b).unwrap();
    let c = s.cell(i, &g(group)).unwrap();
    (c.mean().unwrap(), c.se().unwrap())
}

/// (difference of means, pooled SE) between two grid points on group A.
fn compare(s: &RiskSurface, hi: usize, lo: usize) -> (f64, f64) {
    let (m1, s1) = cell_stats(s, hi, "A");
    let (m0, s0) = cell_stats(s, lo, "A");
    (m1 - m0, (s1 * s1 + s0 * s0).sqrt())
}

fn a_slopes(s: &RiskSurface) -> Vec<SlopeSegment> {
    slope_scan(s, &g("A"), &g("B")).unwrap()
}

fn fmt_slopes(segs: &[SlopeSegment]) -> String {
    segs.iter()
        .map(|s| {
            format!(
                "{}->{}: {:+.4} (z={:.2})",
                s.from_count,
                s.to_count,
                s.change,
                s.z.unwrap_or(f64::NAN)
            )
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn ols() -> TrainConfig {
    TrainConfig::new(Family::Ols)
}

fn criterion1(surface: &RiskSurface) -> Outcome {
    let (diff, se) = compare(surface, 100_000, 0);
    let segs = a_slopes(surface);
    let rise = diff > Z * se;
    let monotone = segs.iter().all(|s| s.change >= 0.0);
    Outcome {
        pass: rise && monotone,
        detail: format!(
            "risk_A(1e5) - risk_A(0) = {diff:.4} vs 2SE = {:.4}; slopes {}",
            Z * se,
            fmt_slopes(&segs)
        ),
    }
}

fn max_magnitude(s: &RiskSurface) -> f64 {
    detect(s, Z)
        .iter()
        .filter(|f| f.eval_group == g("A"))
        .map(|f| f.magnitude)
        .fold(0.0, f64::max)
}

fn intermediate_bump(s: &RiskSurface) -> Option<(usize, f64, f64)> {
    [100, 1_000]
        .into_iter()
        .map(|n| {
            let (d, se) = compare(s, n, 0);
            (n, d, se)
        })
        .find(|&(_, d, se)| d > Z * se)
}

fn criterion2() -> Outcome {
    let s = sweep(example2_spec(), 100, ols(), 0);
    let bump = intermediate_bump(&s);
    let (d_end, se_end) = compare(&s, 100_000, 0);
    let dissipates = d_end <= Z * se_end;
    let large = sweep(example2_spec(), 10_000, ols(), 0);
    let (m_small, m_large) = (max_magnitude(&s), max_magnitude(&large));
    let bump_text = match bump {
        Some((n, d, se)) => format!("bump at n_B={n}: {d:.4} > 2SE {:.4}", Z * se),
        None => {
            let (d1, s1) = compare(&s, 100, 0);
            let (d2, s2) = compare(&s, 1_000, 0);
            format!(
                "no significant bump (100: {d1:.4}/2SE {:.4}, 1000: {d2:.4}/2SE {:.4})",
                Z * s1,
                Z * s2
            )
        }
    };
    Outcome {
        pass: bump.is_some() && dissipates && m_large < m_small,
        detail: format!(
            "{bump_text}; n_B=1e5 diff {d_end:.4} vs 2SE {:.4}; max magnitude n_A=100: {m_small:.4}, n_A=1e4: {m_large:.4}",
            Z * se_end
        ),
    }
}

fn criterion3() -> Outcome {
    let cfg = ols().with_intercept_mode(InterceptMode::PerGroup);
    let s = sweep(example1_spec(), 100, cfg, 0);
    let segs = a_slopes(&s);
    let significant = segs.iter().any(|s| s.z.is_some_and(|z| z >= Z));
    Outcome {
        pass: !significant,
        detail: format!("slopes {}", fmt_slopes(&segs)),
    }
}

fn criterion4() -> Outcome {
    let cfg = ols().with_group_weight(g("B"), 0.01);
    let s = sweep(example2_spec(), 100, cfg, 0);
    let bump = intermediate_bump(&s);
    let (d1, s1) = compare(&s, 100, 0);
    let (d2, s2) = compare(&s, 1_000, 0);
    Outcome {
        pass: bump.is_none(),
        detail: format!(
            "n_B=100: {d1:.4} vs 2SE {:.4}; n_B=1000: {d2:.4} vs 2SE {:.4}",
            Z * s1,
            Z * s2
        ),
    }
}

fn criterion5(surface: &RiskSurface) -> Outcome {
    let reference = Allocation::from_pairs([("A", 100), ("B", 100_000)]);
    let reports: Vec<DeltaReport> = surface
        .eval_groups()
        .iter()
        .map(|grp| delta(surface, grp, &reference).unwrap())
        .collect();
    let delta_a = &reports[0];
    assert_eq!(delta_a.eval_group, g("A"));
    let source = DataSource::Synthetic(example1_spec());
    let plan = SweepPlan::synthetic(example1_spec(), vec![reference.clone()], 1, ols(), SEED, EVAL_SIZE).unwrap();
    let groups = [g("A"), g("B")];
    let mut improvements = Vec::new();
    let mut b_identical = true;
    for rebuild in 0..10 {
        let split = build_split(
            &source,
            &reference,
            &reports,
            &ols(),
            SEED,
            rebuild,
            &SplitOptions::default(),
        )
        .unwrap();
        let rows = evaluate_intervention(&split, &plan.eval_set, &groups, Metric::Mse).unwrap();
        improvements.push(rows[0].improvement());
        b_identical &= rows[1].risk_before.to_bits() == rows[1].risk_after.to_bits();
    }
    let n = improvements.len() as f64;
    let mean = improvements.iter().sum::<f64>() / n;
    let sd = (improvements.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let se_impr = sd / n.sqrt();
    let se_delta = delta_a.se.unwrap_or(0.0);
    let band = Z * (se_impr * se_impr + se_delta * se_delta).sqrt();
    let within = (mean - delta_a.delta).abs() <= band;
    Outcome {
        pass: delta_a.delta > 0.0 && within && b_identical,
        detail: format!(
            "Delta_A = {:.4} (best sub {}), mean improvement {mean:.4}, |diff| {:.4} vs 2SE {band:.4}; group B bit-identical: {b_identical}",
            delta_a.delta,
            delta_a.best_sub,
            (mean - delta_a.delta).abs()
        ),
    }
}

fn pairwise_auroc(scores: &[f64], labels: &[f64]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] == 1.0 && labels[j] == 0.0 {
                den += 1.0;
                num += if scores[i] > scores[j] {
                    1.0
                } else if scores[i] == scores[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    num / den
}

fn random_surface(rng: &mut ChaCha8Rng) -> RiskSurface {
    let mut grid: Vec<Allocation> = Vec::new();
    while grid.len() < rng.random_range(2..15) {
        let a = Allocation::from_pairs([
            ("A", rng.random_range(0..4)),
            ("B", rng.random_range(0..4)),
            ("C", rng.random_range(0..3)),
        ]);
        if !grid.contains(&a) {
            grid.push(a);
        }
    }
    let risks: Vec<Vec<Vec<f64>>> = grid
        .iter()
        .map(|_| {
            (0..2)
                .map(|_| (0..3).map(|_| rng.random_range(0.0..1.0)).collect())
                .collect()
        })
        .collect();
    RiskSurface::from_risks(grid, vec![g("A"), g("B")], &risks)
}

fn leq(a: &Allocation, b: &Allocation) -> bool {
    ["A", "B", "C"].iter().all(|x| a.get(&g(x)) <= b.get(&g(x)))
}

fn criterion6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut notes = Vec::new();

    // (a) rank AUROC vs O(n^2) pairs; coarse scores force ties
    let scores: Vec<f64> = (0..1000)
        .map(|_| (rng.random_range(0.0..1.0f64) * 50.0).round())
        .collect();
    let labels: Vec<f64> = (0..1000).map(|_| f64::from(rng.random_bool(0.4))).collect();
    let err_a = (auroc(&scores, &labels).unwrap() - pairwise_auroc(&scores, &labels)).abs();
    notes.push(format!("auroc err {err_a:.1e}"));

    // (b) lasso at lambda 0 vs normal equations with explicit intercept column
    let mut err_b: f64 = 0.0;
    for _ in 0..5 {
        let (n, p) = (200, 4);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|x| {
                x.iter().enumerate().map(|(j, v)| (j as f64 - 1.5) * v).sum::<f64>() + 3.0 + rng.random_range(-1.0..1.0)
            })
            .collect();
        let ds = GroupedDataset::new(
            rows.iter()
                .zip(&y)
                .map(|(x, &y)| Instance::new(x.clone(), y, g("A")))
                .collect(),
            p,
            Task::Regression,
        )
        .unwrap();
        let mut cfg = TrainConfig::new(Family::Lasso).with_lambda(0.0);
        cfg.tol = 1e-12;
        let m = fit_with_lambda(&ds, &cfg, 0.0).unwrap();
        let x = DMatrix::from_fn(n, p + 1, |i, j| if j < p { rows[i][j] } else { 1.0 });
        let yv = DVector::from_column_slice(&y);
        let beta = (x.transpose() * &x).lu().solve(&(x.transpose() * yv)).unwrap();
        for j in 0..p {
            err_b = err_b.max((m.weights[j] - beta[j]).abs());
        }
        err_b = err_b.max((m.intercept(&g("A")).unwrap() - beta[p]).abs());
    }
    notes.push(format!("lasso err {err_b:.1e}"));

    // (c) and (d) on 100 random surfaces
    let (mut delta_ok, mut detect_ok) = (true, true);
    for _ in 0..100 {
        let s = random_surface(&mut rng);
        for grp in s.eval_groups() {
            for (r, reference) in s.grid().iter().enumerate() {
                let mr = s.mean(r, grp).unwrap();
                let brute = (0..s.grid().len())
                    .filter(|&i| leq(&s.grid()[i], reference))
                    .map(|i| mr - s.mean(i, grp).unwrap())
                    .fold(0.0, f64::max);
                delta_ok &= delta(&s, grp, reference).unwrap().delta == brute;
            }
        }
        let mut brute: Vec<(GroupId, usize, usize, f64)> = Vec::new();
        for grp in s.eval_groups() {
            for i in 0..s.grid().len() {
                for j in 0..s.grid().len() {
                    let (mi, mj) = (s.mean(i, grp).unwrap(), s.mean(j, grp).unwrap());
                    if i != j && leq(&s.grid()[i], &s.grid()[j]) && mi < mj {
                        brute.push((grp.clone(), i, j, mj - mi));
                    }
                }
            }
        }
        let mut found: Vec<(GroupId, usize, usize, f64)> = detect(&s, Z)
            .into_iter()
            .map(|f| (f.eval_group, f.sub_index, f.sup_index, f.magnitude))
            .collect();
        brute.sort_by(|a, b| (&a.0, a.1, a.2).cmp(&(&b.0, b.1, b.2)));
        found.sort_by(|a, b| (&a.0, a.1, a.2).cmp(&(&b.0, b.1, b.2)));
        detect_ok &= brute == found;
    }
    notes.push(format!("delta exact: {delta_ok}, detect exact: {detect_ok}"));
    Outcome {
        pass: err_a <= 1e-12 && err_b <= 1e-6 && delta_ok && detect_ok,
        detail: notes.join("; "),
    }
}

fn artifacts(threads: usize) -> Vec<(String, Vec<u8>)> {
    let s = sweep(example1_spec(), 100, ols(), threads);
    let reference = Allocation::from_pairs([("A", 100), ("B", 100_000)]);
    let reports: Vec<DeltaReport> = s
        .eval_groups()
        .iter()
        .map(|grp| delta(&s, grp, &reference).unwrap())
        .collect();
    let split = build_split(
        &DataSource::Synthetic(example1_spec()),
        &reference,
        &reports,
        &ols(),
        SEED,
        0,
        &SplitOptions::default(),
    )
    .unwrap();
    let mut detail = Vec::new();
    s.write_detail_csv(&mut detail).unwrap();
    let mut summary = Vec::new();
    s.write_summary_csv(&mut summary).unwrap();
    vec![
        ("detail.csv".into(), detail),
        ("summary.csv".into(), summary),
        (
            "findings.json".into(),
            serde_json::to_vec_pretty(&detect(&s, Z)).unwrap(),
        ),
        ("delta.json".into(), serde_json::to_vec_pretty(&reports).unwrap()),
        ("split.json".into(), serde_json::to_vec_pretty(&split).unwrap()),
        ("plot.svg".into(), emit_plot(&s, &g("B")).unwrap().into_bytes()),
    ]
}

fn criterion7() -> Outcome {
    let one = artifacts(1);
    let four = artifacts(4);
    let differing: Vec<&str> = one
        .iter()
        .zip(&four)
        .filter(|(a, b)| a.1 != b.1)
        .map(|(a, _)| a.0.as_str())
        .collect();
    Outcome {
        pass: differing.is_empty(),
        detail: if differing.is_empty() {
            format!("{} artifacts byte-identical for 1 and 4 threads", one.len())
        } else {
            format!("differing: {}", differing.join(", "))
        },
    }
}

fn criterion8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 8);
    let mut worst_grad: f64 = 0.0;
    for _ in 0..20 {
        let n = 50;
        let cols: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let y: Vec<f64> = (0..n).map(|_| f64::from(rng.random_bool(0.5))).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0) / n as f64).collect();
        let block_of: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let problem = LogisticProblem {
            cols: &cols,
            y: &y,
            v: &v,
            block_of: &block_of,
            n_blocks: 2,
            lambda: rng.random_range(0.0..0.5),
        };
        let theta: Vec<f64> = (0..problem.n_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, grad) = problem.loss_and_grad(&theta);
        for k in 0..theta.len() {
            let h = 1e-5;
            let mut up = theta.clone();
            let mut dn = theta.clone();
            up[k] += h;
            dn[k] -= h;
            let fd = (problem.loss(&up) - problem.loss(&dn)) / (2.0 * h);
            worst_grad = worst_grad.max((fd - grad[k]).abs() / grad[k].abs().max(fd.abs()).max(1e-8));
        }
    }

    let mut monotone = true;
    let mut problems = 0;
    for _ in 0..20 {
        let n = 80;
        let p = rng.random_range(2..8);
        let cols: Vec<Vec<f64>> = (0..p)
            .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<f64> = (0..n)
            .map(|i| cols[0][i] * 2.0 - cols[1][i] + rng.random_range(-0.3..0.3))
            .collect();
        let v = vec![1.0 / n as f64; n];
        for lambda in [0.0, 0.01, 0.1, 1.0] {
            let fit = coordinate_descent(&cols, &y, &v, lambda, 1e-10, 100_000).unwrap();
            monotone &= fit
                .objective_trace
                .windows(2)
                .all(|w| w[1] <= w[0] * (1.0 + 1e-14) + 1e-300);
            problems += 1;
        }
    }
    Outcome {
        pass: worst_grad < 1e-5 && monotone,
        detail: format!(
            "max gradient rel err {worst_grad:.1e}; CD objective non-increasing on {problems} problems: {monotone}"
        ),
    }
}

fn main() {
    let start = Instant::now();
    let mut failures = 0;
    let mut report = |id: u32, name: &str, limit: Option<Duration>, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let mut out = f();
        let elapsed = t.elapsed();
        if let Some(limit) = limit {
            if elapsed > limit {
                out.pass = false;
                out.detail.push_str(&format!("; exceeded time limit {limit:?}"));
            }
        }
        if !out.pass {
            failures += 1;
        }
        println!(
            "{} criterion {id} ({name}) [{:.1}s]: {}",
            if out.pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            out.detail
        );
    };

    let minute = Some(Duration::from_secs(60));
    let mut example1 = None;
    report(1, "capacity externality", minute, &mut || {
        let s = sweep(example1_spec(), 100, ols(), 0);
        let out = criterion1(&s);
        example1 = Some(s);
        out
    });
    report(
        2,
        "noise externality dissipates",
        Some(Duration::from_secs(120)),
        &mut criterion2,
    );
    report(3, "per-group intercept remedy", minute, &mut criterion3);
    report(4, "reweighting remedy", Some(Duration::from_secs(120)), &mut criterion4);
    let example1 = example1.expect("criterion 1 ran");
    report(5, "split model realises delta", minute, &mut || criterion5(&example1));
    report(6, "oracle equivalences", None, &mut criterion6);
    report(7, "determinism across threads", None, &mut criterion7);
    report(8, "numerical checks", None, &mut criterion8);

    println!(
        "acceptance: {} of 8 criteria passed in {:.1}s",
        8 - failures,
        start.elapsed().as_secs_f64()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
