//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

mod common;

use std::time::{Duration, Instant};

use common::panels::{partial_residual, random_factors, random_panel, random_tensor};
use common::{brute_force_ari, dense_column_solve, direct_silhouette, PiecewiseCubic, Problem};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smooth_ntf::features::{adjusted_rand_index, kmeans, silhouette, site_features};
use smooth_ntf::panel::{assemble_tensors, build_temperature_grid, day_tensor, functional_objective};
use smooth_ntf::solver::{
    fit_baseline_ntf, fit_observed, hals_update_a, hals_update_b, objective, FactorSet,
    FitReport, ModeConstraint, SolverConfig, SweepState, Termination,
};
use smooth_ntf::splinequad::SplineSystem;
use smooth_ntf::synthgen::PlantSpec;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

/// Running record of the factor invariants seen by sweep observers.
#[derive(Default)]
struct ConstraintLog {
    states: usize,
    negative: usize,
    worst_normalization: f64,
}

impl ConstraintLog {
    fn observe(&mut self, state: &SweepState<'_, f64>, va: &[f64], vb: &[f64]) {
        self.states += 1;
        if !state.factors.all_nonnegative() {
            self.negative += 1;
        }
        let err = state.factors.max_normalization_error(va, vb);
        self.worst_normalization = self.worst_normalization.max(err);
    }

    fn holds(&self) -> bool {
        self.states > 0 && self.negative == 0 && self.worst_normalization <= 1e-12
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn max_rel(x: &[f64], y: &[f64]) -> f64 {
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    x.iter().zip(y).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale
}

fn sorted_grid(rng: &mut ChaCha8Rng, n: usize, lo: f64, span: f64) -> Vec<f64> {
    let mut pts: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut grid = Vec::with_capacity(n);
    let mut last = f64::NEG_INFINITY;
    for p in pts {
        let x = (lo + p * span).max(last + 0.05 * span / n as f64);
        grid.push(x);
        last = x;
    }
    grid
}

fn spline_exactness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst_int, mut worst_pen) = (0.0f64, 0.0f64);
    for case in 0..40 {
        let periodic = case % 2 == 1;
        let (grid, period) = if periodic {
            let n = rng.random_range(3..=16);
            let grid = sorted_grid(&mut rng, n, 0.0, 23.0);
            (grid, Some(24.0))
        } else {
            let n = rng.random_range(2..=16);
            (sorted_grid(&mut rng, n, -5.0, 30.0), None)
        };
        let g: Vec<f64> = grid.iter().map(|_| rng.random_range(0.0..3.0)).collect();
        let system = match period {
            Some(p) => SplineSystem::periodic(&grid, p),
            None => SplineSystem::natural(&grid),
        };
        let Ok(system) = system else {
            return Verdict::new(false, format!("grid {grid:?} rejected"));
        };
        let (int, curv) = PiecewiseCubic::interpolate(&grid, &g, period).quadrature(100_000);
        worst_int = worst_int.max(rel(system.integral(&g).unwrap(), int));
        worst_pen = worst_pen.max(rel(system.penalty(&g).unwrap(), curv));
    }
    Verdict::new(
        worst_int <= 1e-8 && worst_pen <= 1e-6,
        format!("20 natural + 20 periodic grids, worst rel err: weights {worst_int:.1e}, penalty {worst_pen:.1e}"),
    )
}

fn reformulation_equivalence() -> Verdict {
    let mut worst = 0.0f64;
    for seed in 0..10 {
        let panel = random_panel(seed);
        let grid = build_temperature_grid(&panel, 2.0).unwrap();
        let pair = assemble_tensors(&panel, &grid).unwrap();
        let intraday = SplineSystem::periodic(panel.intraday_grid(), 24.0).unwrap();
        let thermal = SplineSystem::natural(grid.values()).unwrap();
        let factors = random_factors(pair.x.dims(), 1 + seed as usize % 3, seed + 77);
        let (alpha, beta) = (0.5 + seed as f64, 2.0);
        let direct = functional_objective(&panel, &factors, &grid, &intraday, &thermal, alpha, beta).unwrap();
        let terms = objective(&pair.w, &pair.x, &factors, &intraday, &thermal, alpha, beta).unwrap();
        worst = worst.max(rel(terms.total + pair.within_bin_variance, direct));
    }
    Verdict::new(worst <= 1e-10, format!("10 panels, worst rel gap {worst:.1e}"))
}

fn subproblem_optimality() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for inst in 0..50u64 {
        let dims = (rng.random_range(3..=8), rng.random_range(2..=6), rng.random_range(2..=6));
        let rank = rng.random_range(1..=3);
        let r = rng.random_range(0..rank);
        let weight = rng.random_range(0.0..2.0);
        let w = random_tensor(dims, 0.1, 2.0, inst);
        let x = random_tensor(dims, 0.0, 3.0, inst + 100);
        let f = random_factors(dims, rank, inst + 200);
        let partial = partial_residual(&x, &f, r);
        let col = |m: &Array2<f64>| m.column(r).to_vec();
        let intraday = SplineSystem::periodic(&sorted_grid(&mut rng, dims.0, 0.0, 23.0), 24.0).unwrap();
        let thermal = SplineSystem::natural(&sorted_grid(&mut rng, dims.1, -2.0, 20.0)).unwrap();

        let up = hals_update_a(&w, &partial, &col(&f.b), &col(&f.c), &ModeConstraint::from_spline(&intraday, weight), 1e-12)
            .unwrap();
        let oracle = dense_column_solve(1, &w, &partial, &col(&f.b), &col(&f.c), Some(intraday.penalty_matrix()), weight);
        worst = worst.max(max_rel(up.unclipped.as_slice().unwrap(), &oracle));

        let up = hals_update_b(&w, &partial, &col(&f.a), &col(&f.c), &ModeConstraint::from_spline(&thermal, weight), 1e-12)
            .unwrap();
        let oracle = dense_column_solve(2, &w, &partial, &col(&f.a), &col(&f.c), Some(thermal.penalty_matrix()), weight);
        worst = worst.max(max_rel(up.unclipped.as_slice().unwrap(), &oracle));
    }
    Verdict::new(worst <= 1e-8, format!("50 instances (a and b updates), worst rel err {worst:.1e}"))
}

fn observed_fit(p: &Problem, cfg: &SolverConfig<f64>, log: &mut ConstraintLog) -> (FactorSet<f64>, FitReport<f64>) {
    let (va, vb) = (p.intraday.weights().to_vec(), p.thermal.weights().to_vec());
    fit_observed(&p.pair, &p.intraday, &p.thermal, cfg, |s| log.observe(s, &va, &vb)).expect("fit succeeds")
}

fn descent(penalty: f64, log: &mut ConstraintLog) -> Verdict {
    let mut failures = Vec::new();
    let (mut worst_share, mut max_sweeps) = (1.0f64, 0);
    for seed in 0..20 {
        let spec = PlantSpec {
            rank: 4,
            times: 24,
            temp_min: 5.0,
            temp_max: 19.0,
            regimes: 2,
            sites: 30,
            days: 120,
            noise_sd: 0.05,
            seed,
            ..PlantSpec::default()
        };
        let p = Problem::generate(&spec);
        let dims = p.pair.x.dims();
        if dims != (24, 15, 60) {
            failures.push(format!("seed {seed}: tensor dims {dims:?}"));
            continue;
        }
        let cfg = SolverConfig { rank: 4, alpha: penalty, beta: penalty, seed, ..SolverConfig::default() };
        let (_, report) = observed_fit(&p, &cfg, log);
        let steps = report.trace.len() - 1;
        let down = report.trace.windows(2).filter(|t| t[1].total <= t[0].total).count();
        worst_share = worst_share.min(down as f64 / steps as f64);
        max_sweeps = max_sweeps.max(report.sweeps);
        let first = report.trace[0].total;
        if report.trace[steps].total > first || report.final_terms().total > first {
            failures.push(format!("seed {seed}: final above initial"));
        }
        if report.termination != Termination::Converged || report.sweeps > 500 {
            failures.push(format!("seed {seed}: {:?} after {} sweeps", report.termination, report.sweeps));
        }
    }
    Verdict::new(
        failures.is_empty() && worst_share >= 0.95,
        format!(
            "20 fits at alpha = beta = {penalty}, worst nonincreasing share {:.1}%, max sweeps {max_sweeps}{}",
            100.0 * worst_share,
            if failures.is_empty() { String::new() } else { format!(", {}", failures.join("; ")) }
        ),
    )
}

fn planted_recovery(log: &mut ConstraintLog) -> Verdict {
    let (mut worst_loss, mut worst_cos, mut worst_ari) = (0.0f64, 1.0f64, 1.0f64);
    for seed in 0..10 {
        let spec = PlantSpec { rank: 3, sites: 12, clusters: 3, seed, ..PlantSpec::default() };
        let p = Problem::generate(&spec);
        let cfg = SolverConfig { rank: 3, alpha: 0.0, beta: 0.0, seed, max_sweeps: 5000, ..SolverConfig::default() };
        let (f, report) = observed_fit(&p, &cfg, log);
        worst_loss = worst_loss.max(report.final_terms().loss / p.data_norm());
        worst_cos = p.planted_cosines(&f).into_iter().fold(worst_cos, f64::min);

        let p = Problem::generate(&PlantSpec { noise_sd: 0.05, ..spec });
        let cfg = SolverConfig { rank: 3, alpha: 1.0, beta: 1.0, seed, ..SolverConfig::default() };
        let (f, _) = observed_fit(&p, &cfg, log);
        let feats = site_features(&f.c, 1, spec.sites).unwrap();
        let labels = kmeans(&feats, spec.clusters, seed, 10).unwrap().labels;
        worst_ari = worst_ari.min(adjusted_rand_index(&labels, &p.synthetic.truth.labels).unwrap());
    }
    Verdict::new(
        worst_loss <= 1e-6 && worst_cos >= 0.999 && worst_ari == 1.0,
        format!("10 seeds: worst rel loss {worst_loss:.1e}, worst cosine {worst_cos:.6}, worst noisy ARI {worst_ari:.3}"),
    )
}

fn smooth_vs_baseline(log: &mut ConstraintLog) -> Verdict {
    let mut wins = 0;
    let mut scores = Vec::new();
    for seed in 0..10 {
        let spec = PlantSpec {
            rank: 3,
            sites: 15,
            clusters: 3,
            noise_sd: 0.05,
            climate_spread: 4.0,
            shuffle_days: true,
            temp_min: -5.0,
            temp_max: 30.0,
            seed,
            ..PlantSpec::default()
        };
        let p = Problem::generate(&spec);
        let cfg = SolverConfig { rank: 3, alpha: 1.0, beta: 1.0, seed, ..SolverConfig::default() };
        let (f, _) = observed_fit(&p, &cfg, log);
        let feats = site_features(&f.c, 1, spec.sites).unwrap();
        let truth = &p.synthetic.truth.labels;
        let smooth = adjusted_rand_index(&kmeans(&feats, 3, seed, 10).unwrap().labels, truth).unwrap();

        let (_, days) = day_tensor(&p.synthetic.panel);
        let (g, _) = fit_baseline_ntf(&days, &cfg).unwrap();
        let baseline = adjusted_rand_index(&kmeans(&g.c, 3, seed, 10).unwrap().labels, truth).unwrap();
        if smooth >= baseline {
            wins += 1;
        }
        scores.push(format!("{smooth:.2}/{baseline:.2}"));
    }
    Verdict::new(wins >= 8, format!("smooth >= baseline in {wins}/10 seeds (ARI smooth/baseline: {})", scores.join(" ")))
}

fn metrics() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut ari_mismatch, mut sil_mismatch, mut sil_cases) = (0, 0, 0);
    for _ in 0..1000 {
        let n = rng.random_range(1..=12);
        let ka = rng.random_range(1..=5);
        let kb = rng.random_range(1..=5);
        let a: Vec<usize> = (0..n).map(|_| rng.random_range(0..ka)).collect();
        let b: Vec<usize> = (0..n).map(|_| rng.random_range(0..kb)).collect();
        if adjusted_rand_index(&a, &b).unwrap() != brute_force_ari(&a, &b) {
            ari_mismatch += 1;
        }
        let mut distinct = a.clone();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() >= 2 {
            let points = Array2::from_shape_fn((n, 2), |_| rng.random_range(-3.0..3.0));
            sil_cases += 1;
            if silhouette(&points, &a).unwrap() != direct_silhouette(&points, &a) {
                sil_mismatch += 1;
            }
        }
    }
    Verdict::new(
        ari_mismatch == 0 && sil_mismatch == 0,
        format!("1000 ARI labelings ({ari_mismatch} mismatches), {sil_cases} silhouette cases ({sil_mismatch} mismatches)"),
    )
}

fn report(id: usize, name: &str, limit: Duration, run: impl FnOnce() -> Verdict) -> bool {
    let start = Instant::now();
    let verdict = run();
    let elapsed = start.elapsed();
    let pass = verdict.pass && elapsed < limit;
    println!(
        "{} C{id} {name}: {} [{:.2}s, limit {}s]",
        if pass { "PASS" } else { "FAIL" },
        verdict.detail,
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    pass
}

fn main() {
    let secs = Duration::from_secs;
    let mut log = ConstraintLog::default();
    let results = [
        report(1, "spline exactness", secs(5), spline_exactness),
        report(2, "reformulation equivalence", secs(1), reformulation_equivalence),
        report(3, "subproblem optimality", secs(5), subproblem_optimality),
        report(4, "descent behavior", secs(120), || descent(1.0, &mut log)),
        report(5, "planted recovery", secs(120), || planted_recovery(&mut log)),
        report(6, "smooth vs baseline", secs(300), || smooth_vs_baseline(&mut log)),
        report(7, "constraint suite", secs(1), || {
            Verdict::new(
                log.holds(),
                format!(
                    "{} observed iterates in C4-C6, {} with negative entries, worst |v'col - 1| {:.1e}",
                    log.states, log.negative, log.worst_normalization
                ),
            )
        }),
        report(8, "metrics oracles", secs(1), metrics),
    ];
    let start = Instant::now();
    let mut scratch = ConstraintLog::default();
    let heavy = descent(3000.0, &mut scratch);
    println!(
        "INFO C4 setup at the default penalty (not a criterion): {} [{:.2}s]",
        heavy.detail,
        start.elapsed().as_secs_f64()
    );
    let passed = results.iter().filter(|&&p| p).count();
    println!("{passed}/{} acceptance criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
