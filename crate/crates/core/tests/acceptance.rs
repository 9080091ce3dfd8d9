//! One test per acceptance criterion. Each prints a single
//! `criterion N ...: PASS|FAIL` line on stderr (visible without
//! `--nocapture`).
//!
//! Criteria 1 and 2 do not currently hold and fail here (see README).

mod common;

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use common::*;
use otreweight::distributions::MAX_SKEW_NORMAL_SKEWNESS;
use otreweight::fairness::{fit_in_model, fit_two_step, fit_unconstrained, synth_fair_data, FairConfig, FairSynthConfig};
use otreweight::portfolio::{
    entropy_w2_portfolio, mv_weights, sweep_lambda, synth_returns, target_from_mv, PortfolioConfig, ReturnMatrix,
    ReturnSynthConfig,
};
use otreweight::survey::simulation::{run_simulation, Method, SimulationReport, SummaryRow};
use otreweight::survey::{etel, BdcmConfig, EstimatingFunction, MeatEstimator, SimulationConfig};
use otreweight::{
    grad_w2sq_weights, skew_normal_from_moments, solve_dual, solve_primal, w2sq_discrete_continuous,
    w2sq_discrete_discrete, Error, ParametricFamily, QuadratureConfig, SolverConfig, TargetMoments, WeightedSample,
};
use rand::Rng;

fn verdict(id: u32, name: &str, pass: bool, detail: &str) {
    let word = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {id} ({name}): {word}; {detail}");
}

// ---- survey table (criteria 1 and 2)

const SURVEY_SEED: u64 = 20_240_501;

fn table_cell(rho: f64, methods: &[Method]) -> SimulationReport {
    let cfg = SimulationConfig {
        sample_size: 500,
        population_size: 100_000,
        rho,
        replicates: 100,
        bootstrap: 50,
        seed: SURVEY_SEED,
        ..SimulationConfig::default()
    };
    run_simulation(&cfg, methods, &BdcmConfig::default(), MeatEstimator::default()).unwrap()
}

/// ρ = 0.5 with all three methods; shared by both criteria.
fn middle_cell() -> &'static SimulationReport {
    static CELL: OnceLock<SimulationReport> = OnceLock::new();
    CELL.get_or_init(|| table_cell(0.5, &Method::ALL))
}

fn row(report: &SimulationReport, m: Method) -> &SummaryRow {
    report.summary.iter().find(|r| r.method == m).unwrap()
}

fn criterion_1() -> (bool, String) {
    let rep = middle_cell();
    let (mle, pmle, bdcm) = (row(rep, Method::Mle), row(rep, Method::Pmle), row(rep, Method::Bdcm));
    let checks = [
        (mle.bias - 0.68).abs() <= 0.10,
        mle.coverage <= 0.60,
        (pmle.bias - 0.16).abs() <= 0.05,
        (pmle.coverage - 0.91).abs() <= 0.07,
        (bdcm.bias - 0.16).abs() <= 0.05,
        bdcm.coverage >= 0.88,
    ];
    let detail = format!(
        "MLE {:.3} ({:.2}), PMLE {:.3} ({:.2}), BDCM {:.3} ({:.2}); failures {}/{}/{}",
        mle.bias,
        mle.coverage,
        pmle.bias,
        pmle.coverage,
        bdcm.bias,
        bdcm.coverage,
        mle.failures,
        pmle.failures,
        bdcm.failures
    );
    (checks.iter().all(|&c| c), detail)
}

fn criterion_2() -> (bool, String) {
    let low = table_cell(0.1, &[Method::Mle, Method::Pmle]);
    let high = table_cell(0.8, &[Method::Mle, Method::Pmle]);
    let cells = [&low, middle_cell(), &high];
    let mle: Vec<f64> = cells.iter().map(|c| row(c, Method::Mle).bias).collect();
    let pmle: Vec<f64> = cells.iter().map(|c| row(c, Method::Pmle).bias).collect();
    let increasing = mle[0] < mle[1] && mle[1] < mle[2];
    let near = mle.iter().zip([0.19, 0.68, 1.11]).all(|(b, want)| (b - want).abs() <= 0.10);
    let centre = pmle.iter().sum::<f64>() / 3.0;
    let flat = pmle.iter().all(|b| (b - centre).abs() <= 0.05);
    let detail = format!(
        "MLE {:.3} / {:.3} / {:.3}, PMLE {:.3} / {:.3} / {:.3} at rho 0.1 / 0.5 / 0.8",
        mle[0], mle[1], mle[2], pmle[0], pmle[1], pmle[2]
    );
    (increasing && near && flat, detail)
}

#[test]
fn criterion_1_survey_table_cell() {
    let (pass, detail) = criterion_1();
    verdict(1, "survey table cell n=500 rho=0.5", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_2_survey_bias_trend() {
    let (pass, detail) = criterion_2();
    verdict(2, "MLE bias trend, PMLE flat", pass, &detail);
    assert!(pass, "{detail}");
}

// ---- fairness (criterion 3)

#[test]
fn criterion_3_fairness_ordering() {
    let start = Instant::now();
    let data = synth_fair_data(&FairSynthConfig::default()).unwrap();
    let cfg = FairConfig::default();
    let unc = fit_unconstrained(&data).unwrap().w2();
    let two = fit_two_step(&data, 0.0, &cfg).unwrap().w2();
    let inm = fit_in_model(&data, 0.0, &cfg).unwrap().w2();
    let took = start.elapsed();
    let pass = unc > 10.0 * two && 10.0 * two > inm && inm <= two && took <= Duration::from_secs(120);
    verdict(
        3,
        "fairness W2 ordering at lambda*=0",
        pass,
        &format!("unconstrained {unc:.3}, two-step {two:.3}, in-model {inm:.3}, {took:.1?}"),
    );
    assert!(pass);
}

// ---- portfolio (criterion 4)

#[test]
fn criterion_4_portfolio() {
    let start = Instant::now();
    let r = synth_returns(&ReturnSynthConfig::default()).unwrap();
    let zeros = mv_weights(&r, 1.0).unwrap().portfolio.stats.zero_count;
    let (target, _) = target_from_mv(&r, 1.0, false).unwrap();
    let grid: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    let sweep = sweep_lambda(&r, &target, &grid, &PortfolioConfig::default()).unwrap();
    let took = start.elapsed();
    let entropy: Vec<f64> = sweep.iter().map(|p| p.portfolio.entropy).collect();
    let w2sq: Vec<f64> = sweep.iter().map(|p| p.w2sq).collect();
    let last = entropy[entropy.len() - 1];
    let monotone = |v: &[f64]| v.windows(2).all(|p| p[1] >= p[0]);
    let pass = (2..=4).contains(&zeros)
        && (last - 5f64.ln()).abs() <= 1e-12
        && monotone(&entropy)
        && monotone(&w2sq)
        && took <= Duration::from_secs(300);
    verdict(
        4,
        "portfolio MV zeros and lambda* sweep",
        pass,
        &format!(
            "{zeros} zero weights, entropy at 1 = {last:.15} (log 5 = {:.15}), entropy monotone {}, W2² monotone {}, {took:.1?}",
            5f64.ln(),
            monotone(&entropy),
            monotone(&w2sq)
        ),
    );
    assert!(pass);
}

// ---- transport oracle (criterion 5)

#[test]
fn criterion_5_transport_oracle() {
    let mut r = rng(5);
    let cells = 10 * QuadratureConfig::default().nodes;
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let m = r.random_range(1..=30);
        let (center, spread) = (r.random_range(-2.0..2.0), r.random_range(0.3..2.5));
        let atoms = normals(&mut r, m, center, spread);
        let weights = dirichlet(&mut r, m);
        let target = random_target(&mut r, case % 2 == 1);
        let exact = w2sq_discrete_continuous(&WeightedSample::new(atoms.clone(), weights.clone()).unwrap(), &target);
        let oracle = midpoint_w2sq(&atoms, &weights, &target, cells);
        worst = worst.max((exact - oracle).abs() / oracle);
    }
    let mut worst_discrete: f64 = 0.0;
    for _ in 0..20 {
        let (ma, mb) = (r.random_range(1..=7), r.random_range(1..=7));
        let a: Vec<f64> = (0..ma).map(|_| r.random_range(-6..=6) as f64 / 2.0).collect();
        let b: Vec<f64> = (0..mb).map(|_| r.random_range(-6..=6) as f64 / 2.0).collect();
        let wa = eighths(&mut r, ma);
        let wb = eighths(&mut r, mb);
        let got = w2sq_discrete_discrete(
            &WeightedSample::new(a.clone(), wa.clone()).unwrap(),
            &WeightedSample::new(b.clone(), wb.clone()).unwrap(),
        );
        let want = piecewise_w2sq((&a, &wa), (&b, &wb));
        worst_discrete = worst_discrete.max((got - want).abs());
    }
    // dyadic weights and half-integer atoms: every term is exact in binary
    let pass = worst <= 1e-4 && worst_discrete == 0.0;
    verdict(
        5,
        "transport oracle",
        pass,
        &format!("worst relative gap {worst:.2e} over 100 cases, worst discrete gap {worst_discrete:e} over 20"),
    );
    assert!(pass);
}

/// Weights in multiples of 1/8, all positive.
fn eighths(r: &mut impl Rng, m: usize) -> Vec<f64> {
    let mut units = vec![1u32; m];
    for _ in m..8 {
        units[r.random_range(0..m)] += 1;
    }
    units.iter().map(|&u| u as f64 / 8.0).collect()
}

// ---- gradient (criterion 6)

#[test]
fn criterion_6_gradient() {
    let mut r = rng(6);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for case in 0..50 {
        let m = r.random_range(2..=12);
        let atoms = normals(&mut r, m, 0.0, 1.5);
        let w = dirichlet(&mut r, m);
        let target = random_target(&mut r, case % 2 == 0);
        let s = WeightedSample::new(atoms.clone(), w.clone()).unwrap();
        let g = grad_w2sq_weights(&s, &target).unwrap();
        let f = |v: &[f64]| w2sq_discrete_continuous(&WeightedSample::new(atoms.clone(), v.to_vec()).unwrap(), &target);
        // tangent directions e_j − e_k; the error is measured against the
        // largest directional derivative of the case
        let mut errs = Vec::new();
        let mut scale: f64 = 0.0;
        for j in 0..m {
            for k in 0..m {
                if j == k {
                    continue;
                }
                let (mut up, mut dn) = (w.clone(), w.clone());
                up[j] += h;
                up[k] -= h;
                dn[j] -= h;
                dn[k] += h;
                let fd = (f(&up) - f(&dn)) / (2.0 * h);
                let an = g[j] - g[k];
                scale = scale.max(an.abs());
                errs.push((fd - an).abs());
            }
        }
        worst = worst.max(errs.iter().fold(0.0f64, |a, &b| a.max(b)) / scale);
    }
    let pass = worst <= 1e-5;
    verdict(6, "gradient vs finite differences", pass, &format!("worst relative error {worst:.2e} over 50 points"));
    assert!(pass);
}

// ---- solver optimality (criterion 7)

/// `W2²` at every point `(i, j, 1000 − i − j)/1000` of the simplex grid, by
/// the partial-mean formula: every cumulative weight is a multiple of 1/1000.
fn grid_w2sq(atoms: &[f64], target: &ParametricFamily) -> Vec<([f64; 3], f64)> {
    const K: usize = 1000;
    let (g, second) = partial_means(target, K, 400_000);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| atoms[a].total_cmp(&atoms[b]));
    let mut out = Vec::with_capacity((K + 1) * (K + 2) / 2);
    for i in 0..=K {
        for j in 0..=K - i {
            let units = [i, j, K - i - j];
            let w = units.map(|u| u as f64 / K as f64);
            let mut cum = 0;
            let mut cross = 0.0;
            let mut sq = 0.0;
            for &a in &order {
                let next = cum + units[a];
                cross += atoms[a] * (g[next] - g[cum]);
                sq += w[a] * atoms[a] * atoms[a];
                cum = next;
            }
            out.push((w, second + sq - 2.0 * cross));
        }
    }
    out
}

#[test]
fn criterion_7_solver_optimality() {
    let mut r = rng(7);
    let cfg = SolverConfig::default();
    let mut worst_dual: f64 = 0.0;
    let mut worst_primal: f64 = 0.0;
    for case in 0..20 {
        let atoms = normals(&mut r, 3, 0.0, 1.5);
        let target = random_target(&mut r, case % 2 == 1);
        let lambda = r.random_range(0.1..5.0);
        let values: Vec<(f64, f64)> = grid_w2sq(&atoms, &target).iter().map(|(w, d)| (entropy(w), *d)).collect();

        let dual = solve_dual(&atoms, &target, lambda, &cfg).unwrap();
        let best = values.iter().map(|(h, d)| h - lambda * d).fold(f64::NEG_INFINITY, f64::max);
        worst_dual = worst_dual.max((dual.objective - best).abs());

        let lo = values.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
        let uniform = w2sq_discrete_continuous(&WeightedSample::uniform(atoms.clone()).unwrap(), &target);
        let eps = lo + r.random_range(0.2..0.8) * (uniform - lo);
        let primal = solve_primal(&atoms, &target, eps, &cfg).unwrap();
        let best = values.iter().filter(|v| v.1 <= eps).map(|v| v.0).fold(f64::NEG_INFINITY, f64::max);
        let feasible = primal.w2sq <= eps + 1e-6 * eps.max(1.0);
        worst_primal = worst_primal.max(if feasible { (primal.entropy - best).abs() } else { f64::INFINITY });
    }

    // d = 2 portfolio on a 1-D grid of step 1e-5
    let full = synth_returns(&ReturnSynthConfig::default()).unwrap();
    let two = ReturnMatrix::unlabeled(full.rows().iter().map(|row| vec![row[0], row[2]]).collect()).unwrap();
    let (target, _) = target_from_mv(&two, 1.0, false).unwrap();
    let (g, second) = partial_means(&target, two.periods(), 400_000);
    let mut worst_portfolio: f64 = 0.0;
    for lambda_star in [0.0, 0.3, 0.7] {
        let fit = entropy_w2_portfolio(&two, &target, lambda_star, &PortfolioConfig::default()).unwrap();
        let objective = |a: f64| {
            let w = [a, 1.0 - a];
            let mut x = two.portfolio_returns(&w);
            x.sort_by(f64::total_cmp);
            let t = x.len() as f64;
            let d = second
                + x.iter().enumerate().map(|(i, v)| v * v / t - 2.0 * v * (g[i + 1] - g[i])).sum::<f64>();
            (1.0 - lambda_star) * d - lambda_star * entropy(&w) / 2f64.ln()
        };
        let best = (0..=100_000).map(|k| objective(k as f64 * 1e-5)).fold(f64::INFINITY, f64::min);
        worst_portfolio = worst_portfolio.max((fit.objective - best).abs());
    }

    let pass = worst_dual <= 1e-3 && worst_primal <= 1e-3 && worst_portfolio <= 1e-5;
    verdict(
        7,
        "solver optimality vs grid oracles",
        pass,
        &format!("dual {worst_dual:.2e}, primal {worst_primal:.2e}, portfolio d=2 {worst_portfolio:.2e}"),
    );
    assert!(pass);
}

// ---- ETEL (criterion 8)

#[test]
fn criterion_8_etel() {
    let mut r = rng(8);
    let g = EstimatingFunction::MeanVariance;
    let mut worst_display: f64 = 0.0;
    let mut worst_moment: f64 = 0.0;
    for _ in 0..30 {
        let n = r.random_range(5..40);
        let xs: Vec<Vec<f64>> = normals(&mut r, n, 0.0, 1.0).into_iter().map(|v| vec![v]).collect();
        let pi: Vec<f64> = (0..n).map(|_| r.random_range(0.5..3.0)).collect();
        let theta = [r.random_range(-0.3..0.3), r.random_range(0.6..1.4)];
        let res = etel(&theta, &xs, &pi, &g).unwrap();
        let Some(w) = res.weights else { continue };
        let mut out = [0.0; 2];
        let mut tilt = Vec::with_capacity(n);
        let mut moment = [0.0; 2];
        for i in 0..n {
            g.eval(&xs[i], &theta, &mut out);
            tilt.push((pi[i] * (res.eta[0] * out[0] + res.eta[1] * out[1])).exp());
            moment[0] += w[i] * pi[i] * out[0];
            moment[1] += w[i] * pi[i] * out[1];
        }
        let z: f64 = tilt.iter().sum();
        for i in 0..n {
            worst_display = worst_display.max((w[i] - tilt[i] / z).abs());
        }
        worst_moment = worst_moment.max(moment[0].abs().max(moment[1].abs()));
    }
    // every g_i on one side of the origin
    let hull = etel(&[-1.0], &[vec![0.5], vec![1.0], vec![2.0]], &[1.0; 3], &EstimatingFunction::MeanDeviation)
        .unwrap();
    let two = etel(&[0.3], &[vec![0.0], vec![1.0]], &[1.0, 1.0], &EstimatingFunction::MeanDeviation).unwrap();
    let w = two.weights.clone().unwrap_or_default();
    let analytic = w.len() == 2 && (w[0] - 0.7).abs() <= 1e-6 && (w[1] - 0.3).abs() <= 1e-6;
    let pass = worst_display <= 1e-6 && worst_moment <= 1e-6 && hull.loglik == f64::NEG_INFINITY && analytic;
    verdict(
        8,
        "ETEL weights",
        pass,
        &format!(
            "display {worst_display:.1e}, moment {worst_moment:.1e}, hull loglik {}, n=2 weights {w:?}",
            hull.loglik
        ),
    );
    assert!(pass);
}

// ---- distributions (criterion 9)

#[test]
fn criterion_9_distributions() {
    let mut worst_trip: f64 = 0.0;
    for (mean, variance, skewness) in [(1.0, 4.0, 0.5), (0.0, 1.0, -0.9), (-3.0, 0.25, 0.99), (2.0, 9.0, 0.0), (0.5, 2.0, -0.3)] {
        let fam = skew_normal_from_moments(&TargetMoments { mean, variance, skewness }).unwrap();
        let m = fam.moments();
        worst_trip = worst_trip.max((m.mean - mean).abs()).max((m.variance - variance).abs()).max((m.skewness - skewness).abs());
    }
    let mut worst_normal: f64 = 0.0;
    let sn = ParametricFamily::skew_normal(0.7, 1.3, 0.0).unwrap();
    let n = ParametricFamily::normal(0.7, 1.69).unwrap();
    for k in 1..200 {
        let x = -5.0 + k as f64 * 0.06;
        let q = k as f64 / 200.0;
        worst_normal = worst_normal
            .max((sn.pdf(x) - n.pdf(x)).abs())
            .max((sn.cdf(x) - n.cdf(x)).abs())
            .max((sn.quantile(q).unwrap() - n.quantile(q).unwrap()).abs());
    }
    let bound_ok = (MAX_SKEW_NORMAL_SKEWNESS - 0.99527).abs() < 5e-6
        && [MAX_SKEW_NORMAL_SKEWNESS, -MAX_SKEW_NORMAL_SKEWNESS, 0.99528, 1.2, -0.996].iter().all(|&s| {
            matches!(
                skew_normal_from_moments(&TargetMoments { mean: 0.0, variance: 1.0, skewness: s }),
                Err(Error::InfeasibleSkewness { .. })
            )
        })
        && skew_normal_from_moments(&TargetMoments { mean: 0.0, variance: 1.0, skewness: -0.99527 }).is_ok();
    let pass = worst_trip <= 1e-8 && worst_normal <= 1e-12 && bound_ok;
    verdict(
        9,
        "skew-normal moments",
        pass,
        &format!("round trip {worst_trip:.1e}, alpha=0 gap {worst_normal:.1e}, bound enforced {bound_ok}"),
    );
    assert!(pass);
}

// ---- determinism (criterion 10)

fn run_cli(dir: &Path, command: &str, config: &str, jobs: usize) -> Vec<(String, Vec<u8>)> {
    let cfg = dir.join(format!("{command}.json"));
    std::fs::write(&cfg, config).unwrap();
    let out = dir.join(format!("{command}-{jobs}"));
    let status = Command::new(env!("CARGO_BIN_EXE_otreweight"))
        .arg(command)
        .arg("--config")
        .arg(&cfg)
        .arg("--seed")
        .arg("11")
        .arg("--out")
        .arg(&out)
        .arg("--jobs")
        .arg(jobs.to_string())
        .output()
        .unwrap();
    assert!(status.status.success(), "{command}: {}", String::from_utf8_lossy(&status.stderr));
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn criterion_10_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let runs = [
        ("reweight", r#"{"reweight": {"atoms": [0.1, -1.2, 0.7, 2.3, 1.1], "target": {"family": "normal", "mean": 0.5, "variance": 1.0}, "lambda": 3.0}}"#),
        ("fairness", r#"{"fairness": {"synth": {"n_s": 60, "n_t": 50}, "lambda_grid": [0.0, 0.25, 0.5, 0.75, 1.0]}}"#),
        ("portfolio", r#"{"portfolio": {"synth": {"periods": 120}, "mv_grid": [0.0, 1.0, 2.5, 5.0], "lambda_star_grid": [0.0, 0.25, 0.5, 0.75, 1.0]}}"#),
        ("survey", r#"{"survey": {"cells": [{"n": 120, "rho": 0.5}], "simulation": {"population_size": 4000, "replicates": 6, "bootstrap": 4}}}"#),
    ];
    let mut mismatched = Vec::new();
    let mut files = 0;
    for (command, config) in runs {
        let one = run_cli(dir.path(), command, config, 1);
        let three = run_cli(dir.path(), command, config, 3);
        files += one.len();
        if one != three {
            mismatched.push(command);
        }
    }
    let pass = mismatched.is_empty();
    verdict(
        10,
        "byte-identical outputs across --jobs",
        pass,
        &format!("{files} files over 4 subcommands, mismatched: {mismatched:?}"),
    );
    assert!(pass);
}
