//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use clap::Parser;
use rand::Rng;
use sha2::{Digest, Sha256};
use viseq_cli::commands::{cmd_analyze, cmd_simulate, cmd_solve};
use viseq_cli::config::{Preset, SolveMethod};
use viseq_cli::{resolve_config, run, Cli, CliConfig};
use viseq_core::behavior::EMPIRICAL_TERMS;
use viseq_core::rng::stream;
use viseq_core::solver::{
    bisection, damped_iteration, grid_scan, robbins_monro, Evaluation, ModelResponseMap, RobbinsMonroConfig,
};
use viseq_core::stats::{
    bootstrap_proportion, ground_truth_prob, logistic, logistic_fit, ols_fit, BootstrapConfig, Design,
    LogisticOptions,
};
use viseq_core::{
    AgentModel, CongestionGame, EmpiricalCoefficients, InformationAccess, Location, PopulationMixture,
    ResponseMap, SignalScheme, VisType,
};

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn empirical() -> PopulationMixture {
    PopulationMixture::single(AgentModel::EmpiricalLogistic(EmpiricalCoefficients::default())).unwrap()
}

fn public_map(pop: PopulationMixture, scheme: SignalScheme) -> ModelResponseMap {
    ModelResponseMap::new(pop, CongestionGame::paper(), scheme, InformationAccess::Public, Evaluation::Expected)
        .unwrap()
}

fn criterion_1() -> Outcome {
    let p = CongestionGame::paper().nash_proportion().unwrap().value();
    check((p - 2.0 / 9.0).abs() <= 1e-12, format!("nash = {p:.15} (2/9 = {:.15})", 2.0 / 9.0))
}

fn criterion_2() -> Outcome {
    let g = CongestionGame::paper();
    let opt = g.welfare_optimum().unwrap();
    let (p, w) = (opt.proportion.value(), opt.welfare);
    let sw_nash = g.social_welfare(2.0 / 9.0);
    let exact = (p - 4.0 / 9.0).abs() <= 1e-9 && (w - 340.0 / 9.0).abs() <= 1e-9 && (sw_nash - 300.0 / 9.0).abs() <= 1e-9;
    let figure = (p - 0.444).abs() < 5e-4 && (w - 37.7).abs() < 0.1 && (sw_nash - 33.3).abs() < 0.05;
    check(exact && figure, format!("optimum ({p:.6}, {w:.6}), SW(2/9) = {sw_nash:.6}; figure markers (0.444, 37.7), (0.222, 33.3)"))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let nash = 2.0 / 9.0;
    let mut points = Vec::new();
    let mut oracle_gap: f64 = 0.0;
    for lambda in [0.0, 0.1, 1.0, 10.0] {
        let pop = PopulationMixture::single(AgentModel::LogitResponder { rationality: lambda }).unwrap();
        let map = public_map(pop, SignalScheme::Continuous { sample_size: 30 });
        let p = bisection(&map, 1e-10, 200).unwrap().p_star;
        let oracle = grid_scan(&map, 1e-5).unwrap().p_star;
        oracle_gap = oracle_gap.max((p - oracle).abs());
        points.push(p);
    }
    let elapsed = start.elapsed().as_secs_f64();
    let dist: Vec<f64> = points.iter().map(|p| (p - nash).abs()).collect();
    let ok = points[0] == 0.5
        && dist.windows(2).all(|w| w[1] < w[0])
        && dist[3] <= 0.005
        && oracle_gap <= 2e-5
        && elapsed < 5.0;
    check(
        ok,
        format!(
            "p* at rationality 0/0.1/1/10 = {:.6}/{:.6}/{:.6}/{:.6}; |p*(10) - 2/9| = {:.5}; grid oracle gap {oracle_gap:.1e}; {elapsed:.2}s",
            points[0], points[1], points[2], points[3], dist[3]
        ),
    )
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut ok = true;
    for vis in VisType::ALL {
        let map = public_map(empirical(), vis.default_scheme());
        let g = grid_scan(&map, 1e-4).unwrap().p_star;
        let b = bisection(&map, 1e-6, 200).unwrap().p_star;
        let d = damped_iteration(&map, 0.5, 1e-9, 10_000, 0.5).unwrap().p_star;
        let spread = [g, b, d].iter().fold(f64::MIN, |m, &x| m.max(x)) - [g, b, d].iter().fold(f64::MAX, |m, &x| m.min(x));
        ok &= spread <= 1e-3;
        lines.push(format!("{}: grid {g:.5} bisection {b:.5} damped {d:.5}", vis.as_str()));
    }
    let map = public_map(empirical(), SignalScheme::BinomialSample { sample_size: 30 });
    let reference = bisection(&map, 1e-9, 200).unwrap().p_star;
    let rm = robbins_monro(&map, RobbinsMonroConfig { iterations: 100_000, seed: 2024, ..Default::default() }).unwrap();
    ok &= (rm.p_star - reference).abs() <= 0.01;
    let elapsed = start.elapsed().as_secs_f64();
    ok &= elapsed < 30.0;
    lines.push(format!("robbins-monro (binomial sample, T=1e5) {:.5} vs {reference:.5}; {elapsed:.2}s", rm.p_star));
    check(ok, lines.join("; "))
}

fn criterion_5() -> Outcome {
    let g = CongestionGame::paper();
    let nash = 2.0 / 9.0;
    let mut ok = true;
    let mut lines = Vec::new();
    for (vis, paper) in [(VisType::Bar, "0.34 [0.32, 0.36]"), (VisType::Hops, "0.35 [0.33, 0.37]")] {
        let map = public_map(empirical(), vis.default_scheme());
        let p = bisection(&map, 1e-9, 200).unwrap().p_star;
        let sw = g.social_welfare(p);
        ok &= p > nash && p < 0.5 && sw > g.social_welfare(nash);
        lines.push(format!("{}: p* = {p:.4}, SW = {sw:.3} (study estimate {paper})", vis.as_str()));
    }
    check(ok, format!("{}; SW(2/9) = {:.3}", lines.join("; "), g.social_welfare(nash)))
}

/// Direct summation with a multiplicatively built binomial coefficient.
fn truth_oracle(chosen: Location, p: f64) -> f64 {
    let n: i32 = 30;
    let mut coef = 1.0f64;
    let mut total = 0.0;
    for k in 0..=n {
        if k > 0 {
            coef = coef * f64::from(n - k + 1) / f64::from(k);
        }
        let q = f64::from(k) / f64::from(n);
        let a_wins = 40.0 - 30.0 * q > 20.0 + 60.0 * q;
        if a_wins == (chosen == Location::A) {
            total += coef * p.powi(k) * (1.0 - p).powi(n - k);
        }
    }
    total
}

fn criterion_6() -> Outcome {
    let g = CongestionGame::paper();
    let mut worst: f64 = 0.0;
    for &s in &viseq_core::experiment::STUDY_SIGNALS {
        for c in [Location::A, Location::B] {
            worst = worst.max((ground_truth_prob(&g, c, s, 30).unwrap() - truth_oracle(c, s)).abs());
        }
    }
    let grid: Vec<f64> = (0..=100).map(|i| ground_truth_prob(&g, Location::B, i as f64 / 100.0, 30).unwrap()).collect();
    let monotone = grid.windows(2).all(|w| w[1] >= w[0]);
    let b2 = ground_truth_prob(&g, Location::B, 0.2, 30).unwrap();
    let b3 = ground_truth_prob(&g, Location::B, 0.3, 30).unwrap();
    check(
        worst <= 1e-12 && monotone,
        format!(
            "max oracle gap {worst:.1e}; monotone on 0.01 grid: {monotone}; P(B) at 0.2 = {b2:.3}, at 0.3 = {b3:.3} (study text says about 0.50 and 0.72; reported, not matched)"
        ),
    )
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let g = CongestionGame::paper();
    let coefs = EmpiricalCoefficients::default();
    let mut rng = stream(77, "acceptance-irls", 0);
    let mut design = Design::new(EMPIRICAL_TERMS);
    let mut y = Vec::with_capacity(100_000);
    for _ in 0..100_000 {
        let p = rng.random_range(0.05..0.6);
        let x = EmpiricalCoefficients::regressors(
            rng.random_bool(0.5),
            rng.random_bool(0.5),
            g.payoff_difference(p).abs(),
            g.payoff_b(p) > g.payoff_a(p),
            rng.random_bool(0.5),
        );
        design.push_row(&x);
        y.push(f64::from(u8::from(rng.random_bool(logistic(coefs.linear_predictor(&x))))));
    }
    let fit = logistic_fit(&design, &y, LogisticOptions::default()).unwrap();
    let irls_gap = fit
        .coefficients
        .iter()
        .zip(coefs.as_array())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let xs: Vec<Vec<f64>> = (0..50).map(|i| vec![1.0, i as f64 / 7.0]).collect();
    let ys: Vec<f64> = xs.iter().map(|r| 2.5 - 1.25 * r[1]).collect();
    let line = ols_fit(&Design::from_rows(["intercept", "x"], &xs), &ys).unwrap();
    let ols_gap = (line.coefficients[0] - 2.5).abs().max((line.coefficients[1] + 1.25).abs());

    let mut covered = 0;
    for rep in 0..500u64 {
        let mut r = stream(7, "acceptance-coverage", rep);
        let sample: Vec<bool> = (0..900).map(|_| r.random_bool(0.3)).collect();
        let cfg = BootstrapConfig { group_size: 900, replications: 2000, coverage: 0.95, seed: rep };
        let est = bootstrap_proportion(&sample, &cfg).unwrap();
        if est.lo <= 0.3 && 0.3 <= est.hi {
            covered += 1;
        }
    }
    let coverage = covered as f64 / 500.0;
    let elapsed = start.elapsed().as_secs_f64();
    check(
        irls_gap <= 0.05 && ols_gap <= 1e-9 && (0.93..=0.97).contains(&coverage) && elapsed < 60.0,
        format!("IRLS max coefficient error {irls_gap:.4}; OLS error {ols_gap:.1e}; bootstrap coverage {coverage:.3}; {elapsed:.2}s"),
    )
}

fn config_with(dir: &Path, seed: u64) -> CliConfig {
    let mut cfg = CliConfig { seed: Some(seed), out_dir: Some(dir.to_path_buf()), ..Default::default() };
    cfg.population.preset = Preset::Empirical;
    cfg
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config_with(dir.path(), 8);
    cfg.experiment.participants = 2000;
    let sim = cmd_simulate(&cfg).unwrap();
    let analysis = cmd_analyze(&cfg, &sim.path).unwrap().analysis;
    cfg.solve.methods = vec![SolveMethod::Bisection];
    let solved: BTreeMap<VisType, f64> =
        cmd_solve(&cfg).unwrap().entries.iter().map(|e| (e.vis_type, e.result.p_star)).collect();
    let eq3 = analysis.eq3.as_ref().expect("public cells present");
    let slope = eq3.coef("visualized_proportion").unwrap();
    let mut ok = slope < 0.0;
    let mut lines = vec![format!("eq3 slope {slope:.3}")];
    for (vis, est) in &analysis.equilibria {
        let gap = (est.p - solved[vis]).abs();
        ok &= gap <= 0.03;
        lines.push(format!("{}: estimated {:.4} vs solved {:.4} (gap {gap:.4})", vis.as_str(), est.p, solved[vis]));
    }
    ok &= analysis.equilibria.len() == 2;

    // Same linear fit on the population response at the nine signals, with no sampling noise.
    for vis in VisType::ALL {
        let map = public_map(empirical(), vis.default_scheme());
        let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
        for &s in &viseq_core::experiment::STUDY_SIGNALS {
            let r = map.evaluate(s).unwrap().0;
            sx += s;
            sy += r;
            sxx += s * s;
            sxy += s * r;
        }
        let n = 9.0;
        let b = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let a = (sy - b * sx) / n;
        lines.push(format!("{} noiseless linear fixed point {:.4}", vis.as_str(), a / (1.0 - b)));
    }
    let elapsed = start.elapsed().as_secs_f64();
    ok &= elapsed < 120.0;
    lines.push(format!("{elapsed:.2}s"));
    check(ok, lines.join("; "))
}

fn digest(path: &Path) -> String {
    Sha256::digest(fs::read(path).unwrap()).iter().map(|b| format!("{b:02x}")).collect()
}

fn run_pipeline(dir: &Path, threads: usize) -> Vec<String> {
    let base = ["viseq", "--seed", "99", "--threads", &threads.to_string(), "--out-dir", dir.to_str().unwrap()];
    let sim = Cli::parse_from(base.iter().copied().chain(["simulate", "--participants", "400"]));
    run(&sim).unwrap();
    let csv = dir.join("experiment.csv");
    let ana = Cli::parse_from(base.iter().copied().chain(["analyze", csv.to_str().unwrap()]));
    assert_eq!(resolve_config(&ana).unwrap().threads, Some(threads));
    run(&ana).unwrap();
    ["experiment.csv", "cells.csv", "coefficients.csv", "analysis.json"].iter().map(|f| digest(&dir.join(f))).collect()
}

fn criterion_9() -> Outcome {
    let runs: Vec<Vec<String>> = [1, 1, 4, 4]
        .iter()
        .map(|&t| {
            let d = tempfile::tempdir().unwrap();
            run_pipeline(d.path(), t)
        })
        .collect();
    let ok = runs.windows(2).all(|w| w[0] == w[1]);
    check(ok, format!("4 artifacts identical over 2 runs at 1 and 4 threads; experiment.csv sha256 {}", &runs[0][0][..16]))
}

fn main() {
    let criteria: [Criterion; 9] = [
        (1, "Nash reproduction", criterion_1),
        (2, "welfare reproduction", criterion_2),
        (3, "rationality limit", criterion_3),
        (4, "solver agreement", criterion_4),
        (5, "equilibrium placement", criterion_5),
        (6, "ground-truth probability", criterion_6),
        (7, "statistics recovery", criterion_7),
        (8, "end-to-end closure", criterion_8),
        (9, "determinism", criterion_9),
    ];
    let mut failed = Vec::new();
    for (id, name, f) in criteria {
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {id} ({name}): {detail}"),
            Err(detail) => {
                println!("FAIL criterion {id} ({name}): {detail}");
                failed.push(id);
            }
        }
    }
    if !failed.is_empty() {
        println!("{} of 9 criteria failed: {failed:?}", failed.len());
        std::process::exit(1);
    }
}
