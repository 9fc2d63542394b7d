use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use viseq_core::experiment::{
    analyze, export_plot_data, ingest_csv, simulate_experiment, write_records_csv, Analysis, AnalysisConfig,
    IngestOptions, STUDY_SIGNALS,
};
use viseq_core::solver::{
    bisection, damped_iteration, equilibrium_report, grid_scan, robbins_monro, Evaluation, ModelResponseMap,
    RobbinsMonroConfig,
};
use viseq_core::stats::ground_truth_prob;
use viseq_core::{
    EquilibriumReport, EquilibriumResult, InformationAccess, Location, MonteCarloConfig, VisType, WelfarePoint,
};

use crate::config::{EvaluationMode, SolveMethod};
use crate::{CliConfig, CliError};

pub const FIXED_EFFECTS_CAVEAT: &str = "note: the choice (eq4) and error (eq5) models are fitted with fixed effects only; \
per-participant random intercepts are not estimated";

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| CliError::Io(e.to_string()))?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub p: f64,
    pub welfare: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameReport {
    pub nash: f64,
    pub welfare_nash: f64,
    pub optimum: WelfarePoint,
    pub curve: Vec<CurvePoint>,
    #[serde(skip)]
    pub path: PathBuf,
}

pub fn cmd_game(cfg: &CliConfig) -> Result<GameReport, CliError> {
    let game = cfg.game.build()?;
    let optimum = game.welfare_optimum().map_err(|e| CliError::Config(format!("game: {e}")))?;
    let nash = game.nash_proportion().map_err(|e| CliError::Config(format!("game: {e}")))?.value();
    let curve = (0..=100)
        .map(|i| {
            let p = i as f64 / 100.0;
            CurvePoint { p, welfare: game.social_welfare(p) }
        })
        .collect();
    let report = GameReport {
        nash,
        welfare_nash: game.social_welfare(nash),
        optimum,
        curve,
        path: cfg.out_dir().join("game.json"),
    };
    write_json(&report.path, &report)?;
    Ok(report)
}

pub fn render_game(r: &GameReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<16}{:>10}{:>10}", "", "p", "welfare");
    let _ = writeln!(s, "{:<16}{:>10.4}{:>10.2}", "nash", r.nash, r.welfare_nash);
    let _ = writeln!(s, "{:<16}{:>10.4}{:>10.2}", "optimum", r.optimum.proportion.value(), r.optimum.welfare);
    let _ = writeln!(s, "welfare curve: {} points on a 0.01 grid", r.curve.len());
    let _ = writeln!(s, "wrote {}", r.path.display());
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveEntry {
    pub vis_type: VisType,
    pub access: InformationAccess,
    pub result: EquilibriumResult,
    pub report: EquilibriumReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub entries: Vec<SolveEntry>,
    #[serde(skip)]
    pub path: PathBuf,
}

/// Builds the response map the solver sees for one visualization.
pub fn response_map(cfg: &CliConfig, vis: VisType) -> Result<ModelResponseMap, CliError> {
    let s = &cfg.solve;
    let evaluation = match s.evaluation {
        EvaluationMode::Expected => Evaluation::Expected,
        EvaluationMode::MonteCarlo => {
            if s.mc_draws == 0 {
                return Err(CliError::Config("solve.mc_draws must be >= 1".into()));
            }
            Evaluation::MonteCarlo(MonteCarloConfig { draws: s.mc_draws, seed: cfg.require_seed("solve")? })
        }
    };
    let plan = cfg.population.plan()?;
    Ok(ModelResponseMap::new(
        plan.get(s.access, vis).clone(),
        cfg.game.build()?,
        cfg.schemes.get(vis),
        s.access,
        evaluation,
    )?)
}

pub fn cmd_solve(cfg: &CliConfig) -> Result<SolveReport, CliError> {
    let s = &cfg.solve;
    if s.methods.is_empty() || s.vis.is_empty() {
        return Err(CliError::Config("solve.methods and solve.vis must not be empty".into()));
    }
    let game = cfg.game.build()?;
    let mut entries = Vec::new();
    for &vis in &s.vis {
        let map = response_map(cfg, vis)?;
        for &method in &s.methods {
            let (result, tolerance) = match method {
                SolveMethod::Grid => (grid_scan(&map, s.resolution)?, s.residual_tolerance),
                SolveMethod::Bisection => (bisection(&map, s.tol, s.max_iter)?, s.residual_tolerance),
                SolveMethod::Damped => (damped_iteration(&map, s.damping, s.tol, s.max_iter, s.p0)?, s.residual_tolerance),
                SolveMethod::RobbinsMonro => {
                    let rm = RobbinsMonroConfig {
                        a0: s.robbins_monro.a0,
                        t0: s.robbins_monro.t0,
                        iterations: s.robbins_monro.iterations,
                        seed: cfg.require_seed("solve --method robbins_monro")?,
                        p0: s.p0,
                    };
                    (robbins_monro(&map, rm)?, s.stochastic_residual_tolerance)
                }
            };
            if result.residual.is_nan() || result.residual > tolerance {
                return Err(CliError::NonConvergence(format!(
                    "{} on {}: residual |S(p*) - p*| = {:.3e} at p* = {:.6} exceeds {tolerance:.1e}",
                    result.method.as_str(),
                    vis.as_str(),
                    result.residual,
                    result.p_star
                )));
            }
            let report = equilibrium_report(&game, result.p_star)?;
            entries.push(SolveEntry { vis_type: vis, access: s.access, result, report });
        }
    }
    let report = SolveReport { entries, path: cfg.out_dir().join("solve.json") };
    write_json(&report.path, &report)?;
    Ok(report)
}

pub fn render_solve(r: &SolveReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<6}{:<9}{:<18}{:>10}{:>11}{:>10}{:>10}",
        "vis", "access", "method", "p*", "residual", "SW(p*)", "vs nash"
    );
    for e in &r.entries {
        let _ = writeln!(
            s,
            "{:<6}{:<9}{:<18}{:>10.6}{:>11.2e}{:>10.3}{:>+10.3}",
            e.vis_type.as_str(),
            e.access.as_str(),
            e.result.method.as_str(),
            e.result.p_star,
            e.result.residual,
            e.report.welfare_star,
            e.report.welfare_gain_over_nash
        );
    }
    if let Some(e) = r.entries.first() {
        let _ = writeln!(
            s,
            "nash {:.4} (SW {:.2}), optimum {:.4} (SW {:.2})",
            e.report.p_nash, e.report.welfare_nash, e.report.p_opt, e.report.welfare_opt
        );
    }
    let _ = writeln!(s, "wrote {}", r.path.display());
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateReport {
    pub rows: usize,
    pub participants: u32,
    pub path: PathBuf,
}

pub fn cmd_simulate(cfg: &CliConfig) -> Result<SimulateReport, CliError> {
    let seed = cfg.require_seed("simulate")?;
    let exp = cfg.experiment_config(seed);
    let records = simulate_experiment(&exp, &cfg.simulation_setup()?)?;
    let dir = cfg.out_dir();
    fs::create_dir_all(&dir)?;
    let path = dir.join("experiment.csv");
    write_records_csv(&path, &records)?;
    Ok(SimulateReport { rows: records.len(), participants: exp.participants, path })
}

pub fn render_simulate(r: &SimulateReport) -> String {
    format!("simulated {} participants, {} trials\nwrote {}\n", r.participants, r.rows, r.path.display())
}

#[derive(Debug, Clone)]
pub struct AnalyzeReport {
    pub analysis: Analysis,
    pub files: Vec<PathBuf>,
}

fn export(analysis: Analysis, dir: &Path) -> Result<AnalyzeReport, CliError> {
    let paths = export_plot_data(&analysis, dir)?;
    Ok(AnalyzeReport { analysis, files: vec![paths.cells, paths.coefficients, paths.bundle] })
}

pub fn cmd_analyze(cfg: &CliConfig, dataset: &Path) -> Result<AnalyzeReport, CliError> {
    let seed = cfg.require_seed("analyze")?;
    let records =
        ingest_csv(dataset, IngestOptions { require_passed_checks: cfg.analysis.require_passed_checks })?;
    let acfg = AnalysisConfig {
        bootstrap: cfg.bootstrap_config(seed),
        equilibrium_replications: cfg.analysis.equilibrium_replications,
        game: cfg.game.build()?,
    };
    let analysis = analyze(&records, &acfg)?;
    if analysis.equilibria.is_empty() {
        log::warn!("dataset has no public trials with a signal; equilibrium estimates are omitted");
    }
    export(analysis, &cfg.out_dir())
}

pub fn cmd_export_plots(cfg: &CliConfig, bundle: &Path) -> Result<AnalyzeReport, CliError> {
    let text = fs::read(bundle).map_err(|e| CliError::Io(format!("cannot read {}: {e}", bundle.display())))?;
    let analysis: Analysis =
        serde_json::from_slice(&text).map_err(|e| CliError::Config(format!("{}: {e}", bundle.display())))?;
    export(analysis, &cfg.out_dir())
}

pub fn render_analysis(r: &AnalyzeReport) -> String {
    let a = &r.analysis;
    let mut s = String::new();
    let _ = writeln!(s, "{:<6}{:<9}{:>8}{:>10}{:>18}{:>7}", "vis", "access", "signal", "prop A", "interval", "n");
    for c in &a.cells {
        let signal = c.signal_prop.map(|p| format!("{p:.2}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            s,
            "{:<6}{:<9}{:>8}{:>10.3}{:>18}{:>7}",
            c.vis_type.as_str(),
            c.access.as_str(),
            signal,
            c.proportion_a,
            format!("[{:.3}, {:.3}]", c.ci_lo, c.ci_hi),
            c.n
        );
    }
    let fits = [("eq3", a.eq3.as_ref()), ("eq4", Some(&a.eq4)), ("eq5", Some(&a.eq5))];
    for (name, fit) in fits {
        let Some(fit) = fit else {
            let _ = writeln!(s, "{name}: not fitted (no public trials)");
            continue;
        };
        let _ = writeln!(s, "{name} (n = {}):", fit.n);
        for (i, term) in fit.names.iter().enumerate() {
            let _ = writeln!(s, "  {term:<22}{:>10.4}  (se {:.4})", fit.coefficients[i], fit.standard_errors[i]);
        }
    }
    for (vis, eq) in &a.equilibria {
        let ci = match (eq.lo, eq.hi) {
            (Some(lo), Some(hi)) => format!(" [{lo:.3}, {hi:.3}]"),
            _ => String::new(),
        };
        let _ = writeln!(s, "visualization equilibrium ({}): {:.4}{ci}", vis.as_str(), eq.p);
    }
    let _ = writeln!(s, "{FIXED_EFFECTS_CAVEAT}");
    for f in &r.files {
        let _ = writeln!(s, "wrote {}", f.display());
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub signal: f64,
    pub choice: Location,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthReport {
    pub sample_size: u64,
    pub rows: Vec<TruthRow>,
    #[serde(skip)]
    pub path: PathBuf,
}

pub const TRUTH_SAMPLE_SIZE: u64 = 30;

pub fn cmd_truth(cfg: &CliConfig) -> Result<TruthReport, CliError> {
    let game = cfg.game.build()?;
    let mut rows = Vec::new();
    for &signal in &STUDY_SIGNALS {
        for choice in [Location::A, Location::B] {
            let probability = ground_truth_prob(&game, choice, signal, TRUTH_SAMPLE_SIZE)
                .map_err(|e| CliError::Config(e.to_string()))?;
            rows.push(TruthRow { signal, choice, probability });
        }
    }
    let report = TruthReport { sample_size: TRUTH_SAMPLE_SIZE, rows, path: cfg.out_dir().join("truth.json") };
    write_json(&report.path, &report)?;
    Ok(report)
}

pub fn render_truth(r: &TruthReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:>8}{:>12}{:>12}", "signal", "P(A wins)", "P(B wins)");
    for pair in r.rows.chunks(2) {
        let _ = writeln!(s, "{:>8.2}{:>12.4}{:>12.4}", pair[0].signal, pair[0].probability, pair[1].probability);
    }
    let _ = writeln!(s, "wrote {}", r.path.display());
    s
}
