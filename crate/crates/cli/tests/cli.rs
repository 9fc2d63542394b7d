use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};
use viseq_core::solver::{bisection, Evaluation, ModelResponseMap};
use viseq_core::stats::{binom_cdf, BinomialSpec};
use viseq_core::{AgentModel, CongestionGame, EmpiricalCoefficients, InformationAccess, PopulationMixture, VisType};

fn viseq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_viseq")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.toml");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn sha(path: &Path) -> Vec<u8> {
    Sha256::digest(fs::read(path).unwrap()).to_vec()
}

#[test]
fn game_default() {
    let d = tempfile::tempdir().unwrap();
    let o = viseq(&["game", "--out-dir", d.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("0.2222") && out.contains("0.4444") && out.contains("37.78"), "{out}");
    let j = json(&d.path().join("game.json"));
    assert!((j["nash"].as_f64().unwrap() - 2.0 / 9.0).abs() < 1e-12);
    assert!((j["optimum"]["welfare"].as_f64().unwrap() - 340.0 / 9.0).abs() < 1e-9);
    assert_eq!(j["curve"].as_array().unwrap().len(), 101);
}

#[test]
fn game_symmetric() {
    let d = tempfile::tempdir().unwrap();
    let cfg = config(d.path(), "[game]\nintercept_a = 40\nslope_a = -30\nintercept_b = 10\nslope_b = 30\n");
    let o = viseq(&["--config", &cfg, "--out-dir", d.path().to_str().unwrap(), "game"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&d.path().join("game.json"))["nash"].as_f64().unwrap(), 0.5);
}

#[test]
fn game_not_concave() {
    let d = tempfile::tempdir().unwrap();
    let cfg = config(d.path(), "[game]\nslope_a = -30\nslope_b = -60\n");
    let o = viseq(&["--config", &cfg, "--out-dir", d.path().to_str().unwrap(), "game"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("not concave"), "{}", stderr(&o));
}

#[test]
fn bad_config_key_is_named() {
    let d = tempfile::tempdir().unwrap();
    let cfg = config(d.path(), "[solve]\ntolerance = 1e-6\n");
    let o = viseq(&["--config", &cfg, "game"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("tolerance"), "{}", stderr(&o));
}

#[test]
fn unknown_flag_and_help() {
    assert_eq!(code(&viseq(&["game", "--bogus"])), 2);
    let top = stdout(&viseq(&["--help"]));
    for flag in ["--config", "--seed", "--out-dir", "--threads"] {
        assert!(top.contains(flag), "{top}");
    }
    for (cmd, flags) in [
        ("solve", &["--method", "--vis", "--access", "--evaluation", "--preset"][..]),
        ("simulate", &["--participants", "--group-size", "--preset"]),
        ("analyze", &["--require-passed-checks", "--replications"]),
        ("truth", &["--seed"]),
        ("export-plots", &["--out-dir"]),
        ("game", &["--config"]),
    ] {
        let o = viseq(&[cmd, "--help"]);
        assert_eq!(code(&o), 0);
        for f in flags {
            assert!(stdout(&o).contains(f), "{cmd}: {f}");
        }
    }
}

#[test]
fn solve_random_population_is_one_half() {
    let d = tempfile::tempdir().unwrap();
    let cfg = config(
        d.path(),
        "[population]\npreset = \"custom\"\ncomponents = [{ model = \"random_chooser\", weight = 1 }]\n",
    );
    let o = viseq(&["--config", &cfg, "--out-dir", d.path().to_str().unwrap(), "solve", "--method", "bisection,grid"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let j = json(&d.path().join("solve.json"));
    for e in j["entries"].as_array().unwrap() {
        assert_eq!(e["result"]["p_star"].as_f64().unwrap(), 0.5);
    }
}

#[test]
fn solve_matches_library_bisection() {
    let d = tempfile::tempdir().unwrap();
    let o = viseq(&["--out-dir", d.path().to_str().unwrap(), "solve", "--preset", "empirical", "--vis", "bar"]);
    assert_eq!(code(&o), 0);
    let got = json(&d.path().join("solve.json"))["entries"][0]["result"]["p_star"].as_f64().unwrap();
    let map = ModelResponseMap::new(
        PopulationMixture::single(AgentModel::EmpiricalLogistic(EmpiricalCoefficients::default())).unwrap(),
        CongestionGame::paper(),
        VisType::Bar.default_scheme(),
        InformationAccess::Public,
        Evaluation::Expected,
    )
    .unwrap();
    assert_eq!(got.to_bits(), bisection(&map, 1e-6, 10_000).unwrap().p_star.to_bits());
}

#[test]
fn solve_high_rationality_near_nash() {
    let d = tempfile::tempdir().unwrap();
    let cfg = config(
        d.path(),
        "[schemes]\nbar = { kind = \"continuous\" }\n\
         [population]\npreset = \"custom\"\n\
         components = [{ model = \"logit_responder\", params = { rationality = 10 }, weight = 1 }]\n",
    );
    let o = viseq(&["--config", &cfg, "--out-dir", d.path().to_str().unwrap(), "solve", "--vis", "bar"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let p = json(&d.path().join("solve.json"))["entries"][0]["result"]["p_star"].as_f64().unwrap();
    assert!((p - 2.0 / 9.0).abs() <= 0.005, "{p}");
}

#[test]
fn solve_jump_without_fixed_point_exits_3() {
    // rounded bars make the rational response jump across 2/9 with no crossing
    let d = tempfile::tempdir().unwrap();
    let cfg = config(
        d.path(),
        "[population]\npreset = \"custom\"\ncomponents = [{ model = \"best_responder\", weight = 1 }]\n",
    );
    let o = viseq(&["--config", &cfg, "--out-dir", d.path().to_str().unwrap(), "solve", "--vis", "bar"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("residual"));
}

#[test]
fn stochastic_commands_need_a_seed() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path().to_str().unwrap();
    for args in [
        &["--out-dir", dir, "simulate"][..],
        &["--out-dir", dir, "solve", "--method", "robbins_monro"],
        &["--out-dir", dir, "solve", "--evaluation", "monte_carlo"],
    ] {
        let o = viseq(args);
        assert_eq!(code(&o), 2, "{args:?}");
        assert!(stderr(&o).contains("--seed"));
    }
}

#[test]
fn simulate_structure_and_determinism() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    for d in [&d1, &d2] {
        let o = viseq(&["--seed", "5", "--out-dir", d.path().to_str().unwrap(), "simulate", "--participants", "400"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let a = d1.path().join("experiment.csv");
    assert_eq!(fs::read_to_string(&a).unwrap().lines().count(), 8001);
    assert_eq!(sha(&a), sha(&d2.path().join("experiment.csv")));
}

#[test]
fn simulate_rejects_too_few_participants() {
    let d = tempfile::tempdir().unwrap();
    let o = viseq(&["--seed", "1", "--out-dir", d.path().to_str().unwrap(), "simulate", "--participants", "10"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn unwritable_out_dir_exits_4() {
    let d = tempfile::tempdir().unwrap();
    let blocker = d.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = viseq(&["--seed", "1", "--out-dir", blocker.join("sub").to_str().unwrap(), "simulate"]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
}

#[test]
fn analyze_and_export_plots() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path().to_str().unwrap();
    assert_eq!(code(&viseq(&["--seed", "3", "--out-dir", dir, "simulate", "--participants", "200"])), 0);
    let csv = d.path().join("experiment.csv");
    let o = viseq(&["--seed", "3", "--out-dir", dir, "analyze", csv.to_str().unwrap(), "--replications", "200"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("fixed effects only"));
    let j = json(&d.path().join("analysis.json"));
    assert!(j["equilibria"]["bar"]["p"].is_number() && j["equilibria"]["hops"]["p"].is_number());
    let cells = sha(&d.path().join("cells.csv"));
    let coefs = sha(&d.path().join("coefficients.csv"));

    let e = tempfile::tempdir().unwrap();
    let bundle = d.path().join("analysis.json");
    let o = viseq(&["--out-dir", e.path().to_str().unwrap(), "export-plots", bundle.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(sha(&e.path().join("cells.csv")), cells);
    assert_eq!(sha(&e.path().join("coefficients.csv")), coefs);
    assert_eq!(sha(&e.path().join("analysis.json")), sha(&bundle));
}

#[test]
fn analyze_without_public_trials() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path().to_str().unwrap();
    assert_eq!(code(&viseq(&["--seed", "4", "--out-dir", dir, "simulate", "--participants", "120"])), 0);
    let csv = d.path().join("experiment.csv");
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    let access = header.split(',').position(|c| c == "access").unwrap();
    let kept: Vec<&str> = std::iter::once(header)
        .chain(lines.filter(|l| l.split(',').nth(access) != Some("public")))
        .collect();
    let private = d.path().join("private.csv");
    fs::write(&private, kept.join("\n") + "\n").unwrap();
    let o = viseq(&["--seed", "4", "--out-dir", dir, "analyze", private.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).to_lowercase().contains("public"), "{}", stderr(&o));
    let j = json(&d.path().join("analysis.json"));
    assert!(j.get("equilibria").is_none() && j.get("eq3").is_none());
}

#[test]
fn analyze_malformed_row_names_row_and_column() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path().to_str().unwrap();
    assert_eq!(code(&viseq(&["--seed", "2", "--out-dir", dir, "simulate", "--participants", "60"])), 0);
    let csv = d.path().join("experiment.csv");
    let text = fs::read_to_string(&csv).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let col = header.iter().position(|c| *c == "prob_estimate").unwrap();
    let mut rows: Vec<String> = text.lines().map(str::to_string).collect();
    let mut fields: Vec<String> = rows[3].split(',').map(str::to_string).collect();
    fields[col] = "lots".into();
    rows[3] = fields.join(",");
    fs::write(&csv, rows.join("\n") + "\n").unwrap();
    let o = viseq(&["--seed", "2", "--out-dir", dir, "analyze", csv.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("row 3") && err.contains("prob_estimate"), "{err}");
}

#[test]
fn analyze_separation_exits_5() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path().to_str().unwrap();
    let cfg = config(
        d.path(),
        "[population]\npreset = \"custom\"\ncomponents = [{ model = \"best_responder\", weight = 1 }]\n",
    );
    assert_eq!(code(&viseq(&["--config", &cfg, "--seed", "1", "--out-dir", dir, "simulate"])), 0);
    let csv = d.path().join("experiment.csv");
    let o = viseq(&["--config", &cfg, "--seed", "1", "--out-dir", dir, "analyze", csv.to_str().unwrap()]);
    assert_eq!(code(&o), 5);
    assert!(stderr(&o).contains("eq4"), "{}", stderr(&o));
}

#[test]
fn truth_table() {
    let d = tempfile::tempdir().unwrap();
    let o = viseq(&["--out-dir", d.path().to_str().unwrap(), "truth"]);
    assert_eq!(code(&o), 0);
    let j = json(&d.path().join("truth.json"));
    let rows = j["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 18);
    let b_half = rows.iter().find(|r| r["signal"] == 0.5 && r["choice"] == "B").unwrap()["probability"].as_f64().unwrap();
    let oracle = 1.0 - binom_cdf(6, BinomialSpec::new(30, 0.5).unwrap()).unwrap();
    assert!((b_half - oracle).abs() < 1e-12);
}
