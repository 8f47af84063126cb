use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mpsim::analysis::{compare_files, CompareReport, ScanReport};
use mpsim::table::Table;
use mpsim_core::oracle::{dense_lindblad_evolve, DenseDensity};
use mpsim_core::{ChainLength, ModelParams};
use serde_json::Value;

fn mpsim(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mpsim"));
    cmd.args(args).env_remove("MPSIM_OUTPUT_ROOT");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn ok(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn run(cfg: &Path, dir: &Path, extra: &[&str]) -> Value {
    let mut args = vec!["run", cfg.to_str().unwrap(), "--output-dir", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    ok(&mpsim(&args, &[]))
}

#[test]
fn oracle_engine_reproduces_dense_reference() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "o.json",
        r#"{"engine": "oracle", "n_sites": 4, "gamma_plus": 0.5, "gamma_minus": 0.5,
            "chi": 1, "dt": 0.25, "t_max": 2.0}"#,
    );
    let out = tmp.path().join("o");
    run(&cfg, &out, &[]);
    let table = Table::read_csv(&out.join("trace.csv")).unwrap();
    let p = ModelParams::new(1.0, 1.0, 0.5, 0.5, 0.0, ChainLength::Finite(4)).unwrap();
    let fixture = dense_lindblad_evolve(&DenseDensity::neel(4).unwrap(), &p, 0.25, 2.0).unwrap();
    assert_eq!(table.rows.len(), fixture.len());
    for (row, (t, rho)) in table.rows.iter().zip(&fixture) {
        assert_eq!(row[0], *t);
        for (i, m) in rho.magnetization().iter().enumerate() {
            assert_eq!(row[table.index_of(&format!("sz_site_{i}")).unwrap()], *m);
        }
    }
}

#[test]
fn compare_reports_mpdo_against_oracle() {
    let tmp = tempfile::tempdir().unwrap();
    let common = r#""n_sites": 4, "gamma_plus": 0.3, "gamma_minus": 0.6, "gamma_z": 0.2,
        "chi": 64, "dt": 0.05, "dt_obs": 0.25, "t_max": 2.0"#;
    let a = write_config(tmp.path(), "a.json", &format!(r#"{{"engine": "mpdo", {common}}}"#));
    let b = write_config(tmp.path(), "b.json", &format!(r#"{{"engine": "oracle", {common}}}"#));
    run(&a, &tmp.path().join("a"), &[]);
    run(&b, &tmp.path().join("b"), &[]);
    let report_path = tmp.path().join("cmp.json");
    let ta = tmp.path().join("a/trace.csv");
    let tb = tmp.path().join("b/trace.csv");
    let out = mpsim(
        &["compare", ta.to_str().unwrap(), tb.to_str().unwrap(), "--output", report_path.to_str().unwrap()],
        &[],
    );
    assert!(out.status.success() && out.stdout.is_empty());
    let report: CompareReport = serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report.matched_times, 9);
    assert_eq!(report, compare_files(&ta, &tb).unwrap());
    assert!(report.max_abs_dev < 1e-5, "{report:?}");
    let trace = report.columns.iter().find(|c| c.column == "trace").unwrap();
    assert!(trace.max_abs_dev < 1e-8);
    for name in ["fit.json", "manifest.json", "checkpoint.json", "diagnostics.json"] {
        assert!(tmp.path().join("a").join(name).exists(), "{name}");
    }
}

#[test]
fn qt_runs_are_byte_identical_across_thread_counts_and_manifest_reruns() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "q.json",
        r#"{"engine": "qt", "n_sites": 6, "gamma_plus": 0.0, "gamma_minus": 0.8, "gamma_z": 0.3,
            "chi": 16, "dt": 0.05, "dt_obs": 0.25, "t_max": 2.0, "n_traj": 6, "seed": 41}"#,
    );
    let (one, four) = (tmp.path().join("one"), tmp.path().join("four"));
    run(&cfg, &one, &["--threads", "1"]);
    run(&cfg, &four, &["--threads", "4"]);
    let again = tmp.path().join("again");
    run(&one.join("manifest.json"), &again, &[]);
    for name in ["trace.csv", "ensemble.json", "fit.json", "trajectories/traj_00005.csv"] {
        let a = std::fs::read(one.join(name)).unwrap();
        assert_eq!(a, std::fs::read(four.join(name)).unwrap(), "{name}");
        assert_eq!(a, std::fs::read(again.join(name)).unwrap(), "{name}");
    }
    let manifest: Value = serde_json::from_slice(&std::fs::read(one.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seeds"]["base"], 41);
    assert_eq!(manifest["config"]["scheme"], Value::Null);
    let trace = Table::read_csv(&one.join("trace.csv")).unwrap();
    assert!(trace.column("jumps_cum").unwrap().last().unwrap() > &0.0);
}

#[test]
fn invalid_config_lists_every_violation() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "bad.json",
        r#"{"engine": "oracle", "n_sites": 12, "gamma_minus": -1, "chi": 4, "dt": 0, "t_max": 1}"#,
    );
    let out = mpsim(&["run", cfg.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "invalid_config");
    assert_eq!(err["violations"].as_array().unwrap().len(), 4, "{err}");

    let missing = mpsim(&["run", tmp.path().join("nope.json").to_str().unwrap()], &[]);
    assert_eq!(missing.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&missing.stderr).unwrap();
    assert_eq!(err["error"], "io");
}

#[test]
fn output_root_applies_to_relative_dirs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "o.json",
        r#"{"engine": "oracle", "n_sites": 2, "chi": 1, "dt": 0.5, "t_max": 1.0, "output_dir": "rel/run"}"#,
    );
    let v = ok(&mpsim(&["run", cfg.to_str().unwrap()], &[("MPSIM_OUTPUT_ROOT", tmp.path())]));
    assert!(tmp.path().join("rel/run/trace.csv").exists(), "{v}");
}

#[test]
fn chi_ladder_deviations_shrink() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "s.json",
        r#"{"engine": "mpdo", "n_sites": 10, "gamma_plus": 0.1, "gamma_minus": 0.1,
            "chi": 8, "dt": 0.1, "dt_obs": 0.5, "t_max": 2.0, "cutoff": 0}"#,
    );
    let dir = tmp.path().join("scan");
    let v = ok(&mpsim(
        &[
            "convergence-scan",
            cfg.to_str().unwrap(),
            "--axis",
            "chi",
            "--values",
            "8,16,32",
            "--output-dir",
            dir.to_str().unwrap(),
        ],
        &[],
    ));
    let report: ScanReport = serde_json::from_value(v).unwrap();
    assert_eq!(report.steps.len(), 2);
    assert!(report.steps[1].max_deviation < report.steps[0].max_deviation, "{report:?}");
    assert!(dir.join("scan.json").exists());
}

#[test]
fn dt_ladder_shows_fourth_order() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "s.json",
        r#"{"engine": "mpdo", "n_sites": 4, "gamma_plus": 0.5, "gamma_minus": 0.5,
            "chi": 64, "dt": 0.4, "dt_obs": 0.8, "t_max": 3.2}"#,
    );
    let dir = tmp.path().join("scan");
    let v = ok(&mpsim(
        &[
            "convergence-scan",
            cfg.to_str().unwrap(),
            "--axis",
            "dt",
            "--values",
            "0.4,0.2,0.1",
            "--output-dir",
            dir.to_str().unwrap(),
        ],
        &[],
    ));
    let report: ScanReport = serde_json::from_value(v).unwrap();
    let ratio = report.ratios[0];
    assert!((10.0..24.0).contains(&ratio), "{report:?}");

    let one = mpsim(
        &["convergence-scan", cfg.to_str().unwrap(), "--axis", "dt", "--values", "0.4"],
        &[],
    );
    assert_eq!(one.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&one.stderr).unwrap();
    assert_eq!(err["error"], "invalid_config");
}

#[test]
fn resumed_mpdo_run_matches_uninterrupted() {
    let tmp = tempfile::tempdir().unwrap();
    let body = |t_max: f64, resume: &str| {
        format!(
            r#"{{"engine": "mpdo", "n_sites": 6, "gamma_z": 0.4, "chi": 32, "dt": 0.1,
                "dt_obs": 0.5, "t_max": {t_max} {resume}}}"#
        )
    };
    let full = write_config(tmp.path(), "full.json", &body(2.0, ""));
    let half = write_config(tmp.path(), "half.json", &body(1.0, ""));
    run(&full, &tmp.path().join("full"), &[]);
    run(&half, &tmp.path().join("half"), &[]);
    let cp = tmp.path().join("half/checkpoint.json");
    let rest = write_config(
        tmp.path(),
        "rest.json",
        &body(2.0, &format!(r#", "resume_from": "{}""#, cp.display())),
    );
    run(&rest, &tmp.path().join("rest"), &[]);
    let r = compare_files(&tmp.path().join("full/trace.csv"), &tmp.path().join("rest/trace.csv")).unwrap();
    assert_eq!(r.matched_times, 3);
    assert!(r.max_abs_dev < 1e-12, "{r:?}");
}

#[test]
fn itebd_fit_and_plateau_subcommands() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "i.json",
        r#"{"engine": "itebd", "gamma_z": 1.0, "chi": 16, "dt": 0.1, "dt_obs": 0.1, "t_max": 4.0}"#,
    );
    let out = tmp.path().join("i");
    run(&cfg, &out, &[]);
    let table = Table::read_csv(&out.join("trace.csv")).unwrap();
    let s = table.column("S_center").unwrap();
    assert!(s[0].abs() < 1e-12 && s[40] > 0.05);
    let trace = out.join("trace.csv");
    let fit = ok(&mpsim(
        &["fit", trace.to_str().unwrap(), "--kind", "power", "--window", "1.1", "3.9"],
        &[],
    ));
    assert_eq!(fit["column"], "S_bond_avg");
    assert!(fit["fit"]["n_points"].as_u64().unwrap() >= 8);

    let p = ok(&mpsim(&["plateau", "--gamma", "3.5"], &[]));
    assert!((p["estimate"].as_f64().unwrap() - 0.0352).abs() < 5e-4);
    let bad = mpsim(&["plateau", "--gamma", "0"], &[]);
    assert_eq!(bad.status.code(), Some(1));
}
