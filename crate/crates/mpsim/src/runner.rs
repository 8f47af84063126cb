use std::path::{Path, PathBuf};

use log::info;
use mpsim_core::analytics::{fit_log_growth, fit_power_law, POWER_LAW_WINDOW};
use mpsim_core::itebd::{CellBond, ItebdEvolver, ItebdState};
use mpsim_core::models::{BasisFlavor, OperatorBasis};
use mpsim_core::mpdo::{ChainSnapshot, MpdoEvolver, MpdoState};
use mpsim_core::oracle::{self, DenseDensity, OracleTolerance};
use mpsim_core::trajectory::{
    averaged_bonds, center_bond, ensemble_stats, magnetization_stats, run_trajectory,
    series_stats, EnsembleStats, EntropyTrace,
};
use mpsim_core::{Scalar, C64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{engine_name, Engine, RunConfig};
use crate::error::{CliError, Result};
use crate::table::Table;

/// Default window of the logarithmic fit written to `fit.json`.
pub const LOG_GROWTH_WINDOW: (f64, f64) = (8.0, 25.0);

pub const TRACE_FILE: &str = "trace.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const FIT_FILE: &str = "fit.json";
pub const ENSEMBLE_FILE: &str = "ensemble.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.json";
pub const TRAJECTORY_DIR: &str = "trajectories";

/// Environment variable prepended to relative output directories.
pub const OUTPUT_ROOT_ENV: &str = "MPSIM_OUTPUT_ROOT";

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub files: Vec<String>,
    pub trace: Table,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub snapshot: ChainSnapshot,
}

#[derive(Debug, Clone, Serialize)]
struct Diagnostic {
    t: f64,
    max_bond_dim: usize,
    truncation: f64,
    trace_before_renormalization: f64,
    min_pair_eigenvalue: Option<f64>,
}

/// Output directory: an explicit override, else the config's, else
/// `mpsim-out`; relative paths are placed under `$MPSIM_OUTPUT_ROOT` if set.
pub fn resolve_output_dir(cfg: &RunConfig, overridden: Option<&Path>) -> PathBuf {
    let dir = overridden
        .map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("mpsim-out"));
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if dir.is_relative() => PathBuf::from(root).join(dir),
        _ => dir,
    }
}

/// Runs with at most `threads` worker threads (all cores when `None`).
pub fn run_with_threads(cfg: &RunConfig, dir: &Path, threads: Option<usize>) -> Result<RunOutput> {
    match threads {
        None => run(cfg, dir),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| CliError::Input(format!("thread pool: {e}")))?;
            pool.install(|| run(cfg, dir))
        }
    }
}

/// Validates `cfg`, runs it and writes every artifact into `dir`.
pub fn run(cfg: &RunConfig, dir: &Path) -> Result<RunOutput> {
    cfg.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    info!("running engine {} into {}", engine_name(cfg.engine), dir.display());
    let mut files = Vec::new();
    let trace = match cfg.engine {
        Engine::Mpdo => match cfg.basis {
            BasisFlavor::Pauli => run_mpdo::<f64>(cfg, dir, &mut files)?,
            BasisFlavor::Linearized => run_mpdo::<C64>(cfg, dir, &mut files)?,
        },
        Engine::Itebd => match cfg.basis {
            BasisFlavor::Pauli => run_itebd::<f64>(cfg, dir, &mut files)?,
            BasisFlavor::Linearized => run_itebd::<C64>(cfg, dir, &mut files)?,
        },
        Engine::Oracle => run_oracle(cfg)?,
        Engine::Qt => run_qt(cfg, dir, &mut files)?,
    };
    write_file(dir, TRACE_FILE, &mut files, |p| trace.write_csv(p))?;
    let fit = fit_report(cfg, &trace);
    write_json(dir, FIT_FILE, &mut files, &fit)?;
    let manifest = json!({
        "tool": "mpsim",
        "version": env!("CARGO_PKG_VERSION"),
        "engine": engine_name(cfg.engine),
        "config": cfg,
        "seeds": {
            "base": cfg.seed,
            "rule": "trajectory i uses ChaCha8 seeded with base xor i",
            "n_traj": if cfg.engine == Engine::Qt { cfg.n_traj } else { 0 },
        },
        "files": files,
    });
    let path = dir.join(MANIFEST_FILE);
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| CliError::io(&path, e))?;
    files.push(MANIFEST_FILE.into());
    Ok(RunOutput {
        dir: dir.to_path_buf(),
        files,
        trace,
    })
}

fn write_file(dir: &Path, name: &str, files: &mut Vec<String>, f: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    f(&dir.join(name))?;
    files.push(name.into());
    Ok(())
}

fn write_json<S: Serialize>(dir: &Path, name: &str, files: &mut Vec<String>, value: &S) -> Result<()> {
    write_file(dir, name, files, |p| {
        std::fs::write(p, serde_json::to_string_pretty(value)?).map_err(|e| CliError::io(p, e))
    })
}

/// Column layout shared by the finite-chain engines.
fn finite_columns(n: usize, last: &str) -> Vec<String> {
    let mut c = vec!["t".to_string(), "S_center".into(), "S_bond_avg".into()];
    c.extend((0..n).map(|i| format!("sz_site_{i}")));
    c.push(last.into());
    c.extend((0..n - 1).map(|b| format!("S_bond_{b}")));
    c
}

fn finite_row(t: f64, bonds: &[usize], entropies: &[f64], sz: &[f64], last: f64) -> Vec<f64> {
    let n = sz.len();
    let avg = bonds.iter().map(|&b| entropies[b]).sum::<f64>() / bonds.len() as f64;
    let mut row = vec![t, entropies[center_bond(n)], avg];
    row.extend_from_slice(sz);
    row.push(last);
    row.extend_from_slice(entropies);
    row
}

fn run_mpdo<T: Scalar>(cfg: &RunConfig, dir: &Path, files: &mut Vec<String>) -> Result<Table> {
    let n = cfg.n_sites.expect("validated");
    let basis = OperatorBasis::new(cfg.basis);
    let trunc = cfg.truncation();
    let mut state = match &cfg.resume_from {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let cp: Checkpoint = serde_json::from_str(&text)?;
            if cp.snapshot.flavor != cfg.basis || cp.config.model() != cfg.model() {
                return Err(CliError::Input("checkpoint was written for a different model or basis".into()));
            }
            MpdoState::<T>::from_snapshot(&cp.snapshot)?
        }
        None => MpdoState::<T>::neel(n, basis.clone())?,
    };
    if state.n_sites() != n {
        return Err(CliError::Input(format!("checkpoint has {} sites, config {n}", state.n_sites())));
    }
    let mut ev = MpdoEvolver::<T>::new(cfg.model(), basis, cfg.dt, trunc, cfg.order())?;
    let bonds = averaged_bonds(n);
    let mut table = Table::new(finite_columns(n, "trace"));
    let mut diag = Vec::new();
    let dt_obs = cfg.dt_obs();
    let first = (state.time() / dt_obs).round() as usize;
    let mut truncation = 0.0;
    let mut trace_before = state.trace();
    for k in first..=cfg.n_obs() {
        if k > first {
            let rep = ev.advance(&mut state, cfg.steps_per_obs())?;
            truncation += rep.truncation;
            trace_before = rep.trace_before;
        }
        let t = k as f64 * dt_obs;
        state.set_time(t);
        if !state.is_canonical() {
            state.canonicalize(trunc)?;
        }
        let s = state.operator_entanglements();
        table.push(finite_row(t, &bonds, &s, &state.magnetization(), state.trace()));
        diag.push(Diagnostic {
            t,
            max_bond_dim: state.max_bond_dim(),
            truncation,
            trace_before_renormalization: trace_before,
            min_pair_eigenvalue: state.min_pair_eigenvalue().ok(),
        });
        info!("t = {t:.4} chi = {} S_center = {:.6}", state.max_bond_dim(), s[center_bond(n)]);
    }
    write_json(dir, DIAGNOSTICS_FILE, files, &diag)?;
    let cp = Checkpoint {
        config: cfg.clone(),
        snapshot: state.snapshot(),
    };
    write_json(dir, CHECKPOINT_FILE, files, &cp)?;
    Ok(table)
}

fn run_itebd<T: Scalar>(cfg: &RunConfig, dir: &Path, files: &mut Vec<String>) -> Result<Table> {
    let basis = OperatorBasis::new(cfg.basis);
    let mut state = ItebdState::<T>::neel(basis.clone())?;
    let mut ev = ItebdEvolver::<T>::new(cfg.model(), basis, cfg.dt, cfg.truncation(), cfg.order())?;
    ev.reorth_interval = cfg.reorth_interval;
    let cols = ["t", "S_center", "S_bond_avg", "sz_site_0", "sz_site_1", "S_bond_0", "S_bond_1"];
    let mut table = Table::new(cols.iter().map(|s| s.to_string()).collect());
    let mut diag = Vec::new();
    let mut truncation = 0.0;
    for k in 0..=cfg.n_obs() {
        if k > 0 {
            truncation += ev.advance(&mut state, cfg.steps_per_obs())?;
        }
        let t = k as f64 * cfg.dt_obs();
        state.set_time(t);
        let s = [
            state.operator_entanglement(CellBond::Ab),
            state.operator_entanglement(CellBond::Ba),
        ];
        let m = state.magnetization()?;
        table.push(vec![t, s[0], (s[0] + s[1]) / 2.0, m[0], m[1], s[0], s[1]]);
        let dims = state.bond_dims();
        diag.push(Diagnostic {
            t,
            max_bond_dim: dims[0].max(dims[1]),
            truncation,
            trace_before_renormalization: 1.0,
            min_pair_eigenvalue: None,
        });
    }
    write_json(dir, DIAGNOSTICS_FILE, files, &diag)?;
    Ok(table)
}

fn run_oracle(cfg: &RunConfig) -> Result<Table> {
    let n = cfg.n_sites.expect("validated");
    let bonds = averaged_bonds(n);
    let mut table = Table::new(finite_columns(n, "trace"));
    let mut err = None;
    oracle::dense_lindblad_evolve_with(
        &DenseDensity::neel(n)?,
        &cfg.model(),
        cfg.dt_obs(),
        cfg.t_max,
        OracleTolerance::default(),
        |t, rho| {
            let s: std::result::Result<Vec<f64>, _> = (1..n).map(|cut| oracle::dense_oe(rho, cut)).collect();
            match s {
                Ok(s) => table.push(finite_row(t, &bonds, &s, &rho.magnetization(), rho.trace().re)),
                Err(e) => err = Some(e),
            }
        },
    )?;
    match err {
        Some(e) => Err(e.into()),
        None => Ok(table),
    }
}

fn trajectory_table(tr: &EntropyTrace) -> Table {
    let n = tr.n_sites;
    let bonds = averaged_bonds(n);
    let mut table = Table::new(finite_columns(n, "jumps_cum"));
    for (i, &t) in tr.times.iter().enumerate() {
        table.push(finite_row(
            t,
            &bonds,
            &tr.bond_entropies[i],
            &tr.magnetization[i],
            tr.jumps_cum[i] as f64,
        ));
    }
    table
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub n_traj: usize,
    pub averaged_bonds: Vec<usize>,
    pub bond_averaged: EnsembleStats,
    pub center: EnsembleStats,
    pub magnetization: Vec<EnsembleStats>,
    pub jumps_cum: EnsembleStats,
}

fn run_qt(cfg: &RunConfig, dir: &Path, files: &mut Vec<String>) -> Result<Table> {
    let n = cfg.n_sites.expect("validated");
    let tc = cfg.trajectory_config();
    tc.validate()?;
    let traces: Vec<EntropyTrace> = (0..cfg.n_traj as u64)
        .into_par_iter()
        .map(|i| run_trajectory(&tc, i))
        .collect::<std::result::Result<_, _>>()?;
    if cfg.write_trajectories {
        let sub = dir.join(TRAJECTORY_DIR);
        std::fs::create_dir_all(&sub).map_err(|e| CliError::io(&sub, e))?;
        for (i, tr) in traces.iter().enumerate() {
            let name = format!("{TRAJECTORY_DIR}/traj_{i:05}.csv");
            write_file(dir, &name, files, |p| trajectory_table(tr).write_csv(p))?;
        }
    }
    let times = traces[0].times.clone();
    let jumps: Vec<Vec<f64>> = traces
        .iter()
        .map(|t| t.jumps_cum.iter().map(|&j| j as f64).collect())
        .collect();
    let report = EnsembleReport {
        n_traj: traces.len(),
        averaged_bonds: averaged_bonds(n),
        bond_averaged: ensemble_stats(&traces)?,
        center: series_stats(&times, &traces.iter().map(|t| t.center_series()).collect::<Vec<_>>())?,
        magnetization: (0..n)
            .map(|s| magnetization_stats(&traces, s))
            .collect::<std::result::Result<_, _>>()?,
        jumps_cum: series_stats(&times, &jumps)?,
    };
    write_json(dir, ENSEMBLE_FILE, files, &report)?;
    // the ensemble-mean trace
    let mean_bonds: Vec<Vec<f64>> = (0..times.len())
        .map(|i| {
            (0..n - 1)
                .map(|b| traces.iter().map(|t| t.bond_entropies[i][b]).sum::<f64>() / traces.len() as f64)
                .collect()
        })
        .collect();
    let mut table = Table::new(finite_columns(n, "jumps_cum"));
    for (i, &t) in times.iter().enumerate() {
        let sz: Vec<f64> = report.magnetization.iter().map(|m| m.mean[i]).collect();
        let mut row = finite_row(t, &[0], &mean_bonds[i], &sz, report.jumps_cum.mean[i]);
        row[2] = report.bond_averaged.mean[i];
        table.push(row);
    }
    Ok(table)
}

/// Column a run's fits are made on: trajectory entanglement for ensembles,
/// operator entanglement of the central cut otherwise.
pub fn primary_column(engine: Engine) -> &'static str {
    match engine {
        Engine::Qt => "S_bond_avg",
        _ => "S_center",
    }
}

fn fit_report(cfg: &RunConfig, table: &Table) -> serde_json::Value {
    let column = primary_column(cfg.engine);
    let (Ok(t), Ok(s)) = (table.times(), table.require(column)) else {
        return json!({ "column": column, "error": "column missing" });
    };
    let as_json = |r: mpsim_core::Result<mpsim_core::analytics::FitResult>| match r {
        Ok(f) => json!(f),
        Err(e) => json!({ "error": e.to_string() }),
    };
    json!({
        "column": column,
        "power_law": as_json(fit_power_law(&t, &s, POWER_LAW_WINDOW)),
        "log_growth": as_json(fit_log_growth(&t, &s, LOG_GROWTH_WINDOW)),
    })
}
