use std::path::Path;

use mpsim_core::analytics::{
    fit_log_growth, fit_power_law, plateau_estimate, plateau_four_spin, plateau_two_site, FitResult, POWER_LAW_WINDOW,
};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::runner::{self, primary_column, LOG_GROWTH_WINDOW};
use crate::table::Table;

/// Two grid times closer than this are the same time.
const TIME_MATCH: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnDeviation {
    pub column: String,
    pub max_abs_dev: f64,
    pub at_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub matched_times: usize,
    pub columns: Vec<ColumnDeviation>,
    pub max_abs_dev: f64,
}

/// Row pairs `(i, j)` with equal times; both grids are assumed increasing.
fn matched_rows(ta: &[f64], tb: &[f64]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut j = 0;
    for (i, &t) in ta.iter().enumerate() {
        while j < tb.len() && tb[j] < t - TIME_MATCH {
            j += 1;
        }
        if j < tb.len() && (tb[j] - t).abs() <= TIME_MATCH {
            out.push((i, j));
        }
    }
    out
}

/// Largest absolute difference of every shared column over shared times.
pub fn compare_tables(a: &Table, b: &Table) -> Result<CompareReport> {
    let pairs = matched_rows(&a.times()?, &b.times()?);
    if pairs.is_empty() {
        return Err(CliError::Input("the traces share no recorded times".into()));
    }
    let mut columns = Vec::new();
    for (ia, name) in a.columns.iter().enumerate() {
        let Some(ib) = b.index_of(name).filter(|_| name != "t") else {
            continue;
        };
        let mut worst = ColumnDeviation {
            column: name.clone(),
            max_abs_dev: 0.0,
            at_t: a.rows[pairs[0].0][0],
        };
        for &(i, j) in &pairs {
            let d = (a.rows[i][ia] - b.rows[j][ib]).abs();
            if d > worst.max_abs_dev || d.is_nan() {
                worst.max_abs_dev = d;
                worst.at_t = a.rows[i][0];
            }
        }
        columns.push(worst);
    }
    if columns.is_empty() {
        return Err(CliError::Input("the traces share no data columns".into()));
    }
    let max_abs_dev = columns.iter().map(|c| c.max_abs_dev).fold(0.0, f64::max);
    Ok(CompareReport {
        matched_times: pairs.len(),
        columns,
        max_abs_dev,
    })
}

pub fn compare_files(a: &Path, b: &Path) -> Result<CompareReport> {
    compare_tables(&Table::read_csv(a)?, &Table::read_csv(b)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ScanAxis {
    Chi,
    Dt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanStep {
    pub from: f64,
    pub to: f64,
    /// `(t, |S_to − S_from|)` on the shared grid.
    pub per_time: Vec<(f64, f64)>,
    pub max_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub axis: ScanAxis,
    pub values: Vec<f64>,
    pub column: String,
    pub threshold: f64,
    pub steps: Vec<ScanStep>,
    /// Ratio of successive maximal deviations.
    pub ratios: Vec<f64>,
    /// Whether the last step deviates by less than the threshold.
    pub converged: bool,
}

pub const DEFAULT_SCAN_THRESHOLD: f64 = 1e-3;

/// Configs of every rung of the ladder.
pub fn scan_configs(base: &RunConfig, axis: ScanAxis, values: &[f64]) -> Result<Vec<RunConfig>> {
    let mut problems = Vec::new();
    if values.len() < 2 {
        problems.push(format!("a convergence scan needs at least 2 values, got {}", values.len()));
    }
    let dt_obs = base
        .dt_obs
        .unwrap_or_else(|| values.iter().copied().fold(base.dt, f64::max));
    let mut out = Vec::new();
    for &v in values {
        let mut c = base.clone();
        match axis {
            ScanAxis::Chi => {
                if v < 1.0 || v.fract() != 0.0 {
                    problems.push(format!("chi values must be positive integers, got {v}"));
                }
                c.chi = v.max(1.0) as usize;
            }
            ScanAxis::Dt => {
                c.dt = v;
                c.dt_obs = Some(dt_obs);
            }
        }
        for p in c.violations() {
            let p = format!("rung {v}: {p}");
            if !problems.contains(&p) {
                problems.push(p);
            }
        }
        out.push(c);
    }
    if problems.is_empty() {
        Ok(out)
    } else {
        Err(CliError::Config(problems))
    }
}

/// Runs the ladder into `dir/rung_k` and reports successive deviations.
pub fn convergence_scan(
    base: &RunConfig,
    axis: ScanAxis,
    values: &[f64],
    threshold: f64,
    dir: &Path,
    threads: Option<usize>,
) -> Result<ScanReport> {
    let configs = scan_configs(base, axis, values)?;
    let column = primary_column(base.engine);
    let mut series = Vec::new();
    for (k, c) in configs.iter().enumerate() {
        let out = runner::run_with_threads(c, &dir.join(format!("rung_{k}")), threads)?;
        series.push((out.trace.times()?, out.trace.require(column)?));
    }
    let mut steps = Vec::new();
    for (k, w) in series.windows(2).enumerate() {
        let (ta, sa) = &w[0];
        let (tb, sb) = &w[1];
        let per_time: Vec<(f64, f64)> = matched_rows(ta, tb)
            .into_iter()
            .map(|(i, j)| (ta[i], (sa[i] - sb[j]).abs()))
            .collect();
        let max_deviation = per_time.iter().map(|p| p.1).fold(0.0, f64::max);
        steps.push(ScanStep {
            from: values[k],
            to: values[k + 1],
            per_time,
            max_deviation,
        });
    }
    let ratios = steps
        .windows(2)
        .map(|w| w[0].max_deviation / w[1].max_deviation)
        .collect();
    let converged = steps.last().is_some_and(|s| s.max_deviation < threshold);
    Ok(ScanReport {
        axis,
        values: values.to_vec(),
        column: column.into(),
        threshold,
        steps,
        ratios,
        converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FitKind {
    Power,
    Log,
}

impl FitKind {
    pub fn default_window(self) -> (f64, f64) {
        match self {
            Self::Power => POWER_LAW_WINDOW,
            Self::Log => LOG_GROWTH_WINDOW,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub column: String,
    pub kind: FitKind,
    pub fit: FitResult,
}

/// Fits one column of a trace; defaults to the bond average when present.
pub fn fit_table(table: &Table, column: Option<&str>, kind: FitKind, window: Option<(f64, f64)>) -> Result<FitReport> {
    let column = match column {
        Some(c) => c.to_string(),
        None if table.index_of("S_bond_avg").is_some() => "S_bond_avg".into(),
        None => "S_center".into(),
    };
    let t = table.times()?;
    let s = table.require(&column)?;
    let window = window.unwrap_or(kind.default_window());
    let fit = match kind {
        FitKind::Power => fit_power_law(&t, &s, window)?,
        FitKind::Log => fit_log_growth(&t, &s, window)?,
    };
    Ok(FitReport { column, kind, fit })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateauReport {
    pub gamma: f64,
    pub j: f64,
    pub two_site: f64,
    pub four_spin: f64,
    pub estimate: f64,
}

pub fn plateau(gamma: f64, j: f64) -> Result<PlateauReport> {
    Ok(PlateauReport {
        gamma,
        j,
        two_site: plateau_two_site(gamma, j)?,
        four_spin: plateau_four_spin(gamma, j)?,
        estimate: plateau_estimate(gamma, j)?,
    })
}
