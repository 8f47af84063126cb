use std::path::Path;

use crate::error::{CliError, Result};

/// Column-named numeric table, the in-memory form of a trace CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.index_of(name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn require(&self, name: &str) -> Result<Vec<f64>> {
        self.column(name)
            .ok_or_else(|| CliError::Input(format!("column {name:?} not found")))
    }

    pub fn times(&self) -> Result<Vec<f64>> {
        self.require("t")
    }

    /// Floats are written in shortest round-trip form.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush().map_err(|e| CliError::io(path, e))?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let columns: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
        let mut table = Self::new(columns);
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|_| {
                        CliError::Input(format!("{}: row {}: {s:?} is not a number", path.display(), line + 1))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            table.push(row);
        }
        Ok(table)
    }
}
