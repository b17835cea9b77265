//! Convergence tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{FemError, Result};
use crate::solvers::IterationTrace;
use crate::spaces::fmt_sig;

pub const CSV_HEADER: &str = "level,N,h,error,rate,energy_primal,energy_dual,gap,iters";

#[derive(Clone, Debug, PartialEq)]
pub struct LevelResult {
    pub level: usize,
    /// Number of vertices.
    pub n_vertices: usize,
    pub h: f64,
    pub error: f64,
    pub energy_primal: Option<f64>,
    pub energy_dual: Option<f64>,
    pub gap: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// History of the iterative solver, if one was used.
    pub trace: Option<IterationTrace>,
    /// Additional per-level quantities that are not part of the table.
    pub diagnostics: BTreeMap<String, f64>,
}

impl LevelResult {
    pub fn new(level: usize, n_vertices: usize, h: f64, error: f64) -> Self {
        LevelResult {
            level,
            n_vertices,
            h,
            error,
            energy_primal: None,
            energy_dual: None,
            gap: None,
            iterations: 0,
            converged: true,
            trace: None,
            diagnostics: BTreeMap::new(),
        }
    }

    pub fn diagnostic(&self, key: &str) -> Option<f64> {
        self.diagnostics.get(key).copied()
    }

    pub(crate) fn set(&mut self, key: &str, value: f64) {
        self.diagnostics.insert(key.to_string(), value);
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExperimentReport {
    pub experiment: String,
    pub method: String,
    /// Rows with strictly increasing levels.
    pub rows: Vec<LevelResult>,
}

impl ExperimentReport {
    pub fn new(experiment: &str, method: &str) -> Self {
        ExperimentReport {
            experiment: experiment.into(),
            method: method.into(),
            rows: Vec::new(),
        }
    }

    /// Inserts a row keeping the levels sorted; a row for an existing level
    /// is replaced.
    pub fn push(&mut self, row: LevelResult) {
        match self.rows.binary_search_by_key(&row.level, |r| r.level) {
            Ok(i) => self.rows[i] = row,
            Err(i) => self.rows.insert(i, row),
        }
    }

    /// `log₂(e_{ℓ−1}/e_ℓ)` per level, scaled by the level difference; `None`
    /// for the first row.
    pub fn rates(&self) -> Vec<Option<f64>> {
        let mut out = Vec::with_capacity(self.rows.len());
        for (i, row) in self.rows.iter().enumerate() {
            out.push((i > 0).then(|| {
                let prev = &self.rows[i - 1];
                (prev.error / row.error).log2() / (row.level - prev.level) as f64
            }));
        }
        out
    }

    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged)
    }

    pub fn row(&self, level: usize) -> Option<&LevelResult> {
        self.rows.iter().find(|r| r.level == level)
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(fmt_sig).unwrap_or_default();
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for (row, rate) in self.rows.iter().zip(self.rates()) {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                row.level,
                row.n_vertices,
                fmt_sig(row.h),
                fmt_sig(row.error),
                opt(rate),
                opt(row.energy_primal),
                opt(row.energy_dual),
                opt(row.gap),
                row.iterations
            );
        }
        out
    }
}

pub fn emit_report(report: &ExperimentReport, path: &Path) -> Result<()> {
    std::fs::write(path, report.to_csv()).map_err(|source| FemError::Io {
        path: path.to_path_buf(),
        source,
    })
}
