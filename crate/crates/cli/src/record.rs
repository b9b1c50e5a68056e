//! Line-delimited JSON run records: one header line echoing the
//! configuration, one line per iteration and one summary line.

use std::fs;
use std::io::Write;
use std::path::Path;

use arpbs_core::{IterationRecord, PrimalVector, RunRecord, RunStatus, Violation};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};

pub const FORMAT: &str = "arpbs-run/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
#[allow(clippy::large_enum_variant)] // one header per file
pub enum RecordLine {
    Header(Header),
    Iteration(IterationRecord),
    Summary(Summary),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub format: String,
    pub problem: String,
    pub dim: usize,
    pub config: ExperimentConfig,
    pub initial_point: PrimalVector,
    pub initial_f: f64,
    pub lipschitz: Option<f64>,
    pub f_low: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub status: RunStatus,
    pub iterations: usize,
    pub successful: usize,
    pub final_f: f64,
    pub final_grad_dual_norm: f64,
    pub final_sigma: f64,
    pub sigma_max_observed: f64,
    pub box_radius: f64,
    pub f_evals: usize,
    pub deriv_evals: usize,
    pub final_point: PrimalVector,
    pub violations: Vec<Violation>,
}

pub fn render(
    cfg: &ExperimentConfig,
    problem: &str,
    run: &RunRecord,
    lipschitz: Option<f64>,
    f_low: Option<f64>,
    violations: &[Violation],
) -> String {
    let mut lines = Vec::with_capacity(run.records.len() + 2);
    lines.push(RecordLine::Header(Header {
        format: FORMAT.into(),
        problem: problem.into(),
        dim: run.initial_point.len(),
        config: cfg.clone(),
        initial_point: run.initial_point.clone(),
        initial_f: run.initial_f,
        lipschitz,
        f_low,
    }));
    lines.extend(run.records.iter().cloned().map(RecordLine::Iteration));
    lines.push(RecordLine::Summary(Summary {
        status: run.status,
        iterations: run.iterations(),
        successful: run.successful_count(),
        final_f: run.final_f,
        final_grad_dual_norm: run.final_grad_dual_norm,
        final_sigma: run.final_sigma,
        sigma_max_observed: run.sigma_max_observed,
        box_radius: run.box_radius,
        f_evals: run.f_evals,
        deriv_evals: run.deriv_evals,
        final_point: run.final_point.clone(),
        violations: violations.to_vec(),
    }));
    let mut out = String::new();
    for line in &lines {
        out.push_str(&serde_json::to_string(line).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    let io = |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(contents.as_bytes()).map_err(io)
}

/// Parses a record file back into its lines.
pub fn parse(text: &str) -> std::result::Result<Vec<RecordLine>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}
