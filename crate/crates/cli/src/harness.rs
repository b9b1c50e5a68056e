use std::path::{Path, PathBuf};

use arpbs_core::{check_trajectory, solve, CheckKind, ProblemOracle, RunRecord, RunStatus, Violation};
use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::record;

/// One-sided tolerance on the fitted complexity slope.
pub const SLOPE_MARGIN: f64 = 0.3;

#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// Configuration actually used, after sweep substitutions.
    pub config: ExperimentConfig,
    pub problem: String,
    pub run: RunRecord,
    pub violations: Vec<Violation>,
    pub lipschitz: Option<f64>,
    pub f_low: Option<f64>,
    pub record_path: Option<PathBuf>,
}

impl RunOutcome {
    pub fn converged(&self) -> bool {
        self.run.status == RunStatus::Converged
    }

    /// Violations of the checks that need no Hölder constant.
    pub fn l_free_violations(&self) -> impl Iterator<Item = &Violation> {
        self.violations
            .iter()
            .filter(|v| matches!(v.check, CheckKind::ModelDecrease | CheckKind::UnsuccessfulCount))
    }

    /// The bound on successful iterations, when L and f_low are known.
    pub fn complexity_bound(&self) -> Option<f64> {
        Some(
            self.config
                .solver
                .run_complexity_bound(&self.run, self.lipschitz?, self.f_low?),
        )
    }

    pub fn summary_row(&self, label: impl Into<String>) -> SummaryRow {
        let count = self.run.successful_before_termination(self.config.solver.epsilon);
        let bound = self.complexity_bound();
        SummaryRow {
            label: label.into(),
            problem: self.problem.clone(),
            n: self.run.initial_point.len(),
            r: self.config.r,
            p: self.config.solver.p,
            beta: self.config.solver.beta,
            epsilon: self.config.solver.epsilon,
            status: format!("{:?}", self.run.status),
            iterations: self.run.iterations(),
            successful: self.run.successful_count(),
            successful_before_termination: count,
            f_evals: self.run.f_evals,
            deriv_evals: self.run.deriv_evals,
            inner_iters: self.run.records.iter().map(|r| r.inner_iters).sum(),
            sigma_max_observed: self.run.sigma_max_observed,
            final_f: self.run.final_f,
            final_grad_dual_norm: self.run.final_grad_dual_norm,
            violations: self.violations.len(),
            complexity_bound: bound,
            within_bound: bound.map(|b| count as f64 <= b),
        }
    }
}

/// One CSV summary line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub problem: String,
    pub n: usize,
    pub r: f64,
    pub p: usize,
    pub beta: f64,
    pub epsilon: f64,
    pub status: String,
    pub iterations: usize,
    pub successful: usize,
    pub successful_before_termination: usize,
    pub f_evals: usize,
    pub deriv_evals: usize,
    pub inner_iters: usize,
    pub sigma_max_observed: f64,
    pub final_f: f64,
    pub final_grad_dual_norm: f64,
    pub violations: usize,
    pub complexity_bound: Option<f64>,
    pub within_bound: Option<bool>,
}

impl SummaryRow {
    pub fn converged(&self) -> bool {
        self.status == "Converged"
    }
}

/// Solves once, checks the trajectory and writes `run.jsonl` and
/// `summary.csv` under the output directory when one is set.
pub fn run_single(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let outcome = execute(cfg, cfg.out.as_ref().map(|d| d.join("run.jsonl")))?;
    if let Some(dir) = &cfg.out {
        write_summary(&dir.join("summary.csv"), &[outcome.summary_row("run")])?;
    }
    Ok(outcome)
}

fn execute(cfg: &ExperimentConfig, record_path: Option<PathBuf>) -> Result<RunOutcome> {
    let problem = cfg.build_problem()?;
    let space = cfg.space_for(problem.as_ref())?;
    let x0 = cfg.start.resolve(problem.as_ref(), cfg.seed)?;
    let solver = &cfg.solver;
    let run = solve(problem.as_ref(), &space, &x0, solver)?;
    let lipschitz = problem.holder_constant(&space, solver.p, solver.beta, run.box_radius);
    let meta = problem.metadata();
    let f_low = meta.f_low;
    let violations = check_trajectory(&run, solver, lipschitz, f_low);
    info!(
        "{} n={} r={} eps={:e}: {:?} after {} iterations ({} successful), {} violations",
        problem.id(),
        problem.dim(),
        cfg.r,
        solver.epsilon,
        run.status,
        run.iterations(),
        run.successful_count(),
        violations.len()
    );
    if let Some(path) = &record_path {
        let text = record::render(cfg, &problem.id(), &run, lipschitz, f_low, &violations);
        record::write_file(path, &text)?;
    }
    Ok(RunOutcome {
        config: cfg.clone(),
        problem: problem.id(),
        run,
        violations,
        lipschitz,
        f_low,
        record_path,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub rows: Vec<SummaryRow>,
    /// Least-squares slope of ln|S| against ln(1/ε) over converged rows
    /// with at least one successful iteration.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    /// Euclidean norm of the fit residuals.
    pub residual: Option<f64>,
    /// (p+β)/(p+β−1).
    pub theoretical_exponent: f64,
}

impl SweepSummary {
    pub fn slope_within_margin(&self) -> Option<bool> {
        self.slope.map(|s| s <= self.theoretical_exponent + SLOPE_MARGIN)
    }

    /// Rows whose count exceeds the bound; rows without a bound pass.
    pub fn bound_failures(&self) -> impl Iterator<Item = &SummaryRow> {
        self.rows.iter().filter(|r| r.within_bound == Some(false))
    }

    pub fn flagged(&self) -> impl Iterator<Item = &SummaryRow> {
        self.rows.iter().filter(|r| !r.converged())
    }
}

/// Runs the solver for every ε of the grid from the same start.
pub fn run_epsilon_sweep(cfg: &ExperimentConfig) -> Result<SweepSummary> {
    cfg.validate()?;
    let grid = cfg
        .epsilon_sweep
        .as_ref()
        .ok_or_else(|| HarnessError::config("epsilon_sweep", "required for an epsilon sweep"))?
        .values();
    let outcomes: Vec<RunOutcome> = grid
        .par_iter()
        .enumerate()
        .map(|(i, &eps)| {
            let mut row_cfg = cfg.clone();
            row_cfg.solver.epsilon = eps;
            row_cfg.epsilon_sweep = None;
            let path = cfg.out.as_ref().map(|d| d.join(format!("eps-{i:02}.jsonl")));
            execute(&row_cfg, path)
        })
        .collect::<Result<_>>()?;
    let rows: Vec<SummaryRow> = outcomes
        .iter()
        .enumerate()
        .map(|(i, o)| o.summary_row(format!("eps-{i:02}")))
        .collect();
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.converged() && r.successful > 0)
        .map(|r| ((1.0 / r.epsilon).ln(), (r.successful as f64).ln()))
        .collect();
    let fit = least_squares(&points);
    let summary = SweepSummary {
        rows,
        slope: fit.map(|f| f.0),
        intercept: fit.map(|f| f.1),
        residual: fit.map(|f| f.2),
        theoretical_exponent: cfg.solver.complexity_exponent(),
    };
    if let Some(dir) = &cfg.out {
        write_summary(&dir.join("summary.csv"), &summary.rows)?;
    }
    Ok(summary)
}

/// (slope, intercept, residual norm) of the least-squares line, or None
/// with fewer than two distinct abscissae.
pub fn least_squares(points: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    let m = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        .sqrt();
    Some((slope, intercept, residual))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshSummary {
    pub rows: Vec<SummaryRow>,
}

impl MeshSummary {
    /// Largest over smallest total iteration count.
    pub fn iteration_ratio(&self) -> f64 {
        let its = self.rows.iter().map(|r| r.iterations as f64);
        let max = its.clone().fold(0.0, f64::max);
        let min = its.fold(f64::INFINITY, f64::min);
        if min == 0.0 {
            if max == 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            max / min
        }
    }
}

/// Solves the discretized functional at every node count with the same ε.
pub fn run_mesh_sweep(cfg: &ExperimentConfig) -> Result<MeshSummary> {
    cfg.validate()?;
    let meshes = cfg
        .mesh_sweep
        .as_ref()
        .ok_or_else(|| HarnessError::config("mesh_sweep", "required for a mesh sweep"))?;
    if cfg.problem != "functional" {
        return Err(HarnessError::config(
            "problem",
            format!("mesh sweeps need `functional`, got `{}`", cfg.problem),
        ));
    }
    let outcomes: Vec<RunOutcome> = meshes
        .par_iter()
        .map(|&nodes| {
            let mut row_cfg = cfg.clone();
            row_cfg.n = nodes;
            row_cfg.mesh_sweep = None;
            let path = cfg.out.as_ref().map(|d| d.join(format!("mesh-{nodes}.jsonl")));
            execute(&row_cfg, path)
        })
        .collect::<Result<_>>()?;
    let rows: Vec<SummaryRow> = outcomes
        .iter()
        .zip(meshes)
        .map(|(o, nodes)| o.summary_row(format!("mesh-{nodes}")))
        .collect();
    if let Some(dir) = &cfg.out {
        write_summary(&dir.join("summary.csv"), &rows)?;
    }
    Ok(MeshSummary { rows })
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let csv_err = |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| csv_err(e.into_error().into()))?;
    record::write_file(path, &String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Worst finite-difference error of orders 1..=max_order at `x`.
pub fn check_oracle(problem: &dyn ProblemOracle, x: &arpbs_core::PrimalVector) -> Result<Vec<(usize, f64)>> {
    (1..=problem.max_order())
        .map(|order| Ok((order, arpbs_core::fd_check_oracle(problem, x, order)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn least_squares_recovers_exact_line() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 2.0 * i as f64 - 1.0)).collect();
        let (s, b, res) = least_squares(&pts).unwrap();
        assert!((s - 2.0).abs() < 1e-12 && (b + 1.0).abs() < 1e-12 && res < 1e-12);
        assert!(least_squares(&pts[..1]).is_none());
        assert!(least_squares(&[(1.0, 0.0), (1.0, 2.0)]).is_none());
    }

    #[test]
    fn iteration_ratio_handles_zero_rows() {
        let row = |iterations| SummaryRow {
            label: String::new(),
            problem: String::new(),
            n: 1,
            r: 2.0,
            p: 2,
            beta: 1.0,
            epsilon: 1.0,
            status: "Converged".into(),
            iterations,
            successful: 0,
            successful_before_termination: 0,
            f_evals: 0,
            deriv_evals: 0,
            inner_iters: 0,
            sigma_max_observed: 1.0,
            final_f: 0.0,
            final_grad_dual_norm: 0.0,
            violations: 0,
            complexity_bound: None,
            within_bound: None,
        };
        assert_eq!(
            MeshSummary {
                rows: vec![row(0), row(0)]
            }
            .iteration_ratio(),
            1.0
        );
        assert_eq!(
            MeshSummary {
                rows: vec![row(4), row(8)]
            }
            .iteration_ratio(),
            2.0
        );
        assert!(MeshSummary {
            rows: vec![row(0), row(8)]
        }
        .iteration_ratio()
        .is_infinite());
    }
}
