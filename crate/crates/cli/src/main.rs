use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use arpbs_cli::{
    check_oracle, run_epsilon_sweep, run_mesh_sweep, run_single, EpsilonGrid, ExperimentConfig, HarnessError,
};
use clap::{Args, Parser, Subcommand};

const EXIT_VIOLATIONS: u8 = 1;
const EXIT_CONFIG: u8 = 2;

/// Appends a line to the report; writing to a `String` cannot fail.
macro_rules! say {
    ($out:expr, $($arg:tt)*) => {{
        let _ = writeln!($out, $($arg)*);
    }};
}

/// Adaptive higher-order regularization solver and experiment harness.
#[derive(Parser)]
#[command(name = "arpbs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem and verify its trajectory.
    Run(Common),
    /// Sweep ε and fit the growth exponent of the successful-iteration count.
    SweepEps {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        eps_start: Option<f64>,
        #[arg(long)]
        eps_stop: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Solve the discretized functional at several node counts.
    SweepMesh {
        #[command(flatten)]
        common: Common,
        /// Comma-separated node counts.
        #[arg(long, value_delimiter = ',')]
        mesh: Option<Vec<usize>>,
    },
    /// Compare oracle derivatives with finite differences at the start point.
    CheckOracle {
        #[command(flatten)]
        common: Common,
        /// Largest acceptable relative error.
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
    },
    /// Print the registered problem ids.
    ListProblems,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file; flags override its values.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Problem id; see `list-problems`.
    #[arg(long)]
    problem: Option<String>,
    /// Dimension, or node count for `functional`.
    #[arg(long)]
    n: Option<usize>,
    /// Exponent of the ℓʳ norm, r > 1.
    #[arg(long)]
    r: Option<f64>,
    /// Taylor model order.
    #[arg(long)]
    p: Option<usize>,
    /// Hölder exponent of the p-th derivative, in (0, 1].
    #[arg(long)]
    beta: Option<f64>,
    /// Target dual norm of the gradient.
    #[arg(long)]
    eps: Option<f64>,
    /// Initial regularization weight.
    #[arg(long)]
    sigma0: Option<f64>,
    /// Seed for random start points.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for record files and the CSV summary.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = &self.problem {
            cfg.problem = v.clone();
        }
        if let Some(v) = self.n {
            cfg.n = v;
        }
        if let Some(v) = self.r {
            cfg.r = v;
        }
        if let Some(v) = self.p {
            cfg.solver.p = v;
        }
        if let Some(v) = self.beta {
            cfg.solver.beta = v;
        }
        if let Some(v) = self.eps {
            cfg.solver.epsilon = v;
        }
        if let Some(v) = self.sigma0 {
            cfg.solver.sigma0 = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.out {
            cfg.out = Some(v.clone());
        }
        if cfg.out.is_none() {
            cfg.out = Some(PathBuf::from("runs"));
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let mut report = String::new();
    let result = dispatch(cli.command, &mut report);
    // A closed pipe (e.g. `| head`) is not an error worth reporting.
    let _ = std::io::stdout().lock().write_all(report.as_bytes());
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::from(EXIT_VIOLATIONS)
            }
        }
    }
}

fn status(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VIOLATIONS)
    }
}

fn dispatch(command: Command, out: &mut String) -> Result<ExitCode, HarnessError> {
    match command {
        Command::ListProblems => {
            for (id, description) in arpbs_core::problems::PROBLEM_IDS {
                say!(out, "{id:12} {description}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Run(common) => {
            let cfg = common.load()?;
            let o = run_single(&cfg)?;
            say!(
                out,
                "{}: {:?} after {} iterations ({} successful), f = {:.12e}, |g|* = {:.3e}, f_evals = {}, deriv_evals = {}",
                o.problem,
                o.run.status,
                o.run.iterations(),
                o.run.successful_count(),
                o.run.final_f,
                o.run.final_grad_dual_norm,
                o.run.f_evals,
                o.run.deriv_evals
            );
            for v in &o.violations {
                say!(out, "violation {v}");
            }
            if let Some(path) = &o.record_path {
                say!(out, "record: {}", path.display());
            }
            Ok(status(o.violations.is_empty()))
        }
        Command::SweepEps {
            common,
            eps_start,
            eps_stop,
            points,
        } => {
            let mut cfg = common.load()?;
            let mut grid = cfg.epsilon_sweep.clone().unwrap_or(EpsilonGrid {
                start: 1e-1,
                stop: 1e-4,
                points: 4,
            });
            grid.start = eps_start.unwrap_or(grid.start);
            grid.stop = eps_stop.unwrap_or(grid.stop);
            grid.points = points.unwrap_or(grid.points);
            cfg.epsilon_sweep = Some(grid);
            let s = run_epsilon_sweep(&cfg)?;
            say!(
                out,
                "{:>10} {:>10} {:>6} {:>6} {:>8} {:>8} {:>12} {:>12}",
                "eps",
                "status",
                "iters",
                "|S|",
                "f_evals",
                "d_evals",
                "sigma_max",
                "bound"
            );
            for r in &s.rows {
                say!(
                    out,
                    "{:>10.3e} {:>10} {:>6} {:>6} {:>8} {:>8} {:>12.4e} {:>12}",
                    r.epsilon,
                    r.status,
                    r.iterations,
                    r.successful,
                    r.f_evals,
                    r.deriv_evals,
                    r.sigma_max_observed,
                    r.complexity_bound.map_or("-".into(), |b| format!("{b:.4e}"))
                );
            }
            match (s.slope, s.residual) {
                (Some(slope), Some(res)) => say!(
                    out,
                    "slope {slope:.4} (residual {res:.3e}), theoretical exponent {:.4}",
                    s.theoretical_exponent
                ),
                _ => say!(
                    out,
                    "slope unavailable, theoretical exponent {:.4}",
                    s.theoretical_exponent
                ),
            }
            let ok = s.bound_failures().next().is_none()
                && s.flagged().next().is_none()
                && s.rows.iter().all(|r| r.violations == 0)
                && s.slope_within_margin().unwrap_or(true);
            Ok(status(ok))
        }
        Command::SweepMesh { common, mesh } => {
            let mut cfg = common.load()?;
            if let Some(m) = mesh {
                cfg.mesh_sweep = Some(m);
            }
            if cfg.mesh_sweep.is_none() {
                cfg.mesh_sweep = Some(vec![32, 128, 512]);
            }
            if common.problem.is_none() && common.config.is_none() {
                cfg.problem = "functional".into();
            }
            let s = run_mesh_sweep(&cfg)?;
            say!(
                out,
                "{:>6} {:>10} {:>6} {:>6} {:>8} {:>10}",
                "N",
                "status",
                "iters",
                "|S|",
                "f_evals",
                "inner"
            );
            for (r, nodes) in s.rows.iter().zip(cfg.mesh_sweep.iter().flatten()) {
                say!(
                    out,
                    "{nodes:>6} {:>10} {:>6} {:>6} {:>8} {:>10}",
                    r.status,
                    r.iterations,
                    r.successful,
                    r.f_evals,
                    r.inner_iters
                );
            }
            say!(out, "iteration ratio {:.3}", s.iteration_ratio());
            Ok(status(s.rows.iter().all(|r| r.converged() && r.violations == 0)))
        }
        Command::CheckOracle { common, tol } => {
            let cfg = common.load()?;
            cfg.validate()?;
            let problem = cfg.build_problem()?;
            let x = cfg.start.resolve(problem.as_ref(), cfg.seed)?;
            let errors = check_oracle(problem.as_ref(), &x)?;
            for (order, err) in &errors {
                say!(out, "order {order}: relative error {err:.3e}");
            }
            Ok(status(errors.iter().all(|(_, e)| *e <= tol)))
        }
    }
}
