use std::path::{Path, PathBuf};

use arpbs_core::{NormedSpace, OuterConfig, PrimalVector, ProblemOracle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Starting point selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum StartSpec {
    /// The problem's own starting point.
    Default,
    Zeros,
    Ones,
    Explicit {
        values: Vec<f64>,
    },
    /// Uniform in [−scale, scale]ⁿ, drawn from the experiment seed.
    Random {
        scale: f64,
    },
}

impl StartSpec {
    pub fn resolve(&self, problem: &dyn ProblemOracle, seed: u64) -> Result<PrimalVector> {
        let n = problem.dim();
        let x = match self {
            StartSpec::Default => return Ok(problem.default_start()),
            StartSpec::Zeros => vec![0.0; n],
            StartSpec::Ones => vec![1.0; n],
            StartSpec::Explicit { values } => {
                if values.len() != n {
                    return Err(HarnessError::config(
                        "start.values",
                        format!("expected {n} values, got {}", values.len()),
                    ));
                }
                values.clone()
            }
            StartSpec::Random { scale } => {
                if !(*scale > 0.0 && scale.is_finite()) {
                    return Err(HarnessError::config("start.scale", "must be positive and finite"));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..n).map(|_| rng.random_range(-scale..=*scale)).collect()
            }
        };
        PrimalVector::new(x).map_err(|e| HarnessError::config("start.values", e.to_string()))
    }
}

/// Geometric grid from `start` to `stop` inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonGrid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl EpsilonGrid {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        // Base 10 keeps decade grids exact; the endpoints are pinned.
        let (a, b) = (self.start.log10(), self.stop.log10());
        let last = self.points - 1;
        (0..self.points)
            .map(|i| match i {
                0 => self.start,
                i if i == last => self.stop,
                i => 10f64.powf(a + i as f64 / last as f64 * (b - a)),
            })
            .collect()
    }
}

/// One experiment: problem, space, start, solver parameters and optional
/// sweeps. `solver.p` and `solver.beta` also select the problem variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: String,
    /// Dimension, or node count for `functional`.
    pub n: usize,
    pub r: f64,
    pub seed: u64,
    /// Output directory; nothing is written when absent.
    pub out: Option<PathBuf>,
    pub mesh_sweep: Option<Vec<usize>>,
    pub start: StartSpec,
    pub solver: OuterConfig,
    pub epsilon_sweep: Option<EpsilonGrid>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: "quadratic".into(),
            n: 5,
            r: 2.0,
            seed: 0,
            out: None,
            mesh_sweep: None,
            start: StartSpec::Default,
            solver: OuterConfig::default(),
            epsilon_sweep: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(HarnessError::config("n", "must be positive"));
        }
        if !(self.r > 1.0 && self.r.is_finite()) {
            return Err(HarnessError::config(
                "r",
                format!("must be finite and > 1, got {}", self.r),
            ));
        }
        self.solver.validate()?;
        if let Some(grid) = &self.epsilon_sweep {
            if grid.points == 0 {
                return Err(HarnessError::config("epsilon_sweep.points", "grid must be nonempty"));
            }
            for (name, v) in [("epsilon_sweep.start", grid.start), ("epsilon_sweep.stop", grid.stop)] {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(HarnessError::config(name, "must be positive and finite"));
                }
            }
        }
        if let Some(mesh) = &self.mesh_sweep {
            if mesh.is_empty() {
                return Err(HarnessError::config("mesh_sweep", "list must be nonempty"));
            }
            if let Some(&bad) = mesh.iter().find(|&&m| m < 3) {
                return Err(HarnessError::config(
                    "mesh_sweep",
                    format!("node count {bad} is below 3"),
                ));
            }
        }
        Ok(())
    }

    pub fn build_problem(&self) -> Result<Box<dyn ProblemOracle>> {
        arpbs_core::by_id(&self.problem, self.n, self.solver.p, self.solver.beta).map_err(|e| match e {
            arpbs_core::Error::UnknownProblem(id) => {
                HarnessError::config("problem", format!("unknown problem id `{id}`"))
            }
            arpbs_core::Error::DimensionMismatch { expected, got } => HarnessError::config(
                "n",
                format!("problem `{}` needs n = {expected}, got {got}", self.problem),
            ),
            other => other.into(),
        })
    }

    pub fn space_for(&self, problem: &dyn ProblemOracle) -> Result<NormedSpace> {
        Ok(NormedSpace::new(problem.dim(), self.r)?)
    }
}
