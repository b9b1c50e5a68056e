//! Problem oracles: function values and derivative tensors, plus the
//! built-in test set and derivative checkers.

mod checks;
mod double_well;
mod functional;
mod holder;
mod quadratic;
mod rosenbrock;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{NormedSpace, PrimalVector};
use crate::tensor::SymmetricTensor;

pub use checks::{fd_check_oracle, sampled_holder_quotient, tensor_norm_lower_bound};
pub use double_well::DoubleWell;
pub use functional::DiscretizedFunctional;
pub use holder::HolderPower;
pub use quadratic::TridiagonalQuadratic;
pub use rosenbrock::Rosenbrock;

/// Where a Hölder constant comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HolderSource {
    Analytic,
    /// Sampled maximum inflated by 1.5.
    SampledInflated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemMetadata {
    /// Natural model order.
    pub p: usize,
    pub beta: f64,
    pub f_low: Option<f64>,
    pub holder_source: HolderSource,
}

/// A smooth objective on ℝⁿ with derivative tensors up to `max_order`.
pub trait ProblemOracle: Send + Sync {
    fn id(&self) -> String;

    fn dim(&self) -> usize;

    fn max_order(&self) -> usize;

    fn eval_f(&self, x: &PrimalVector) -> Result<f64>;

    /// Order-ℓ derivative at x as a symmetric tensor; order 0 is f itself.
    fn eval_derivative(&self, x: &PrimalVector, order: usize) -> Result<SymmetricTensor>;

    fn metadata(&self) -> ProblemMetadata;

    /// Constant L with ‖∇ᵖf(x) − ∇ᵖf(y)‖ ≤ L‖x−y‖^β for all x, y with
    /// ‖·‖_∞ ≤ `box_radius`, in the operator norm induced by `space`.
    fn holder_constant(&self, space: &NormedSpace, p: usize, beta: f64, box_radius: f64) -> Option<f64>;

    fn default_start(&self) -> PrimalVector {
        PrimalVector::zeros(self.dim())
    }
}

impl<T: ProblemOracle + ?Sized> ProblemOracle for Arc<T> {
    fn id(&self) -> String {
        (**self).id()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn max_order(&self) -> usize {
        (**self).max_order()
    }
    fn eval_f(&self, x: &PrimalVector) -> Result<f64> {
        (**self).eval_f(x)
    }
    fn eval_derivative(&self, x: &PrimalVector, order: usize) -> Result<SymmetricTensor> {
        (**self).eval_derivative(x, order)
    }
    fn metadata(&self) -> ProblemMetadata {
        (**self).metadata()
    }
    fn holder_constant(&self, space: &NormedSpace, p: usize, beta: f64, box_radius: f64) -> Option<f64> {
        (**self).holder_constant(space, p, beta, box_radius)
    }
    fn default_start(&self) -> PrimalVector {
        (**self).default_start()
    }
}

/// Registered problem ids with one-line descriptions.
pub const PROBLEM_IDS: [(&str, &str); 5] = [
    (
        "quadratic",
        "convex quadratic with tridiagonal (3, -1) matrix and unit linear term",
    ),
    ("double-well", "separable sum of x^4/4 - x^2/2"),
    (
        "holder",
        "separable sum of |x|^(1+beta)/(1+beta); beta-Holder gradient, p = 1",
    ),
    ("rosenbrock", "two-dimensional Rosenbrock function"),
    (
        "functional",
        "trapezoid discretization of int u'^2/2 + cos(u) with zero boundary; n is the node count",
    ),
];

/// Builds a problem by id. `n` is the dimension, or the node count for
/// `functional`; `p` and `beta` select the order variant where one exists.
pub fn by_id(id: &str, n: usize, p: usize, beta: f64) -> Result<Box<dyn ProblemOracle>> {
    Ok(match id {
        "quadratic" => Box::new(TridiagonalQuadratic::new(n)?),
        "double-well" => Box::new(DoubleWell::new(n, p)?),
        "holder" => Box::new(HolderPower::new(n, beta)?),
        "rosenbrock" => {
            if n != 2 {
                return Err(Error::DimensionMismatch { expected: 2, got: n });
            }
            Box::new(Rosenbrock::new(p)?)
        }
        "functional" => Box::new(DiscretizedFunctional::new(n)?),
        other => return Err(Error::UnknownProblem(other.to_string())),
    })
}

/// One built-in test case: a problem, the ℓʳ space it is solved in and
/// the solver order.
#[derive(Clone)]
pub struct SuiteCase {
    pub name: String,
    pub problem: Arc<dyn ProblemOracle>,
    pub space: NormedSpace,
    pub p: usize,
    pub beta: f64,
}

impl std::fmt::Debug for SuiteCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SuiteCase")
            .field("name", &self.name)
            .field("r", &self.space.r())
            .field("p", &self.p)
            .field("beta", &self.beta)
            .finish()
    }
}

/// The built-in test set.
pub fn builtin_suite() -> Vec<SuiteCase> {
    let mut out = Vec::new();
    let mut push = |problem: Arc<dyn ProblemOracle>, r: f64| {
        let meta = problem.metadata();
        let space = NormedSpace::new(problem.dim(), r).expect("suite spaces are valid");
        out.push(SuiteCase {
            name: format!("{}[n={},r={r},p={}]", problem.id(), problem.dim(), meta.p),
            problem,
            space,
            p: meta.p,
            beta: meta.beta,
        });
    };
    let quadratic: Arc<dyn ProblemOracle> = Arc::new(TridiagonalQuadratic::new(5).expect("valid"));
    push(quadratic.clone(), 2.0);
    push(quadratic, 3.0);
    let dw2: Arc<dyn ProblemOracle> = Arc::new(DoubleWell::new(4, 2).expect("valid"));
    push(dw2.clone(), 2.0);
    push(dw2, 1.5);
    push(Arc::new(DoubleWell::new(3, 3).expect("valid")), 3.0);
    let holder: Arc<dyn ProblemOracle> = Arc::new(HolderPower::new(3, 0.5).expect("valid"));
    push(holder.clone(), 2.0);
    push(holder, 1.5);
    let rosen: Arc<dyn ProblemOracle> = Arc::new(Rosenbrock::new(2).expect("valid"));
    for r in [1.5, 2.0, 3.0] {
        push(rosen.clone(), r);
    }
    push(Arc::new(DiscretizedFunctional::new(32).expect("valid")), 2.0);
    out
}

pub(crate) fn check_dim(x: &PrimalVector, n: usize) -> Result<()> {
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    Ok(())
}

pub(crate) fn check_order(order: usize, max: usize) -> Result<()> {
    if order > max {
        return Err(Error::MissingDerivative { order, max });
    }
    Ok(())
}

/// sup Σ |u₁ᵢ|⋯|u_ℓᵢ| over unit vectors of ℓʳ(ℝⁿ): n^{max(0, 1 − ℓ/r)}.
pub(crate) fn diagonal_form_factor(n: usize, order: usize, r: f64) -> f64 {
    (n as f64).powf((1.0 - order as f64 / r).max(0.0))
}
