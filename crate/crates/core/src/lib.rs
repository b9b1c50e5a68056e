//! Adaptive higher-order regularization for unconstrained minimization in
//! ℓʳ spaces, 1 < r < ∞, when the p-th derivative is β-Hölder continuous.

// `!(x > 0.0)` deliberately rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod inner;
pub mod problems;
pub mod psi;
pub mod solver;
pub mod tensor;

pub use error::{Error, Result};
pub use geometry::{DualVector, NormedSpace, PrimalVector};
pub use inner::{minimize_model, InnerConfig, InnerResult, InnerTermination};
pub use problems::{builtin_suite, by_id, fd_check_oracle, ProblemMetadata, ProblemOracle, SuiteCase};
pub use psi::PsiSpec;
pub use solver::{check_trajectory, solve, CheckKind, IterationRecord, OuterConfig, RunRecord, RunStatus, Violation};
pub use tensor::{factorial, RayPolynomial, RegularizedModel, SymmetricTensor, TaylorModel};
