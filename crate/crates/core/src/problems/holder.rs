use crate::error::{invalid, Result};
use crate::geometry::{signed_pow, NormedSpace, PrimalVector};
use crate::tensor::SymmetricTensor;

use super::{check_dim, check_order, HolderSource, ProblemMetadata, ProblemOracle};

/// f(x) = Σ |xᵢ|^{1+β}/(1+β) with gradient sign(xᵢ)|xᵢ|^β. Only first
/// derivatives exist at the origin, so the natural order is p = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct HolderPower {
    n: usize,
    beta: f64,
}

impl HolderPower {
    pub fn new(n: usize, beta: f64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n", "dimension must be positive"));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(invalid(
                "beta",
                format!("Holder family needs beta in (0, 1), got {beta}"),
            ));
        }
        Ok(Self { n, beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl ProblemOracle for HolderPower {
    fn id(&self) -> String {
        "holder".into()
    }

    fn dim(&self) -> usize {
        self.n
    }

    fn max_order(&self) -> usize {
        1
    }

    fn eval_f(&self, x: &PrimalVector) -> Result<f64> {
        check_dim(x, self.n)?;
        let e = 1.0 + self.beta;
        Ok(x.as_slice().iter().map(|v| v.abs().powf(e) / e).sum())
    }

    fn eval_derivative(&self, x: &PrimalVector, order: usize) -> Result<SymmetricTensor> {
        check_dim(x, self.n)?;
        check_order(order, self.max_order())?;
        if order == 0 {
            return Ok(SymmetricTensor::scalar(self.eval_f(x)?));
        }
        let g = x.as_slice().iter().map(|&v| signed_pow(v, self.beta)).collect();
        SymmetricTensor::from_entries(1, self.n, g)
    }

    fn metadata(&self) -> ProblemMetadata {
        ProblemMetadata {
            p: 1,
            beta: self.beta,
            f_low: Some(0.0),
            holder_source: HolderSource::Analytic,
        }
    }

    /// Scalar constant 2^{1−β} times n^{max(0, 1/r' − β/r)} from comparing
    /// the ℓ^{βr'} and ℓʳ norms.
    fn holder_constant(&self, space: &NormedSpace, p: usize, beta: f64, _box_radius: f64) -> Option<f64> {
        if p != 1 || beta != self.beta {
            return None;
        }
        let exponent = (1.0 / space.r_dual() - self.beta / space.r()).max(0.0);
        Some(2f64.powf(1.0 - self.beta) * (self.n as f64).powf(exponent))
    }

    fn default_start(&self) -> PrimalVector {
        PrimalVector::from_raw((0..self.n).map(|i| if i % 2 == 0 { 1.0 } else { -0.6 }).collect())
    }
}
