use crate::error::{invalid, Result};
use crate::geometry::{NormedSpace, PrimalVector};
use crate::tensor::SymmetricTensor;

use super::{check_dim, check_order, diagonal_form_factor, HolderSource, ProblemMetadata, ProblemOracle};

/// f(x) = ½xᵀAx − bᵀx with A = tridiag(−1, 3, −1) and b = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalQuadratic {
    n: usize,
}

impl TridiagonalQuadratic {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n", "dimension must be positive"));
        }
        Ok(Self { n })
    }

    fn apply_a(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| {
                let mut v = 3.0 * x[i];
                if i > 0 {
                    v -= x[i - 1];
                }
                if i + 1 < n {
                    v -= x[i + 1];
                }
                v
            })
            .collect()
    }

    /// A⁻¹b by the Thomas algorithm.
    pub fn minimizer(&self) -> PrimalVector {
        let n = self.n;
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        for i in 0..n {
            let denom = 3.0 + if i > 0 { c[i - 1] } else { 0.0 };
            c[i] = -1.0 / denom;
            d[i] = (1.0 + if i > 0 { d[i - 1] } else { 0.0 }) / denom;
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            x[i] = d[i] - c[i] * if i + 1 < n { x[i + 1] } else { 0.0 };
        }
        PrimalVector::from_raw(x)
    }
}

impl ProblemOracle for TridiagonalQuadratic {
    fn id(&self) -> String {
        "quadratic".into()
    }

    fn dim(&self) -> usize {
        self.n
    }

    fn max_order(&self) -> usize {
        3
    }

    fn eval_f(&self, x: &PrimalVector) -> Result<f64> {
        check_dim(x, self.n)?;
        let ax = self.apply_a(x.as_slice());
        Ok(x.as_slice().iter().zip(&ax).map(|(xi, ai)| 0.5 * xi * ai - xi).sum())
    }

    fn eval_derivative(&self, x: &PrimalVector, order: usize) -> Result<SymmetricTensor> {
        check_dim(x, self.n)?;
        check_order(order, self.max_order())?;
        let n = self.n;
        match order {
            0 => Ok(SymmetricTensor::scalar(self.eval_f(x)?)),
            1 => {
                let g = self.apply_a(x.as_slice()).into_iter().map(|v| v - 1.0).collect();
                SymmetricTensor::from_entries(1, n, g)
            }
            2 => Ok(SymmetricTensor::from_fn(2, n, |idx| match idx[0].abs_diff(idx[1]) {
                0 => 3.0,
                1 => -1.0,
                _ => 0.0,
            })),
            _ => Ok(SymmetricTensor::zeros(order, n)),
        }
    }

    fn metadata(&self) -> ProblemMetadata {
        let xs = self.minimizer();
        let b_dot = xs.as_slice().iter().sum::<f64>();
        ProblemMetadata {
            p: 2,
            beta: 1.0,
            f_low: Some(-0.5 * b_dot),
            holder_source: HolderSource::Analytic,
        }
    }

    fn holder_constant(&self, space: &NormedSpace, p: usize, beta: f64, _box_radius: f64) -> Option<f64> {
        match p {
            // ‖A‖ ≤ 5 in every ℓʳ operator norm for r ≤ 2, times the ℓ² embedding factor above 2.
            1 if beta == 1.0 => Some(5.0 * diagonal_form_factor(self.n, 2, space.r())),
            2 | 3 => Some(0.0),
            _ => None,
        }
    }

    fn default_start(&self) -> PrimalVector {
        PrimalVector::from_raw((0..self.n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect())
    }
}
