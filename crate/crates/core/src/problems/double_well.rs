use crate::error::{invalid, Result};
use crate::geometry::{NormedSpace, PrimalVector};
use crate::tensor::SymmetricTensor;

use super::{check_dim, check_order, diagonal_form_factor, HolderSource, ProblemMetadata, ProblemOracle};

/// f(x) = Σ (xᵢ⁴/4 − xᵢ²/2). All derivative tensors are diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubleWell {
    n: usize,
    p: usize,
}

impl DoubleWell {
    /// `p` is the natural model order, 1 to 4.
    pub fn new(n: usize, p: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n", "dimension must be positive"));
        }
        if !(1..=4).contains(&p) {
            return Err(invalid("p", format!("double-well supports orders 1..=4, got {p}")));
        }
        Ok(Self { n, p })
    }
}

impl ProblemOracle for DoubleWell {
    fn id(&self) -> String {
        "double-well".into()
    }

    fn dim(&self) -> usize {
        self.n
    }

    fn max_order(&self) -> usize {
        4
    }

    fn eval_f(&self, x: &PrimalVector) -> Result<f64> {
        check_dim(x, self.n)?;
        Ok(x.as_slice().iter().map(|&v| 0.25 * v.powi(4) - 0.5 * v * v).sum())
    }

    fn eval_derivative(&self, x: &PrimalVector, order: usize) -> Result<SymmetricTensor> {
        check_dim(x, self.n)?;
        check_order(order, self.max_order())?;
        let xs = x.as_slice();
        let diag: Vec<f64> = match order {
            0 => return Ok(SymmetricTensor::scalar(self.eval_f(x)?)),
            1 => return SymmetricTensor::from_entries(1, self.n, xs.iter().map(|&v| v * v * v - v).collect()),
            2 => xs.iter().map(|&v| 3.0 * v * v - 1.0).collect(),
            3 => xs.iter().map(|&v| 6.0 * v).collect(),
            _ => vec![6.0; self.n],
        };
        Ok(SymmetricTensor::diagonal(order, &diag))
    }

    fn metadata(&self) -> ProblemMetadata {
        ProblemMetadata {
            p: self.p,
            beta: 1.0,
            f_low: Some(-0.25 * self.n as f64),
            holder_source: HolderSource::Analytic,
        }
    }

    fn holder_constant(&self, space: &NormedSpace, p: usize, beta: f64, box_radius: f64) -> Option<f64> {
        if beta != 1.0 {
            return None;
        }
        let r = space.r();
        let rr = box_radius.abs();
        // ∇ᵖf(x) − ∇ᵖf(y) is diagonal with entries cᵢδᵢ, |cᵢ| bounded over the box;
        // Hölder's inequality over p + 1 factors gives the dimension factor.
        let diag_bound = match p {
            1 => (3.0 * rr * rr - 1.0).max(1.0),
            2 => 6.0 * rr,
            3 => 6.0,
            4 => return Some(0.0),
            _ => return None,
        };
        Some(diag_bound * diagonal_form_factor(self.n, p + 1, r))
    }

    fn default_start(&self) -> PrimalVector {
        const PATTERN: [f64; 3] = [1.5, 0.6, -0.3];
        PrimalVector::from_raw((0..self.n).map(|i| PATTERN[i % 3]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::fd_check_oracle;

    #[test]
    fn fd_check_at_ones() {
        let dw = DoubleWell::new(4, 2).unwrap();
        let x = PrimalVector::new(vec![1.0; 4]).unwrap();
        assert!(fd_check_oracle(&dw, &x, 1).unwrap() <= 1e-6);
        assert!(fd_check_oracle(&dw, &x, 2).unwrap() <= 1e-6);
        assert!(fd_check_oracle(&dw, &x, 3).unwrap() <= 1e-6);
    }

    #[test]
    fn minima_reach_lower_bound() {
        let dw = DoubleWell::new(3, 2).unwrap();
        let x = PrimalVector::new(vec![1.0, -1.0, 1.0]).unwrap();
        assert_eq!(dw.eval_f(&x).unwrap(), dw.metadata().f_low.unwrap());
    }

    #[test]
    fn rejects_bad_order() {
        assert!(DoubleWell::new(2, 0).is_err());
        assert!(DoubleWell::new(2, 5).is_err());
    }
}
