use crate::error::{invalid, Result};
use crate::geometry::{NormedSpace, PrimalVector};
use crate::tensor::SymmetricTensor;

use super::{check_dim, check_order, HolderSource, ProblemMetadata, ProblemOracle};

/// f(x) = 100(x₂ − x₁²)² + (1 − x₁)².
#[derive(Debug, Clone, PartialEq)]
pub struct Rosenbrock {
    p: usize,
}

impl Rosenbrock {
    pub fn new(p: usize) -> Result<Self> {
        if !(1..=4).contains(&p) {
            return Err(invalid("p", format!("rosenbrock supports orders 1..=4, got {p}")));
        }
        Ok(Self { p })
    }
}

impl ProblemOracle for Rosenbrock {
    fn id(&self) -> String {
        "rosenbrock".into()
    }

    fn dim(&self) -> usize {
        2
    }

    fn max_order(&self) -> usize {
        4
    }

    fn eval_f(&self, x: &PrimalVector) -> Result<f64> {
        check_dim(x, 2)?;
        let (a, b) = (x[0], x[1]);
        Ok(100.0 * (b - a * a).powi(2) + (1.0 - a).powi(2))
    }

    fn eval_derivative(&self, x: &PrimalVector, order: usize) -> Result<SymmetricTensor> {
        check_dim(x, 2)?;
        check_order(order, self.max_order())?;
        let (a, b) = (x[0], x[1]);
        match order {
            0 => Ok(SymmetricTensor::scalar(self.eval_f(x)?)),
            1 => SymmetricTensor::from_entries(
                1,
                2,
                vec![-400.0 * a * (b - a * a) - 2.0 * (1.0 - a), 200.0 * (b - a * a)],
            ),
            2 => {
                let off = -400.0 * a;
                SymmetricTensor::from_matrix(&[vec![1200.0 * a * a - 400.0 * b + 2.0, off], vec![off, 200.0]])
            }
            3 => Ok(SymmetricTensor::from_fn(3, 2, |idx| {
                match idx.iter().filter(|&&i| i == 1).count() {
                    0 => 2400.0 * a,
                    1 => -400.0,
                    _ => 0.0,
                }
            })),
            _ => Ok(SymmetricTensor::from_fn(4, 2, |idx| {
                if idx.iter().all(|&i| i == 0) {
                    2400.0
                } else {
                    0.0
                }
            })),
        }
    }

    fn metadata(&self) -> ProblemMetadata {
        ProblemMetadata {
            p: self.p,
            beta: 1.0,
            f_low: Some(0.0),
            holder_source: HolderSource::Analytic,
        }
    }

    /// Sum of absolute entries of ∇^{p+1}f over the box; unit vectors of any
    /// ℓʳ norm have coordinates bounded by 1.
    fn holder_constant(&self, _space: &NormedSpace, p: usize, beta: f64, box_radius: f64) -> Option<f64> {
        if beta != 1.0 {
            return None;
        }
        let rr = box_radius.abs();
        match p {
            1 => Some(1200.0 * rr * rr + 400.0 * rr + 2.0 + 800.0 * rr + 200.0),
            2 => Some(2400.0 * rr + 1200.0),
            3 => Some(2400.0),
            4 => Some(0.0),
            _ => None,
        }
    }

    fn default_start(&self) -> PrimalVector {
        PrimalVector::from_raw(vec![-1.2, 1.0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::fd_check_oracle;

    #[test]
    fn minimum_at_ones() {
        let r = Rosenbrock::new(2).unwrap();
        let x = PrimalVector::new(vec![1.0, 1.0]).unwrap();
        assert_eq!(r.eval_f(&x).unwrap(), 0.0);
        assert!(r.eval_derivative(&x, 1).unwrap().entries().iter().all(|&v| v == 0.0));
        assert!((r.eval_f(&r.default_start()).unwrap() - 24.2).abs() < 1e-12);
    }

    #[test]
    fn all_orders_match_finite_differences() {
        let r = Rosenbrock::new(3).unwrap();
        let x = PrimalVector::new(vec![-0.7, 0.4]).unwrap();
        for order in 1..=4 {
            assert!(fd_check_oracle(&r, &x, order).unwrap() <= 1e-6, "order {order}");
        }
    }
}
