use crate::error::{invalid, Result};
use crate::geometry::{NormedSpace, PrimalVector};
use crate::tensor::SymmetricTensor;

use super::{check_dim, check_order, diagonal_form_factor, HolderSource, ProblemMetadata, ProblemOracle};

/// Trapezoid discretization of F(u) = ∫₀¹ u′²/2 + cos u dt with
/// u(0) = u(1) = 0 on N uniform nodes (boundaries included).
///
/// The unknowns are the N − 2 interior values scaled as vᵢ = √h·uᵢ, so the
/// Euclidean norm of v is the discrete L² norm of u. In these coordinates
///
/// ```text
/// f(v) = (1/2h²) Σ (vᵢ₊₁ − vᵢ)² + h + h Σ cos(vᵢ/√h)
/// ```
///
/// and its only critical point is v = 0 with f = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedFunctional {
    nodes: usize,
    h: f64,
    weights: Vec<f64>,
}

impl DiscretizedFunctional {
    pub fn new(nodes: usize) -> Result<Self> {
        if nodes < 3 {
            return Err(invalid("n", format!("functional needs at least 3 nodes, got {nodes}")));
        }
        let h = 1.0 / (nodes - 1) as f64;
        let mut weights = vec![h; nodes];
        weights[0] = 0.5 * h;
        weights[nodes - 1] = 0.5 * h;
        Ok(Self { nodes, h, weights })
    }

    pub fn mesh_size(&self) -> usize {
        self.nodes
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Trapezoid weights over all N nodes; they sum to 1.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Interior samples of a grid function u(t), in scaled coordinates.
    pub fn sample(&self, u: impl Fn(f64) -> f64) -> PrimalVector {
        let s = self.h.sqrt();
        PrimalVector::from_raw((1..self.nodes - 1).map(|i| s * u(i as f64 * self.h)).collect())
    }

    /// Node values u (boundaries included) from scaled interior coordinates.
    pub fn node_values(&self, v: &PrimalVector) -> Vec<f64> {
        let s = self.h.sqrt();
        let mut u = vec![0.0; self.nodes];
        for (ui, vi) in u[1..self.nodes - 1].iter_mut().zip(v.as_slice()) {
            *ui = vi / s;
        }
        u
    }

    fn interior(&self) -> usize {
        self.nodes - 2
    }
}

impl ProblemOracle for DiscretizedFunctional {
    fn id(&self) -> String {
        "functional".into()
    }

    fn dim(&self) -> usize {
        self.interior()
    }

    fn max_order(&self) -> usize {
        3
    }

    fn eval_f(&self, x: &PrimalVector) -> Result<f64> {
        check_dim(x, self.interior())?;
        let u = self.node_values(x);
        let dirichlet: f64 = u.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() / (2.0 * self.h);
        let potential: f64 = u.iter().zip(&self.weights).map(|(ui, wi)| wi * ui.cos()).sum();
        Ok(dirichlet + potential)
    }

    fn eval_derivative(&self, x: &PrimalVector, order: usize) -> Result<SymmetricTensor> {
        let n = self.interior();
        check_dim(x, n)?;
        check_order(order, self.max_order())?;
        let h = self.h;
        let s = h.sqrt();
        let v = x.as_slice();
        let inv_h2 = 1.0 / (h * h);
        match order {
            0 => Ok(SymmetricTensor::scalar(self.eval_f(x)?)),
            1 => {
                let g = (0..n)
                    .map(|i| {
                        let left = if i > 0 { v[i - 1] } else { 0.0 };
                        let right = if i + 1 < n { v[i + 1] } else { 0.0 };
                        (2.0 * v[i] - left - right) * inv_h2 - s * (v[i] / s).sin()
                    })
                    .collect();
                SymmetricTensor::from_entries(1, n, g)
            }
            2 => Ok(SymmetricTensor::from_fn(2, n, |idx| match idx[0].abs_diff(idx[1]) {
                0 => 2.0 * inv_h2 - (v[idx[0]] / s).cos(),
                1 => -inv_h2,
                _ => 0.0,
            })),
            _ => {
                let diag: Vec<f64> = v.iter().map(|&vi| (vi / s).sin() / s).collect();
                Ok(SymmetricTensor::diagonal(3, &diag))
            }
        }
    }

    fn metadata(&self) -> ProblemMetadata {
        ProblemMetadata {
            p: 2,
            beta: 1.0,
            f_low: Some(1.0),
            holder_source: HolderSource::Analytic,
        }
    }

    /// Only the cosine term is non-quadratic; its k-th derivative in v is
    /// diagonal with entries bounded by h^{1 − k/2}.
    fn holder_constant(&self, space: &NormedSpace, p: usize, beta: f64, _box_radius: f64) -> Option<f64> {
        if beta != 1.0 {
            return None;
        }
        let n = self.interior();
        let r = space.r();
        let h = self.h;
        match p {
            1 => Some((4.0 / (h * h)) * diagonal_form_factor(n, 2, r) + diagonal_form_factor(n, 2, r)),
            2 => Some(h.powf(-0.5) * diagonal_form_factor(n, 3, r)),
            3 => Some(h.powf(-1.0) * diagonal_form_factor(n, 4, r)),
            _ => None,
        }
    }

    /// u₀(t) = 4 sin(πt).
    fn default_start(&self) -> PrimalVector {
        self.sample(|t| 4.0 * (std::f64::consts::PI * t).sin())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::fd_check_oracle;

    #[test]
    fn value_at_zero_is_one() {
        for nodes in [3, 32, 128, 512] {
            let f = DiscretizedFunctional::new(nodes).unwrap();
            let w: f64 = f.weights().iter().sum();
            assert!((w - 1.0).abs() < 1e-13);
            let v = f.eval_f(&PrimalVector::zeros(nodes - 2)).unwrap();
            assert!((v - 1.0).abs() < 1e-13, "N={nodes}: {v}");
        }
    }

    #[test]
    fn scaled_norm_matches_l2_norm() {
        // ∫ sin²(πt) dt = 1/2
        let f = DiscretizedFunctional::new(257).unwrap();
        let v = f.sample(|t| (std::f64::consts::PI * t).sin());
        let norm = NormedSpace::euclidean(f.dim()).unwrap().norm(&v).unwrap();
        assert!((norm * norm - 0.5).abs() < 1e-12);
    }

    #[test]
    fn quadrature_converges_under_refinement() {
        let u = |t: f64| t * (1.0 - t) * (3.0 * t).exp();
        let value = |nodes: usize| {
            let f = DiscretizedFunctional::new(nodes).unwrap();
            f.eval_f(&f.sample(u)).unwrap()
        };
        let gaps: Vec<f64> = [8, 32, 128]
            .iter()
            .map(|&n| (value(n) - value(4 * (n - 1) + 1)).abs())
            .collect();
        assert!(gaps[1] < gaps[0] && gaps[2] < gaps[1], "{gaps:?}");
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let f = DiscretizedFunctional::new(12).unwrap();
        let x = f.default_start();
        for order in 1..=3 {
            assert!(fd_check_oracle(&f, &x, order).unwrap() <= 1e-6, "order {order}");
        }
    }

    #[test]
    fn too_few_nodes_rejected() {
        assert!(DiscretizedFunctional::new(2).is_err());
    }
}
