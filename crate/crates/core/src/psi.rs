//! The univariate majorant Ψ(t) = −αt + Σ κᵢ t^{γᵢ} that governs the decrease
//! of one exact line minimization, and the closed-form lower bound on its
//! minimum value.
//!
//! Ψ is strictly convex on ℝ₊ with Ψ'(0) = −α < 0, so it has a unique
//! positive minimizer t*. The bound is
//!
//! ```text
//! Ψ(t*) ≤ −min(κ_A α^{γ_m/(γ_m−1)}, κ_B α^{γ₁/(γ₁−1)})
//! κ_A = (Σκᵢγᵢ)^{−1/(γ_m−1)} (1 − Σκᵢ/Σκᵢγᵢ)
//! κ_B = (Σκᵢγᵢ)^{−1/(γ₁−1)} (1 − Σκᵢ/Σκᵢγᵢ)
//! ```
//!
//! where the κ_A branch covers t* ≥ 1 (only the largest exponent matters
//! there) and the κ_B branch covers t* ≤ 1.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiSpec {
    alpha: f64,
    /// (κᵢ, γᵢ), sorted ascending by γ.
    terms: Vec<(f64, f64)>,
}

impl PsiSpec {
    pub fn new(alpha: f64, mut terms: Vec<(f64, f64)>) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(invalid("alpha", format!("must be positive, got {alpha}")));
        }
        if terms.is_empty() {
            return Err(invalid("terms", "at least one power term is required"));
        }
        for &(kappa, gamma) in &terms {
            if !(kappa > 0.0) || !kappa.is_finite() {
                return Err(invalid("kappa", format!("must be positive, got {kappa}")));
            }
            if !(gamma > 1.0) || !gamma.is_finite() {
                return Err(invalid("gamma", format!("must exceed 1, got {gamma}")));
            }
        }
        terms.sort_by(|a, b| a.1.total_cmp(&b.1));
        Ok(Self { alpha, terms })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn terms(&self) -> &[(f64, f64)] {
        &self.terms
    }

    pub fn gamma_min(&self) -> f64 {
        self.terms[0].1
    }

    pub fn gamma_max(&self) -> f64 {
        self.terms[self.terms.len() - 1].1
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(invalid("t", format!("must be nonnegative, got {t}")));
        }
        Ok(self.value(t))
    }

    fn value(&self, t: f64) -> f64 {
        -self.alpha * t + self.terms.iter().map(|&(k, g)| k * t.powf(g)).sum::<f64>()
    }

    /// Ψ'(t) for t ≥ 0.
    pub fn derivative(&self, t: f64) -> f64 {
        -self.alpha
            + self
                .terms
                .iter()
                .map(|&(k, g)| if t == 0.0 { 0.0 } else { k * g * t.powf(g - 1.0) })
                .sum::<f64>()
    }

    fn second_derivative(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(k, g)| k * g * (g - 1.0) * t.powf(g - 2.0))
            .sum()
    }

    /// Unique minimizer of Ψ over ℝ₊ and the minimum value.
    ///
    /// Newton on Ψ' safeguarded by a bisection bracket [lo, hi] with
    /// Ψ'(lo) < 0 < Ψ'(hi); stops once |Ψ'| ≤ 1e−12·max(1, α) or the bracket
    /// cannot be split further.
    pub fn minimize(&self) -> (f64, f64) {
        let tol = 1e-12 * self.alpha.max(1.0);
        let mut lo = 0.0_f64;
        let mut hi = 1.0_f64;
        while self.derivative(hi) <= 0.0 {
            lo = hi;
            hi *= 2.0;
        }
        let mut t = 0.5 * (lo + hi);
        for _ in 0..400 {
            let d = self.derivative(t);
            if d.abs() <= tol {
                break;
            }
            if d < 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            let h = self.second_derivative(t);
            let newton = t - d / h;
            let next = if h.is_finite() && h > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if next == t || hi - lo <= f64::EPSILON * hi {
                t = next;
                break;
            }
            t = next;
        }
        (t, self.value(t))
    }

    /// (Σκᵢγᵢ, 1 − Σκᵢ/Σκᵢγᵢ)
    fn weighted_sums(&self) -> (f64, f64) {
        let sk: f64 = self.terms.iter().map(|t| t.0).sum();
        let skg: f64 = self.terms.iter().map(|t| t.0 * t.1).sum();
        (skg, 1.0 - sk / skg)
    }

    /// Constant of the t* ≥ 1 branch, paired with α^{γ_m/(γ_m−1)}.
    pub fn kappa_a(&self) -> f64 {
        let (skg, margin) = self.weighted_sums();
        skg.powf(-1.0 / (self.gamma_max() - 1.0)) * margin
    }

    /// Constant of the t* ≤ 1 branch, paired with α^{γ₁/(γ₁−1)}.
    pub fn kappa_b(&self) -> f64 {
        let (skg, margin) = self.weighted_sums();
        skg.powf(-1.0 / (self.gamma_min() - 1.0)) * margin
    }

    /// The two branch magnitudes (κ_A α^{γ_m/(γ_m−1)}, κ_B α^{γ₁/(γ₁−1)}).
    pub fn branch_magnitudes(&self) -> (f64, f64) {
        let gm = self.gamma_max();
        let g1 = self.gamma_min();
        (
            self.kappa_a() * self.alpha.powf(gm / (gm - 1.0)),
            self.kappa_b() * self.alpha.powf(g1 / (g1 - 1.0)),
        )
    }

    /// Upper bound on min Ψ: −min(κ_A α^{γ_m/(γ_m−1)}, κ_B α^{γ₁/(γ₁−1)}).
    pub fn descent_bound(&self) -> f64 {
        let (a, b) = self.branch_magnitudes();
        -a.min(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_examples() {
        let s = PsiSpec::new(1.0, vec![(1.0, 2.0)]).unwrap();
        assert_eq!(s.eval(0.0).unwrap(), 0.0);
        assert_eq!(s.eval(1.0).unwrap(), 0.0);
        assert!(s.eval(-0.1).is_err());
        let s = PsiSpec::new(2.0, vec![(1.0, 3.0), (1.0, 1.5)]).unwrap();
        assert_eq!(s.eval(1.0).unwrap(), 0.0);
        assert_eq!(s.terms()[0].1, 1.5);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(PsiSpec::new(0.0, vec![(1.0, 2.0)]).is_err());
        assert!(PsiSpec::new(1.0, vec![]).is_err());
        assert!(PsiSpec::new(1.0, vec![(0.0, 2.0)]).is_err());
        assert!(PsiSpec::new(1.0, vec![(1.0, 1.0)]).is_err());
    }

    #[test]
    fn minimize_examples() {
        let (t, v) = PsiSpec::new(1.0, vec![(1.0, 2.0)]).unwrap().minimize();
        assert!((t - 0.5).abs() < 1e-14 && (v + 0.25).abs() < 1e-15);
        let (t, v) = PsiSpec::new(1.0, vec![(1.0 / 3.0, 3.0)]).unwrap().minimize();
        assert!((t - 1.0).abs() < 1e-12 && (v + 2.0 / 3.0).abs() < 1e-12);

        let base = PsiSpec::new(0.7, vec![(1.0, 1.5), (0.4, 2.5)]).unwrap();
        let doubled = PsiSpec::new(1.4, base.terms().to_vec()).unwrap();
        assert!(doubled.minimize().1 < base.minimize().1);
    }

    #[test]
    fn bound_examples() {
        let s = PsiSpec::new(1.0, vec![(1.0, 2.0)]).unwrap();
        assert!((s.kappa_a() - 0.25).abs() < 1e-15);
        assert!((s.kappa_b() - 0.25).abs() < 1e-15);
        assert!((s.descent_bound() + 0.25).abs() < 1e-15);
        assert!((s.minimize().1 - s.descent_bound()).abs() < 1e-12);

        // For small α the γ₁ branch, whose α-exponent γ₁/(γ₁−1) = 3 is the larger, is the min.
        let s = PsiSpec::new(0.01, vec![(1.0, 1.5), (2.0, 3.0)]).unwrap();
        let (a, b) = s.branch_magnitudes();
        // κ_A = 7.5^{-1/2}·0.6, κ_B = 7.5^{-2}·0.6
        assert!((a - 7.5f64.powf(-0.5) * 0.6 * 1e-3).abs() < 1e-15);
        assert!((b - 0.6 / 56.25 * 1e-6).abs() < 1e-18);
        assert!(b < a);
        assert_eq!(s.descent_bound(), -b);
        assert!(s.minimize().1 <= s.descent_bound() + 1e-12);
    }

    #[test]
    fn derivative_changes_sign_once() {
        let s = PsiSpec::new(0.3, vec![(0.2, 1.2), (1.5, 2.0), (0.01, 4.5)]).unwrap();
        let signs: Vec<bool> = (-80..=40)
            .map(|k| s.derivative(10f64.powf(k as f64 / 10.0)) > 0.0)
            .collect();
        let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(changes, 1);
    }
}
