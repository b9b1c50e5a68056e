//! Norm geometry of ℝⁿ equipped with an ℓʳ norm, 1 < r < ∞.
//!
//! Primal vectors live in the normed space itself, dual vectors (gradients)
//! live in its dual, which is ℓʳ' with 1/r + 1/r' = 1. The space is uniformly
//! q-smooth with q = min(r, 2), which is all the solver needs from it.
//!
//! All maps here are written so that they stay well defined at coordinate
//! zeros: terms of the form sign(x)|x|^a with a > 0 are extended by 0.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// ℝⁿ with the ℓʳ norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormedSpace {
    n: usize,
    r: f64,
    r_dual: f64,
    q: f64,
}

impl NormedSpace {
    pub fn new(n: usize, r: f64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n", "dimension must be positive"));
        }
        if !r.is_finite() || r <= 1.0 {
            // r = 1 and r = ∞ are not uniformly smooth.
            return Err(invalid("r", format!("norm exponent must lie in (1, ∞), got {r}")));
        }
        Ok(Self {
            n,
            r,
            r_dual: r / (r - 1.0),
            q: r.min(2.0),
        })
    }

    /// Euclidean space of dimension `n`.
    pub fn euclidean(n: usize) -> Result<Self> {
        Self::new(n, 2.0)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// Hölder conjugate of `r`.
    pub fn r_dual(&self) -> f64 {
        self.r_dual
    }

    /// Uniform smoothness order, min(r, 2).
    pub fn q(&self) -> f64 {
        self.q
    }

    fn is_euclidean(&self) -> bool {
        self.r == 2.0
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: len,
            });
        }
        Ok(())
    }

    /// ‖v‖_r.
    pub fn norm(&self, v: &PrimalVector) -> Result<f64> {
        self.check(v.len())?;
        Ok(self.norm_unchecked(v.as_slice()))
    }

    /// ‖g‖_{r'}, the norm of `g` as a functional on (ℝⁿ, ‖·‖_r).
    pub fn dual_norm(&self, g: &DualVector) -> Result<f64> {
        self.check(g.len())?;
        Ok(self.dual_norm_unchecked(g.as_slice()))
    }

    pub(crate) fn norm_unchecked(&self, v: &[f64]) -> f64 {
        lp_norm(v, self.r)
    }

    pub(crate) fn dual_norm_unchecked(&self, g: &[f64]) -> f64 {
        lp_norm(g, self.r_dual)
    }

    /// The duality map J_p(x): the gradient of ‖·‖^p / p at `x`.
    ///
    /// Componentwise this is ‖x‖^{p−r} sign(xᵢ)|xᵢ|^{r−1}; it satisfies
    /// ⟨J_p(x), x⟩ = ‖x‖^p and ‖J_p(x)‖_* = ‖x‖^{p−1}, and J_p(0) = 0.
    pub fn duality_map(&self, x: &PrimalVector, p: f64) -> Result<DualVector> {
        if !(p > 1.0) {
            return Err(invalid("p", format!("duality map exponent must exceed 1, got {p}")));
        }
        self.check(x.len())?;
        Ok(DualVector(self.duality_map_unchecked(x.as_slice(), p)))
    }

    pub(crate) fn duality_map_unchecked(&self, x: &[f64], p: f64) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.add_duality_map(x, self.norm_unchecked(x), p, 1.0, &mut out);
        out
    }

    /// out += c·J_p(x), given nx = ‖x‖.
    pub(crate) fn add_duality_map(&self, x: &[f64], nx: f64, p: f64, c: f64, out: &mut [f64]) {
        if nx == 0.0 {
            return;
        }
        // ‖x‖^{p-1} · sign(xᵢ)(|xᵢ|/‖x‖)^{r-1}: no overflow for tiny or huge ‖x‖.
        let lead = c * nx.powf(p - 1.0);
        if self.is_euclidean() {
            let k = lead / nx;
            out.iter_mut().zip(x).for_each(|(o, &xi)| *o += k * xi);
        } else {
            out.iter_mut()
                .zip(x)
                .for_each(|(o, &xi)| *o += lead * signed_pow(xi / nx, self.r - 1.0));
        }
    }

    /// Unit primal vector `d` with ⟨g, d⟩ = ‖g‖_*, the steepest-ascent
    /// direction for the linear form `g`.
    pub fn dual_direction(&self, g: &DualVector) -> Result<PrimalVector> {
        self.check(g.len())?;
        let gn = self.dual_norm_unchecked(g.as_slice());
        if gn == 0.0 {
            return Err(Error::ZeroGradient);
        }
        Ok(PrimalVector(self.dual_direction_unchecked(g.as_slice(), gn)))
    }

    pub(crate) fn dual_direction_unchecked(&self, g: &[f64], gn: f64) -> Vec<f64> {
        if self.is_euclidean() {
            let c = 1.0 / gn;
            return g.iter().map(|&gi| c * gi).collect();
        }
        g.iter().map(|&gi| signed_pow(gi / gn, self.r_dual - 1.0)).collect()
    }

    /// Monte-Carlo lower estimate of the modulus of smoothness
    /// ρ(t) = sup_{‖x‖=1, ‖y‖=t} (‖x+y‖ + ‖x−y‖)/2 − 1.
    ///
    /// Every sampled value is attained by some admissible pair, so the result
    /// never exceeds the true modulus (up to rounding).
    pub fn smoothness_modulus_estimate(&self, t: f64, samples: usize, seed: u64) -> Result<f64> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(invalid("t", format!("must be a finite nonnegative real, got {t}")));
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.n;
        let mut x = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut sum = vec![0.0; n];
        let mut diff = vec![0.0; n];
        let mut best = 0.0_f64;
        for _ in 0..samples {
            if !self.fill_on_sphere(&mut rng, &mut x, 1.0) || !self.fill_on_sphere(&mut rng, &mut y, t) {
                continue;
            }
            for i in 0..n {
                sum[i] = x[i] + y[i];
                diff[i] = x[i] - y[i];
            }
            let value = 0.5 * (self.norm_unchecked(&sum) + self.norm_unchecked(&diff)) - 1.0;
            best = best.max(value);
        }
        Ok(best)
    }

    fn fill_on_sphere(&self, rng: &mut ChaCha8Rng, out: &mut [f64], radius: f64) -> bool {
        for v in out.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        let nv = self.norm_unchecked(out);
        if nv == 0.0 {
            return false;
        }
        out.iter_mut().for_each(|v| *v *= radius / nv);
        true
    }
}

/// sign(x)|x|^a, extended by 0 at x = 0.
pub(crate) fn signed_pow(x: f64, a: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum() * x.abs().powf(a)
    }
}

/// Scaled ℓᵖ norm; the scaling keeps Σ|vᵢ|ᵖ in range.
pub(crate) fn lp_norm(v: &[f64], p: f64) -> f64 {
    if p == 2.0 {
        let s = dot(v, v);
        if s > 1e-280 && s < 1e280 {
            return s.sqrt();
        }
    }
    let scale = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    if p == 2.0 {
        let s: f64 = v.iter().map(|x| (x / scale) * (x / scale)).sum();
        return scale * s.sqrt();
    }
    let s: f64 = v.iter().map(|x| (x.abs() / scale).powf(p)).sum();
    scale * s.powf(1.0 / p)
}

fn check_finite(v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

/// A point or step in the primal space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimalVector(Vec<f64>);

/// A continuous linear functional on the primal space, e.g. a gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualVector(Vec<f64>);

macro_rules! vector_common {
    ($t:ident) => {
        impl $t {
            /// Rejects NaN and infinite entries.
            pub fn new(coords: Vec<f64>) -> Result<Self> {
                check_finite(&coords)?;
                Ok(Self(coords))
            }

            pub fn zeros(n: usize) -> Self {
                Self(vec![0.0; n])
            }

            pub(crate) fn from_raw(coords: Vec<f64>) -> Self {
                Self(coords)
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }

            pub fn into_vec(self) -> Vec<f64> {
                self.0
            }

            pub fn is_zero(&self) -> bool {
                self.0.iter().all(|&x| x == 0.0)
            }

            /// `self + alpha * other`.
            pub fn add_scaled(&self, alpha: f64, other: &Self) -> Self {
                debug_assert_eq!(self.len(), other.len());
                Self(self.0.iter().zip(&other.0).map(|(a, b)| a + alpha * b).collect())
            }

            pub fn scaled(&self, alpha: f64) -> Self {
                Self(self.0.iter().map(|a| alpha * a).collect())
            }

            pub fn max_abs(&self) -> f64 {
                self.0.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
            }
        }

        impl std::ops::Index<usize> for $t {
            type Output = f64;
            fn index(&self, i: usize) -> &f64 {
                &self.0[i]
            }
        }
    };
}

vector_common!(PrimalVector);
vector_common!(DualVector);

impl DualVector {
    /// The dual pairing ⟨g, v⟩.
    pub fn pair(&self, v: &PrimalVector) -> f64 {
        debug_assert_eq!(self.len(), v.len());
        dot(&self.0, &v.0)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // Four independent partial sums let the loop vectorize.
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    let mut acc = [0.0; 4];
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
    }

    fn pv(v: &[f64]) -> PrimalVector {
        PrimalVector::new(v.to_vec()).unwrap()
    }

    fn dv(v: &[f64]) -> DualVector {
        DualVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn constructor_invariants() {
        let s = NormedSpace::new(3, 3.0).unwrap();
        assert!((1.0 / s.r() + 1.0 / s.r_dual() - 1.0).abs() < 1e-15);
        assert_eq!(s.q(), 2.0);
        assert_eq!(NormedSpace::new(3, 1.5).unwrap().q(), 1.5);
        assert!(NormedSpace::new(3, 1.0).is_err());
        assert!(NormedSpace::new(3, f64::INFINITY).is_err());
        assert!(NormedSpace::new(0, 2.0).is_err());
        assert!(matches!(
            PrimalVector::new(vec![1.0, f64::NAN]),
            Err(Error::NonFinite { index: 1 })
        ));
    }

    #[test]
    fn norm_examples() {
        let e = NormedSpace::euclidean(2).unwrap();
        assert_eq!(e.norm(&pv(&[3.0, 4.0])).unwrap(), 5.0);
        for r in [1.5, 2.0, 3.0, 7.0] {
            let s = NormedSpace::new(2, r).unwrap();
            assert_eq!(s.norm(&PrimalVector::zeros(2)).unwrap(), 0.0);
        }
        let s3 = NormedSpace::new(2, 3.0).unwrap();
        assert!(close(s3.norm(&pv(&[1.0, 1.0])).unwrap(), 2f64.powf(1.0 / 3.0), 1e-15));
        assert!(matches!(
            s3.norm(&pv(&[1.0])),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn dual_norm_examples() {
        let e = NormedSpace::euclidean(2).unwrap();
        assert_eq!(e.dual_norm(&dv(&[3.0, 4.0])).unwrap(), 5.0);
        let s3 = NormedSpace::new(2, 3.0).unwrap();
        assert!(close(s3.dual_norm(&dv(&[1.0, 0.0])).unwrap(), 1.0, 1e-15));
        let s4 = NormedSpace::new(2, 4.0).unwrap();
        assert!(close(s4.dual_norm(&dv(&[1.0, 1.0])).unwrap(), 2f64.powf(0.75), 1e-15));
    }

    #[test]
    fn duality_map_examples() {
        let e = NormedSpace::euclidean(2).unwrap();
        let j = e.duality_map(&pv(&[1.0, -2.0]), 2.0).unwrap();
        assert!(close(j[0], 1.0, 1e-15) && close(j[1], -2.0, 1e-15));

        let s = NormedSpace::new(2, 3.0).unwrap();
        assert!(s.duality_map(&PrimalVector::zeros(2), 2.5).unwrap().is_zero());
        assert!(s.duality_map(&pv(&[1.0, 1.0]), 1.0).is_err());

        let x = pv(&[1.0, 1.0]);
        let j = s.duality_map(&x, 2.5).unwrap();
        let nx = s.norm(&x).unwrap();
        assert!(close(j.pair(&x), nx.powf(2.5), 1e-14));
        assert!(close(s.dual_norm(&j).unwrap(), nx.powf(1.5), 1e-14));
    }

    #[test]
    fn duality_map_zero_coordinate_extension() {
        let s = NormedSpace::new(3, 1.5).unwrap();
        let x = pv(&[0.0, 2.0, -1.0]);
        let j = s.duality_map(&x, 3.0).unwrap();
        assert_eq!(j[0], 0.0);
        let nx = s.norm(&x).unwrap();
        assert!(close(j.pair(&x), nx.powi(3), 1e-13));
        assert!(close(s.dual_norm(&j).unwrap(), nx.powi(2), 1e-13));
    }

    #[test]
    fn dual_direction_examples() {
        let e = NormedSpace::euclidean(2).unwrap();
        let d = e.dual_direction(&dv(&[3.0, 4.0])).unwrap();
        assert!(close(d[0], 0.6, 1e-15) && close(d[1], 0.8, 1e-15));
        let d = e.dual_direction(&dv(&[0.0, 5.0])).unwrap();
        assert_eq!(d.as_slice(), &[0.0, 1.0]);

        let s = NormedSpace::new(2, 3.0).unwrap();
        let g = dv(&[1.0, 1.0]);
        let d = s.dual_direction(&g).unwrap();
        assert!(close(s.norm(&d).unwrap(), 1.0, 1e-15));
        assert!(close(g.pair(&d), s.dual_norm(&g).unwrap(), 1e-15));

        assert_eq!(s.dual_direction(&DualVector::zeros(2)), Err(Error::ZeroGradient));
    }

    #[test]
    fn duality_map_matches_finite_differences() {
        // Points keep every coordinate away from zero.
        let pts = [[0.7, -1.3, 0.4], [2.0, 0.5, -0.9], [-0.3, -0.8, 1.7]];
        for r in [1.5, 2.0, 3.0, 4.0] {
            let s = NormedSpace::new(3, r).unwrap();
            for p in [1.5, 2.0, 2.5, 3.5] {
                for x in &pts {
                    let j = s.duality_map(&pv(x), p).unwrap();
                    let phi = |v: &[f64]| lp_norm(v, r).powf(p) / p;
                    for i in 0..3 {
                        let h = 1e-6;
                        let mut xp = x.to_vec();
                        let mut xm = x.to_vec();
                        xp[i] += h;
                        xm[i] -= h;
                        let fd = (phi(&xp) - phi(&xm)) / (2.0 * h);
                        assert!(
                            (fd - j[i]).abs() <= 1e-5 * j[i].abs().max(1e-3),
                            "r={r} p={p} i={i}: fd={fd} J={}",
                            j[i]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn modulus_examples() {
        let e = NormedSpace::euclidean(3).unwrap();
        let rho1 = e.smoothness_modulus_estimate(1.0, 20_000, 7).unwrap();
        assert!(rho1 <= 2f64.sqrt() - 1.0 + 1e-12);
        assert!(rho1 > 0.0);
        let rho_half = e.smoothness_modulus_estimate(0.5, 20_000, 7).unwrap();
        assert!(rho_half <= 0.125 + 1e-12);
        for r in [1.5, 3.0] {
            let s = NormedSpace::new(3, r).unwrap();
            assert_eq!(s.smoothness_modulus_estimate(0.0, 10, 1).unwrap(), 0.0);
        }
        assert!(e.smoothness_modulus_estimate(-1.0, 10, 1).is_err());
    }

    #[test]
    fn modulus_is_at_most_t() {
        // Triangle inequality bound ρ(t) ≤ t.
        for r in [1.5, 3.0, 6.0] {
            let s = NormedSpace::new(4, r).unwrap();
            for t in [0.1, 1.0, 3.0] {
                assert!(s.smoothness_modulus_estimate(t, 5000, 3).unwrap() <= t + 1e-12);
            }
        }
    }
}
