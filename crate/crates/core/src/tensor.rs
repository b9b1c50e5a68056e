//! Symmetric multilinear forms, truncated Taylor models and the regularized
//! model m(s) = T(x, s) + σ/(p+β)! ‖s‖^{p+β}.
//!
//! Tensors are stored densely in row-major order over all multi-indices.
//! Symmetry is an invariant of the values, not of the storage.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{dot, DualVector, NormedSpace, PrimalVector};

/// Generalized factorial x! = Γ(x + 1), exact for small integers.
pub fn factorial(x: f64) -> f64 {
    if x >= 0.0 && x.fract() == 0.0 && x <= 170.0 {
        (1..=x as u32).fold(1.0, |acc, k| acc * k as f64)
    } else {
        statrs::function::gamma::gamma(x + 1.0)
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// An order-ℓ multilinear form on ℝⁿ. Order 0 is a scalar.
///
/// Tensors of order ≥ 2 with few nonzero entries also keep a sparse copy so
/// contractions cost O(nnz) instead of O(nˡ): banded matrices by diagonal,
/// everything else row by row (rows run over all but the last index).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymmetricTensor {
    order: usize,
    dim: usize,
    entries: Vec<f64>,
    #[serde(skip)]
    nonzeros: Option<Sparse>,
}

#[derive(Debug, Clone)]
enum Sparse {
    Rows(SparseRows),
    Diagonals(Vec<Diagonal>),
}

impl Sparse {
    fn new(order: usize, dim: usize, entries: &[f64], nnz: usize) -> Self {
        if order == 2 {
            let mut offsets: Vec<isize> = entries
                .iter()
                .enumerate()
                .filter(|(_, &e)| e != 0.0)
                .map(|(k, _)| (k % dim) as isize - (k / dim) as isize)
                .collect();
            offsets.sort_unstable();
            offsets.dedup();
            // Only worth it when the occupied diagonals are mostly full.
            if offsets.len() * dim <= 2 * nnz {
                return Self::Diagonals(offsets.into_iter().map(|o| Diagonal::new(entries, dim, o)).collect());
            }
        }
        Self::Rows(SparseRows::new(entries, dim))
    }

    fn values_mut(&mut self) -> Box<dyn Iterator<Item = &mut f64> + '_> {
        match self {
            Self::Rows(r) => Box::new(r.values.iter_mut()),
            Self::Diagonals(ds) => Box::new(ds.iter_mut().flat_map(|d| d.values.iter_mut())),
        }
    }

    fn contract(&self, dim: usize, v: &[f64]) -> Vec<f64> {
        match self {
            Self::Rows(nz) => {
                let mut out = Vec::with_capacity(nz.starts.len() - 1);
                let mut lo = 0;
                for &hi in &nz.starts[1..] {
                    let mut acc = 0.0;
                    for k in lo..hi {
                        acc += nz.values[k] * v[nz.cols[k] as usize];
                    }
                    out.push(acc);
                    lo = hi;
                }
                out
            }
            Self::Diagonals(ds) => {
                let mut out = vec![0.0; dim];
                for d in ds {
                    let first = d.first_row;
                    let col = (first as isize + d.offset) as usize;
                    let rows = &mut out[first..first + d.values.len()];
                    let cols = &v[col..col + d.values.len()];
                    for ((o, a), x) in rows.iter_mut().zip(&d.values).zip(cols) {
                        *o += a * x;
                    }
                }
                out
            }
        }
    }
}

/// Entries S[i, i + offset] for rows i = first_row.. in order.
#[derive(Debug, Clone)]
struct Diagonal {
    offset: isize,
    first_row: usize,
    values: Vec<f64>,
}

impl Diagonal {
    fn new(entries: &[f64], dim: usize, offset: isize) -> Self {
        let first_row = (-offset).max(0) as usize;
        let len = dim - offset.unsigned_abs();
        let values = (first_row..first_row + len)
            .map(|i| entries[i * dim + (i as isize + offset) as usize])
            .collect();
        Self {
            offset,
            first_row,
            values,
        }
    }
}

/// Compressed rows: row k holds `cols`/`values` in `starts[k]..starts[k+1]`.
#[derive(Debug, Clone)]
struct SparseRows {
    starts: Vec<usize>,
    cols: Vec<u32>,
    values: Vec<f64>,
}

impl SparseRows {
    fn new(entries: &[f64], dim: usize) -> Self {
        let mut starts = vec![0];
        let (mut cols, mut values) = (Vec::new(), Vec::new());
        for row in entries.chunks_exact(dim) {
            for (c, &e) in row.iter().enumerate() {
                if e != 0.0 {
                    cols.push(c as u32);
                    values.push(e);
                }
            }
            starts.push(cols.len());
        }
        Self { starts, cols, values }
    }
}

impl PartialEq for SymmetricTensor {
    fn eq(&self, other: &Self) -> bool {
        self.order == other.order && self.dim == other.dim && self.entries == other.entries
    }
}

impl SymmetricTensor {
    fn build(order: usize, dim: usize, entries: Vec<f64>) -> Self {
        let nonzeros = if order >= 2 {
            let nnz = entries.iter().filter(|&&e| e != 0.0).count();
            (nnz * 8 <= entries.len()).then(|| Sparse::new(order, dim, &entries, nnz))
        } else {
            None
        };
        Self {
            order,
            dim,
            entries,
            nonzeros,
        }
    }

    pub fn zeros(order: usize, dim: usize) -> Self {
        Self::build(order, dim, vec![0.0; dim.pow(order as u32)])
    }

    pub fn scalar(value: f64) -> Self {
        Self::build(0, 0, vec![value])
    }

    /// Builds a tensor from dense row-major entries. Symmetry is not checked
    /// here; see [`SymmetricTensor::is_symmetric`].
    pub fn from_entries(order: usize, dim: usize, entries: Vec<f64>) -> Result<Self> {
        let expected = dim.pow(order as u32);
        if entries.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: entries.len(),
            });
        }
        if let Some(index) = entries.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self::build(order, dim, entries))
    }

    pub fn from_fn(order: usize, dim: usize, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let total = dim.pow(order as u32);
        let mut idx = vec![0usize; order];
        let mut entries = Vec::with_capacity(total);
        for _ in 0..total {
            entries.push(f(&idx));
            for axis in (0..order).rev() {
                idx[axis] += 1;
                if idx[axis] < dim {
                    break;
                }
                idx[axis] = 0;
            }
        }
        Self::build(order, dim, entries)
    }

    /// Tensor whose only nonzero entries are S[i, i, ..., i] = diag[i].
    pub fn diagonal(order: usize, diag: &[f64]) -> Self {
        let dim = diag.len();
        let mut entries = vec![0.0; dim.pow(order as u32)];
        let stride: usize = (0..order).map(|a| dim.pow(a as u32)).sum();
        for (i, &v) in diag.iter().enumerate() {
            entries[i * stride] = v;
        }
        Self::build(order, dim, entries)
    }

    pub fn from_dual(g: &DualVector) -> Self {
        Self::build(1, g.len(), g.as_slice().to_vec())
    }

    /// Order-2 tensor from a square matrix given row by row.
    pub fn from_matrix(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            entries.extend_from_slice(row);
        }
        Self::from_entries(2, dim, entries)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        debug_assert_eq!(idx.len(), self.order);
        let flat = idx.iter().fold(0, |acc, &i| acc * self.dim + i);
        self.entries[flat]
    }

    /// Value of an order-0 tensor.
    pub fn value(&self) -> Option<f64> {
        (self.order == 0).then(|| self.entries[0])
    }

    /// Reinterprets an order-1 tensor as a dual vector.
    pub fn to_dual(&self) -> Option<DualVector> {
        (self.order == 1).then(|| DualVector::from_raw(self.entries.clone()))
    }

    pub fn scale(&mut self, alpha: f64) {
        self.entries.iter_mut().for_each(|e| *e *= alpha);
        if let Some(nz) = &mut self.nonzeros {
            nz.values_mut().for_each(|e| *e *= alpha);
        }
    }

    /// Checks invariance under every adjacent transposition of axes, which
    /// generate the full permutation group.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.order < 2 {
            return true;
        }
        let n = self.dim;
        let mut idx = vec![0usize; self.order];
        for (flat, &v) in self.entries.iter().enumerate() {
            let mut rem = flat;
            for axis in (0..self.order).rev() {
                idx[axis] = rem % n;
                rem /= n;
            }
            for a in 0..self.order - 1 {
                idx.swap(a, a + 1);
                let w = self.get(&idx);
                idx.swap(a, a + 1);
                if (v - w).abs() > tol * v.abs().max(w.abs()).max(1.0) {
                    return false;
                }
            }
        }
        true
    }

    /// Contracts the last axis with `v`.
    fn contract_last(&self, v: &[f64]) -> Self {
        debug_assert!(self.order >= 1);
        let n = self.dim;
        let entries = match &self.nonzeros {
            Some(nz) => nz.contract(n, v),
            None => self.entries.chunks_exact(n).map(|row| dot(row, v)).collect(),
        };
        Self::build(self.order - 1, if self.order == 1 { 0 } else { n }, entries)
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: len,
            });
        }
        Ok(())
    }

    /// Full contraction S[v₁, …, v_ℓ].
    pub fn apply(&self, vs: &[&PrimalVector]) -> Result<f64> {
        if vs.len() != self.order {
            return Err(Error::Arity {
                order: self.order,
                got: vs.len(),
            });
        }
        for v in vs {
            self.check_dim(v.len())?;
        }
        let Some((last, rest)) = vs.split_last() else {
            return Ok(self.entries[0]);
        };
        let mut acc = self.contract_last(last.as_slice());
        for v in rest.iter().rev() {
            acc = acc.contract_last(v.as_slice());
        }
        Ok(acc.entries[0])
    }

    /// S[v]^l, a tensor of order ℓ − l.
    pub fn partial_apply(&self, v: &PrimalVector, times: usize) -> Result<Self> {
        if times > self.order {
            return Err(invalid(
                "times",
                format!("cannot apply {times} vectors to a tensor of order {}", self.order),
            ));
        }
        if times > 0 {
            self.check_dim(v.len())?;
        }
        Ok(self.repeated(v.as_slice(), times))
    }

    pub(crate) fn repeated(&self, v: &[f64], times: usize) -> Self {
        if times == 0 {
            return self.clone();
        }
        let mut acc = self.contract_last(v);
        for _ in 1..times {
            acc = acc.contract_last(v);
        }
        acc
    }
}

/// The truncated Taylor expansion T(x, s) = f(x) + Σ_{l=1..p} (1/l!) ∇ˡf(x)[s]ˡ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorModel {
    base_point: PrimalVector,
    f0: f64,
    /// Derivative tensors of orders 1..=p.
    tensors: Vec<SymmetricTensor>,
}

impl TaylorModel {
    pub fn new(base_point: PrimalVector, f0: f64, tensors: Vec<SymmetricTensor>) -> Result<Self> {
        if tensors.is_empty() {
            return Err(invalid("tensors", "need at least the gradient"));
        }
        let n = base_point.len();
        for (i, t) in tensors.iter().enumerate() {
            if t.order() != i + 1 {
                return Err(invalid(
                    "tensors",
                    format!("entry {i} has order {}, expected {}", t.order(), i + 1),
                ));
            }
            if t.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: t.dim(),
                });
            }
        }
        if !f0.is_finite() {
            return Err(invalid("f0", "function value must be finite"));
        }
        Ok(Self {
            base_point,
            f0,
            tensors,
        })
    }

    pub fn p(&self) -> usize {
        self.tensors.len()
    }

    pub fn dim(&self) -> usize {
        self.base_point.len()
    }

    pub fn f0(&self) -> f64 {
        self.f0
    }

    pub fn base_point(&self) -> &PrimalVector {
        &self.base_point
    }

    pub fn tensors(&self) -> &[SymmetricTensor] {
        &self.tensors
    }

    /// g(x), the first-order term.
    pub fn gradient(&self) -> DualVector {
        DualVector::from_raw(self.tensors[0].entries.clone())
    }

    fn check(&self, s: &PrimalVector) -> Result<()> {
        if s.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: s.len(),
            });
        }
        Ok(())
    }

    /// Returns (T(x,s) − f(x), ∇ₛT(x,s)) in one sweep over the tensors.
    pub(crate) fn increment_and_gradient(&self, s: &[f64]) -> (f64, Vec<f64>) {
        let mut value = 0.0;
        let mut grad = vec![0.0; s.len()];
        for (i, t) in self.tensors.iter().enumerate() {
            let l = i + 1;
            // S_l[s]^{l-1} as a vector.
            let partial = t.repeated(s, l - 1);
            let inv = 1.0 / factorial((l - 1) as f64);
            for (g, e) in grad.iter_mut().zip(&partial.entries) {
                *g += inv * e;
            }
            value += dot(&partial.entries, s) / factorial(l as f64);
        }
        (value, grad)
    }

    /// wⱼ = ∇ₛ^{j+1}T(x, s)[d]^j as vectors for j = 1..p−1.
    ///
    /// With w₀ = ∇ₛT(x, s) these give T(x, s − τd) − T(x, s) =
    /// Σⱼ (−τ)^j/j! ⟨w_{j−1}, d⟩ and ∇ₛT(x, s − τd) = Σⱼ (−τ)^j/j! wⱼ.
    pub(crate) fn directional_derivatives(&self, s: &[f64], d: &[f64]) -> Vec<Vec<f64>> {
        let p = self.p();
        let mut w = vec![vec![0.0; s.len()]; p.saturating_sub(1)];
        for (i, t) in self.tensors.iter().enumerate().skip(1) {
            let l = i + 1;
            let mut with_d = t.contract_last(d);
            for j in 1..l {
                if j > 1 {
                    with_d = with_d.contract_last(d);
                }
                let partial = (j + 1 < l).then(|| with_d.repeated(s, l - 1 - j));
                let inv = 1.0 / factorial((l - 1 - j) as f64);
                for (a, e) in w[j - 1].iter_mut().zip(&partial.as_ref().unwrap_or(&with_d).entries) {
                    *a += inv * e;
                }
            }
        }
        w
    }

    /// T(x, s) − T(x, 0), computed without touching f(x).
    pub fn increment(&self, s: &PrimalVector) -> Result<f64> {
        self.check(s)?;
        Ok(self.increment_and_gradient(s.as_slice()).0)
    }

    pub fn eval(&self, s: &PrimalVector) -> Result<f64> {
        Ok(self.f0 + self.increment(s)?)
    }

    /// ∇ₛT(x, s) = Σ_{l=1..p} (1/(l−1)!) ∇ˡf(x)[s]^{l−1}.
    pub fn gradient_at(&self, s: &PrimalVector) -> Result<DualVector> {
        self.check(s)?;
        Ok(DualVector::from_raw(self.increment_and_gradient(s.as_slice()).1))
    }
}

/// m(s) = T(x, s) + σ/(p+β)! ‖s‖^{p+β}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularizedModel {
    taylor: TaylorModel,
    sigma: f64,
    beta: f64,
    space: NormedSpace,
}

impl RegularizedModel {
    pub fn new(taylor: TaylorModel, sigma: f64, beta: f64, space: NormedSpace) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(invalid("sigma", format!("must be finite and nonnegative, got {sigma}")));
        }
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(invalid("beta", format!("must lie in (0, 1], got {beta}")));
        }
        if taylor.dim() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                got: taylor.dim(),
            });
        }
        // p ≥ 1 and β > 0 already give p + β > 1.
        Ok(Self {
            taylor,
            sigma,
            beta,
            space,
        })
    }

    pub fn taylor(&self) -> &TaylorModel {
        &self.taylor
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn p(&self) -> usize {
        self.taylor.p()
    }

    pub fn space(&self) -> &NormedSpace {
        &self.space
    }

    /// Regularization exponent p + β.
    pub fn exponent(&self) -> f64 {
        self.p() as f64 + self.beta
    }

    /// σ / (p+β)!
    pub fn reg_coefficient(&self) -> f64 {
        self.sigma / factorial(self.exponent())
    }

    /// σ / (p+β−1)!, the weight on J_{p+β} in the model gradient.
    pub fn reg_gradient_coefficient(&self) -> f64 {
        self.sigma / factorial(self.exponent() - 1.0)
    }

    pub(crate) fn regularizer_at_norm(&self, norm: f64) -> f64 {
        self.reg_coefficient() * norm.powf(self.exponent())
    }

    /// m(s) − m(0), split as (Taylor increment, regularizer).
    pub(crate) fn delta_parts(&self, s: &[f64]) -> (f64, f64, Vec<f64>) {
        let (inc, mut grad) = self.taylor.increment_and_gradient(s);
        let norm = self.space.norm_unchecked(s);
        self.add_regularizer_gradient(s, norm, &mut grad);
        (inc, self.regularizer_at_norm(norm), grad)
    }

    /// grad += σ/(p+β−1)! J_{p+β}(s), given norm = ‖s‖.
    pub(crate) fn add_regularizer_gradient(&self, s: &[f64], norm: f64, grad: &mut [f64]) {
        if self.sigma > 0.0 {
            self.space
                .add_duality_map(s, norm, self.exponent(), self.reg_gradient_coefficient(), grad);
        }
    }

    pub fn eval(&self, s: &PrimalVector) -> Result<f64> {
        let inc = self.taylor.increment(s)?;
        let reg = self.regularizer_at_norm(self.space.norm_unchecked(s.as_slice()));
        Ok(self.taylor.f0 + inc + reg)
    }

    /// ∇ₛm(s) = ∇ₛT(x, s) + σ/(p+β−1)! J_{p+β}(s).
    pub fn gradient(&self, s: &PrimalVector) -> Result<DualVector> {
        self.taylor.check(s)?;
        Ok(DualVector::from_raw(self.delta_parts(s.as_slice()).2))
    }

    /// Restricts the polynomial part of the model to the ray t ↦ s₀ − t d.
    pub fn restrict_to_ray(&self, s0: &PrimalVector, d: &PrimalVector) -> Result<RayPolynomial> {
        self.taylor.check(s0)?;
        self.taylor.check(d)?;
        let dn = self.space.norm_unchecked(d.as_slice());
        if (dn - 1.0).abs() > 1e-12 {
            return Err(Error::NonUnitDirection { norm: dn });
        }
        let mut coeffs = self.ray_increment(s0.as_slice(), d.as_slice());
        coeffs[0] += self.taylor.f0;
        Ok(RayPolynomial {
            coeffs,
            anchor: s0.clone(),
            direction: d.clone(),
        })
    }

    /// Coefficients of t ↦ T(x, s₀ − t d) − f(x).
    pub(crate) fn ray_increment(&self, s0: &[f64], d: &[f64]) -> Vec<f64> {
        let p = self.p();
        let mut coeffs = vec![0.0; p + 1];
        for (i, t) in self.taylor.tensors.iter().enumerate() {
            let l = i + 1;
            let inv_fact = 1.0 / factorial(l as f64);
            // S_l[d]^j, then j ↦ S_l[s0]^{l−j}[d]^j.
            let mut with_d: Option<SymmetricTensor> = None;
            for (j, c) in coeffs.iter_mut().enumerate().take(l + 1) {
                if j > 0 {
                    with_d = Some(with_d.as_ref().unwrap_or(t).contract_last(d));
                }
                let m = with_d.as_ref().unwrap_or(t).repeated(s0, l - j).entries[0];
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                *c += inv_fact * binomial(l, j) * sign * m;
            }
        }
        coeffs
    }
}

/// Coefficients of t ↦ T(x, s₀ − t d) in the monomial basis t⁰..tᵖ.
#[derive(Debug, Clone, PartialEq)]
pub struct RayPolynomial {
    pub coeffs: Vec<f64>,
    pub anchor: PrimalVector,
    pub direction: PrimalVector,
}

impl RayPolynomial {
    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (j, c)| acc * t + j as f64 * c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pv(v: &[f64]) -> PrimalVector {
        PrimalVector::new(v.to_vec()).unwrap()
    }

    /// Random symmetric tensor built by symmetrizing over sorted indices.
    fn random_symmetric(order: usize, dim: usize, rng: &mut ChaCha8Rng) -> SymmetricTensor {
        let mut table = std::collections::HashMap::new();
        SymmetricTensor::from_fn(order, dim, |idx| {
            let mut key = idx.to_vec();
            key.sort_unstable();
            *table.entry(key).or_insert_with(|| rng.random_range(-1.0..1.0))
        })
    }

    fn random_vec(dim: usize, rng: &mut ChaCha8Rng) -> PrimalVector {
        pv(&(0..dim).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>())
    }

    #[test]
    fn factorial_matches_gamma() {
        assert_eq!(factorial(0.0), 1.0);
        assert_eq!(factorial(2.0), 2.0);
        assert_eq!(factorial(4.0), 24.0);
        // Γ(3.5) = 15√π/8
        let want = 15.0 * std::f64::consts::PI.sqrt() / 8.0;
        assert!((factorial(2.5) - want).abs() < 1e-13);
    }

    #[test]
    fn apply_examples() {
        let g = SymmetricTensor::from_entries(1, 3, vec![1.0, -2.0, 0.5]).unwrap();
        let v = pv(&[2.0, 1.0, 4.0]);
        assert_eq!(g.apply(&[&v]).unwrap(), 2.0 - 2.0 + 2.0);

        let n = 5;
        let eye = SymmetricTensor::diagonal(2, &vec![1.0; n]);
        let ones = pv(&vec![1.0; n]);
        assert_eq!(eye.apply(&[&ones, &ones]).unwrap(), n as f64);

        assert!(matches!(eye.apply(&[&ones]), Err(Error::Arity { order: 2, got: 1 })));
        let short = pv(&[1.0]);
        assert!(eye.apply(&[&short, &short]).is_err());
    }

    #[test]
    fn apply_is_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = random_symmetric(3, 4, &mut rng);
        assert!(s.is_symmetric(1e-15));
        let (a, b, c) = (
            random_vec(4, &mut rng),
            random_vec(4, &mut rng),
            random_vec(4, &mut rng),
        );
        let base = s.apply(&[&a, &b, &c]).unwrap();
        for perm in [[&a, &c, &b], [&b, &a, &c], [&b, &c, &a], [&c, &a, &b], [&c, &b, &a]] {
            let v = s.apply(&perm).unwrap();
            assert!((v - base).abs() <= 1e-12 * base.abs().max(1.0));
        }
    }

    #[test]
    fn asymmetric_tensor_detected() {
        let m = SymmetricTensor::from_matrix(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(!m.is_symmetric(1e-12));
    }

    #[test]
    fn partial_apply_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_symmetric(3, 3, &mut rng);
        let v = random_vec(3, &mut rng);
        assert_eq!(s.partial_apply(&v, 0).unwrap(), s);
        let full = s.partial_apply(&v, 3).unwrap();
        assert_eq!(full.order(), 0);
        let direct = s.apply(&[&v, &v, &v]).unwrap();
        assert!((full.value().unwrap() - direct).abs() < 1e-14);
        assert!(s.partial_apply(&v, 4).is_err());

        let a = random_symmetric(2, 4, &mut rng);
        let w = random_vec(4, &mut rng);
        let av = a.partial_apply(&w, 1).unwrap();
        for i in 0..4 {
            let want: f64 = (0..4).map(|j| a.get(&[i, j]) * w[j]).sum();
            assert!((av.entries()[i] - want).abs() < 1e-14);
        }
    }

    fn quadratic_taylor(x: &[f64]) -> (TaylorModel, impl Fn(&[f64]) -> f64) {
        // f(y) = ½ yᵀAy + bᵀy + c
        let a = vec![vec![2.0, 0.5, 0.0], vec![0.5, 1.0, -0.3], vec![0.0, -0.3, 3.0]];
        let b = [1.0, -1.0, 0.5];
        let c = 0.7;
        let f = {
            let a = a.clone();
            move |y: &[f64]| {
                let mut v = c;
                for i in 0..3 {
                    v += b[i] * y[i];
                    for j in 0..3 {
                        v += 0.5 * a[i][j] * y[i] * y[j];
                    }
                }
                v
            }
        };
        let g: Vec<f64> = (0..3)
            .map(|i| b[i] + (0..3).map(|j| a[i][j] * x[j]).sum::<f64>())
            .collect();
        let t = TaylorModel::new(
            pv(x),
            f(x),
            vec![
                SymmetricTensor::from_entries(1, 3, g).unwrap(),
                SymmetricTensor::from_matrix(&a).unwrap(),
            ],
        )
        .unwrap();
        (t, f)
    }

    #[test]
    fn taylor_eval_examples() {
        let x = [0.3, -0.2, 1.1];
        let (t, f) = quadratic_taylor(&x);
        assert_eq!(t.eval(&PrimalVector::zeros(3)).unwrap(), t.f0());

        let s = pv(&[0.5, 0.25, -1.0]);
        let xs: Vec<f64> = x.iter().zip(s.as_slice()).map(|(a, b)| a + b).collect();
        assert!((t.eval(&s).unwrap() - f(&xs)).abs() < 1e-12);

        let linear = TaylorModel::new(pv(&x), 2.0, vec![t.tensors()[0].clone()]).unwrap();
        let want = 2.0 + t.gradient().pair(&s);
        assert!((linear.eval(&s).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn taylor_gradient_examples() {
        let x = [0.3, -0.2, 1.1];
        let (t, _) = quadratic_taylor(&x);
        assert_eq!(t.gradient_at(&PrimalVector::zeros(3)).unwrap(), t.gradient());
        let s = pv(&[0.5, 0.25, -1.0]);
        let hs = t.tensors()[1].partial_apply(&s, 1).unwrap();
        let want = t.gradient().add_scaled(1.0, &hs.to_dual().unwrap());
        let got = t.gradient_at(&s).unwrap();
        for i in 0..3 {
            assert!((got[i] - want[i]).abs() < 1e-14);
        }
    }

    fn random_taylor(p: usize, n: usize, rng: &mut ChaCha8Rng) -> TaylorModel {
        let tensors = (1..=p).map(|l| random_symmetric(l, n, rng)).collect();
        TaylorModel::new(random_vec(n, rng), rng.random_range(-1.0..1.0), tensors).unwrap()
    }

    fn central_gradient(f: impl Fn(&[f64]) -> f64, s: &[f64], h: f64) -> Vec<f64> {
        (0..s.len())
            .map(|i| {
                let mut sp = s.to_vec();
                let mut sm = s.to_vec();
                sp[i] += h;
                sm[i] -= h;
                (f(&sp) - f(&sm)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn taylor_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for p in 1..=3 {
            let t = random_taylor(p, 4, &mut rng);
            let s = random_vec(4, &mut rng);
            let fd = central_gradient(|v| t.eval(&pv(v)).unwrap(), s.as_slice(), 1e-5);
            let g = t.gradient_at(&s).unwrap();
            for i in 0..4 {
                assert!((fd[i] - g[i]).abs() <= 1e-6 * g[i].abs().max(1.0), "p={p}");
            }
        }
    }

    #[test]
    fn model_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let space = NormedSpace::new(4, 3.0).unwrap();
        let t = random_taylor(2, 4, &mut rng);
        let m = RegularizedModel::new(t.clone(), 1.5, 0.5, space).unwrap();
        let zero = PrimalVector::zeros(4);
        assert_eq!(m.eval(&zero).unwrap(), t.eval(&zero).unwrap());
        assert_eq!(m.gradient(&zero).unwrap(), t.gradient());

        let m0 = RegularizedModel::new(t.clone(), 0.0, 0.5, space).unwrap();
        let s = random_vec(4, &mut rng);
        assert_eq!(m0.eval(&s).unwrap(), t.eval(&s).unwrap());
        assert_eq!(m0.gradient(&s).unwrap(), t.gradient_at(&s).unwrap());

        assert!(RegularizedModel::new(t.clone(), -1.0, 0.5, space).is_err());
        assert!(RegularizedModel::new(t, 1.0, 0.0, space).is_err());
    }

    #[test]
    fn model_cubic_example() {
        // p = 1, β = 1, r = 2, σ = 2: m(s) = f0 + ⟨g,s⟩ + ‖s‖².
        let g = SymmetricTensor::from_entries(1, 2, vec![2.0, -1.0]).unwrap();
        let t = TaylorModel::new(PrimalVector::zeros(2), 0.5, vec![g]).unwrap();
        let m = RegularizedModel::new(t, 2.0, 1.0, NormedSpace::euclidean(2).unwrap()).unwrap();
        let s = pv(&[0.3, 0.4]);
        let want = 0.5 + (0.6 - 0.4) + 0.25;
        assert!((m.eval(&s).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn model_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for (r, p, beta) in [(2.0, 2, 1.0), (1.5, 1, 0.5), (3.0, 3, 0.7), (4.0, 2, 0.3)] {
            let space = NormedSpace::new(4, r).unwrap();
            let m = RegularizedModel::new(random_taylor(p, 4, &mut rng), 2.5, beta, space).unwrap();
            // coordinates bounded away from zero
            let s = pv(&[0.6, -0.4, 0.9, -0.7]);
            let fd = central_gradient(|v| m.eval(&pv(v)).unwrap(), s.as_slice(), 1e-5);
            let g = m.gradient(&s).unwrap();
            for i in 0..4 {
                assert!(
                    (fd[i] - g[i]).abs() <= 1e-5 * g[i].abs().max(1.0),
                    "r={r} p={p}: {} vs {}",
                    fd[i],
                    g[i]
                );
            }
        }
    }

    #[test]
    fn model_is_coercive_along_rays() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for r in [1.5, 2.0, 3.0] {
            let space = NormedSpace::new(3, r).unwrap();
            let m = RegularizedModel::new(random_taylor(3, 3, &mut rng), 0.5, 0.5, space).unwrap();
            let m0 = m.eval(&PrimalVector::zeros(3)).unwrap();
            for _ in 0..10 {
                let raw = random_vec(3, &mut rng);
                let d = raw.scaled(1.0 / space.norm(&raw).unwrap());
                for t in [1e3, 1e4] {
                    assert!(m.eval(&d.scaled(t)).unwrap() > m0);
                }
            }
        }
    }

    #[test]
    fn ray_restriction_linear() {
        let g = SymmetricTensor::from_entries(1, 2, vec![1.0, 2.0]).unwrap();
        let t = TaylorModel::new(PrimalVector::zeros(2), 3.0, vec![g]).unwrap();
        let m = RegularizedModel::new(t.clone(), 1.0, 1.0, NormedSpace::euclidean(2).unwrap()).unwrap();
        let s0 = pv(&[0.5, -1.0]);
        let d = pv(&[0.6, 0.8]);
        let ray = m.restrict_to_ray(&s0, &d).unwrap();
        assert!((ray.coeffs[0] - (3.0 + t.gradient().pair(&s0))).abs() < 1e-15);
        assert!((ray.coeffs[1] + t.gradient().pair(&d)).abs() < 1e-15);
        assert!(matches!(
            m.restrict_to_ray(&s0, &pv(&[1.0, 1.0])),
            Err(Error::NonUnitDirection { .. })
        ));
    }

    #[test]
    fn ray_quadratic_coefficient_matches_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let space = NormedSpace::euclidean(3).unwrap();
        let m = RegularizedModel::new(random_taylor(2, 3, &mut rng), 0.0, 1.0, space).unwrap();
        let raw = random_vec(3, &mut rng);
        let d = raw.scaled(1.0 / space.norm(&raw).unwrap());
        let zero = PrimalVector::zeros(3);
        let ray = m.restrict_to_ray(&zero, &d).unwrap();
        let half_hdd = 0.5 * m.taylor().tensors()[1].apply(&[&d, &d]).unwrap();
        assert!((ray.coeffs[2] - half_hdd).abs() < 1e-14);

        // Second divided difference of exact samples recovers c₂ for a quadratic.
        let ts = [-1.0, -0.5, 0.0, 0.5, 1.0];
        let ys: Vec<f64> = ts.iter().map(|&t| m.eval(&d.scaled(-t)).unwrap()).collect();
        let h = 0.5;
        for k in 1..4 {
            let c2 = (ys[k + 1] - 2.0 * ys[k] + ys[k - 1]) / (2.0 * h * h);
            assert!((c2 - ray.coeffs[2]).abs() < 1e-12);
        }
    }

    #[test]
    fn ray_evaluation_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for (r, p) in [(2.0, 2), (1.5, 3), (3.0, 1)] {
            let space = NormedSpace::new(4, r).unwrap();
            let m = RegularizedModel::new(random_taylor(p, 4, &mut rng), 1.3, 0.6, space).unwrap();
            let s0 = random_vec(4, &mut rng);
            let raw = random_vec(4, &mut rng);
            let d = raw.scaled(1.0 / space.norm(&raw).unwrap());
            let ray = m.restrict_to_ray(&s0, &d).unwrap();
            for _ in 0..20 {
                let t: f64 = rng.random_range(-3.0..3.0);
                let point = s0.add_scaled(-t, &d);
                let reg = m.reg_coefficient() * space.norm(&point).unwrap().powf(m.exponent());
                let direct = m.eval(&point).unwrap();
                assert!((ray.eval(t) + reg - direct).abs() <= 1e-10 * direct.abs().max(1.0));
                // derivative check against central differences of the polynomial
                let fd = (ray.eval(t + 1e-6) - ray.eval(t - 1e-6)) / 2e-6;
                assert!((fd - ray.derivative(t)).abs() <= 1e-6 * fd.abs().max(1.0));
            }
        }
    }
}
