//! Step computation: steepest descent in the dual-direction sense with an
//! exact one-dimensional global minimization, applied to a regularized model.
//!
//! Starting from s = 0 each iteration takes G = ∇m(s), the unit direction d
//! with ⟨G, d⟩ = ‖G‖_*, and moves to the global minimizer of τ ↦ m(s − τd)
//! over τ ≥ 0. The iteration stops as soon as
//!
//! ```text
//! ‖∇m(s)‖_* ≤ max(grad_tol, θ‖s‖^{p+β−1})
//! ```
//!
//! where the θ branch only applies once s ≠ 0. Model values decrease strictly
//! along the way.

use log::trace;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{dot, NormedSpace, PrimalVector};
use crate::tensor::RegularizedModel;

/// The Taylor increment and gradient are updated along each ray and
/// recomputed from the tensors this often, which bounds rounding drift.
const REFRESH_EVERY: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerConfig {
    /// Absolute tolerance on ‖∇m(s)‖_* (χε in the outer loop).
    pub grad_tol: f64,
    /// Optional (θ, exponent) for the rule ‖∇m(s)‖_* ≤ θ‖s‖^exponent.
    pub step_power: Option<(f64, f64)>,
    pub max_iters: usize,
    /// Grid density of the 1D scan.
    pub ray_scan_points: usize,
    /// Relative tolerance on the 1D derivative when refining a local minimizer.
    pub ray_refine_tol: f64,
}

const DEFAULT_MIN_ITERS: usize = 10_000;

impl InnerConfig {
    /// Defaults for a model of order `p` on ℝⁿ: a scan of 64(p+1) points,
    /// refinement to 1e−12 and max(10⁴, 8n²) iterations. Steepest descent
    /// needs on the order of κ iterations for model curvature condition
    /// number κ, and discretized second-order operators have κ ~ n².
    pub fn with_defaults(n: usize, p: usize, grad_tol: f64, step_power: Option<(f64, f64)>) -> Self {
        Self {
            grad_tol,
            step_power,
            max_iters: DEFAULT_MIN_ITERS.max(8 * n * n),
            ray_scan_points: 64 * (p + 1),
            ray_refine_tol: 1e-12,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) {
            return Err(invalid("grad_tol", "must be positive"));
        }
        if let Some((theta, exponent)) = self.step_power {
            if !(theta > 0.0) {
                return Err(invalid("theta", "must be positive"));
            }
            if !(exponent > 0.0) {
                return Err(invalid("step_power exponent", "must be positive"));
            }
        }
        if self.max_iters == 0 {
            return Err(invalid("max_iters", "must be at least 1"));
        }
        if self.ray_scan_points < 4 {
            return Err(invalid("ray_scan_points", "need at least 4 scan points"));
        }
        if !(self.ray_refine_tol > 0.0) {
            return Err(invalid("ray_refine_tol", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InnerTermination {
    GradientBelowTol,
    StepPowerRule,
    ZeroGradient,
    MaxIters,
    /// The line minimizer no longer lowers the computed model value; only
    /// happens when the gradient is at rounding level.
    LineSearchStalled,
}

impl InnerTermination {
    /// Whether the returned step satisfies the gradient stopping rule.
    pub fn meets_stopping_rule(self) -> bool {
        matches!(
            self,
            InnerTermination::GradientBelowTol | InnerTermination::StepPowerRule | InnerTermination::ZeroGradient
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerResult {
    pub s: PrimalVector,
    pub model_value: f64,
    /// T(x,0) − T(x,s), the decrease of the Taylor part alone.
    pub taylor_decrease: f64,
    /// σ/(p+β)! ‖s‖^{p+β} at the returned step.
    pub regularizer: f64,
    pub step_norm: f64,
    pub model_grad_dual_norm: f64,
    pub iterations: usize,
    /// m(s) < m(0).
    pub decreased: bool,
    pub termination: InnerTermination,
    /// m(sᵢ) − m(0) for every iterate, starting with 0 at s = 0.
    pub model_trace: Vec<f64>,
}

/// Minimizes the regularized model from s = 0.
pub fn minimize_model(model: &RegularizedModel, cfg: &InnerConfig) -> Result<InnerResult> {
    cfg.validate()?;
    if !(model.sigma() > 0.0) {
        return Err(Error::NonCoercive { sigma: model.sigma() });
    }
    let space = *model.space();
    let n = space.dim();
    let taylor = model.taylor();
    let f0 = taylor.f0();
    let p = model.p();
    let mut s = vec![0.0; n];
    let (mut inc, mut taylor_grad) = taylor.increment_and_gradient(&s);
    let mut reg = 0.0;
    let mut grad = taylor_grad.clone();
    let mut delta = inc + reg;
    let mut trace_values = vec![delta];
    let mut iterations = 0;
    let mut tau_prev = 1.0;
    let mut candidate = vec![0.0; n];
    let mut c_taylor_grad = vec![0.0; n];

    let termination = loop {
        let gn = space.dual_norm_unchecked(&grad);
        if gn == 0.0 {
            break InnerTermination::ZeroGradient;
        }
        if gn <= cfg.grad_tol {
            break InnerTermination::GradientBelowTol;
        }
        let sn = space.norm_unchecked(&s);
        if let Some((theta, exponent)) = cfg.step_power {
            if sn > 0.0 && gn <= theta * sn.powf(exponent) {
                break InnerTermination::StepPowerRule;
            }
        }
        if iterations == cfg.max_iters {
            break InnerTermination::MaxIters;
        }

        let d = space.dual_direction_unchecked(&grad, gn);
        let w = taylor.directional_derivatives(&s, &d);
        let mut poly = vec![inc; p + 1];
        let mut scale = 1.0;
        for j in 1..=p {
            scale *= -1.0 / j as f64;
            poly[j] = scale * dot(if j == 1 { &taylor_grad } else { &w[j - 2] }, &d);
        }
        let ray = RayFunction::new(model, poly, &s, &d, sn, delta);
        let tau = ray.global_minimizer(cfg, gn, tau_prev);
        tau_prev = tau;
        candidate
            .iter_mut()
            .zip(s.iter().zip(&d))
            .for_each(|(c, (si, di))| *c = si - tau * di);
        let c_inc = if (iterations + 1) % REFRESH_EVERY == 0 {
            let (c_inc, g) = taylor.increment_and_gradient(&candidate);
            c_taylor_grad = g;
            c_inc
        } else {
            c_taylor_grad.copy_from_slice(&taylor_grad);
            let mut scale = 1.0;
            for (j, wj) in w.iter().enumerate() {
                scale *= -tau / (j + 1) as f64;
                c_taylor_grad.iter_mut().zip(wj).for_each(|(gi, wi)| *gi += scale * wi);
            }
            ray.poly_value(tau)
        };
        let c_norm = space.norm_unchecked(&candidate);
        let c_reg = model.regularizer_at_norm(c_norm);
        let c_delta = c_inc + c_reg;
        if !(c_delta < delta) {
            trace!("inner: stalled at iteration {iterations}, |G| = {gn:e}, tau = {tau:e}");
            break InnerTermination::LineSearchStalled;
        }
        grad.copy_from_slice(&c_taylor_grad);
        model.add_regularizer_gradient(&candidate, c_norm, &mut grad);
        std::mem::swap(&mut s, &mut candidate);
        std::mem::swap(&mut taylor_grad, &mut c_taylor_grad);
        inc = c_inc;
        reg = c_reg;
        delta = c_delta;
        trace_values.push(delta);
        iterations += 1;
    };

    let model_grad_dual_norm = space.dual_norm_unchecked(&grad);
    let step_norm = space.norm_unchecked(&s);
    Ok(InnerResult {
        s: PrimalVector::from_raw(s),
        model_value: f0 + delta,
        taylor_decrease: -inc,
        regularizer: reg,
        step_norm,
        model_grad_dual_norm,
        iterations,
        decreased: delta < 0.0,
        termination,
        model_trace: trace_values,
    })
}

/// Regularizer along the ray: c‖s₀ − τd‖^e.
enum RayRegularizer<'a> {
    /// ℓ² case: ‖s₀ − τd‖² = a − 2bτ + τ² with a = ‖s₀‖², b = ⟨s₀, d⟩.
    Euclidean { a: f64, b: f64 },
    General {
        space: &'a NormedSpace,
        s0: &'a [f64],
        d: &'a [f64],
    },
}

/// φ(τ) = m(s₀ − τd) − m(0) on τ ≥ 0.
struct RayFunction<'a> {
    poly: Vec<f64>,
    /// Coefficients of the polynomial's derivative.
    dpoly: Vec<f64>,
    reg: RayRegularizer<'a>,
    coef: f64,
    grad_coef: f64,
    exponent: f64,
    /// x ↦ x^e and x ↦ x^{e−2}.
    pow_e: Power,
    pow_e2: Power,
    anchor_norm: f64,
    phi0: f64,
}

impl<'a> RayFunction<'a> {
    /// `poly` holds the coefficients of τ ↦ T(x, s₀ − τd) − f(x).
    fn new(model: &'a RegularizedModel, poly: Vec<f64>, s0: &'a [f64], d: &'a [f64], s0_norm: f64, phi0: f64) -> Self {
        let space = model.space();
        let reg = if space.r() == 2.0 {
            RayRegularizer::Euclidean {
                a: s0_norm * s0_norm,
                b: dot(s0, d),
            }
        } else {
            RayRegularizer::General { space, s0, d }
        };
        let dpoly = poly.iter().enumerate().skip(1).map(|(j, c)| j as f64 * c).collect();
        Self {
            poly,
            dpoly,
            reg,
            coef: model.reg_coefficient(),
            grad_coef: model.reg_gradient_coefficient(),
            exponent: model.exponent(),
            pow_e: Power::new(model.exponent()),
            pow_e2: Power::new(model.exponent() - 2.0),
            anchor_norm: s0_norm,
            phi0,
        }
    }

    fn poly_value(&self, t: f64) -> f64 {
        horner(&self.poly, t)
    }

    fn poly_derivative(&self, t: f64) -> f64 {
        horner(&self.dpoly, t)
    }

    fn value(&self, t: f64) -> f64 {
        let norm = match &self.reg {
            RayRegularizer::Euclidean { a, b } => (a - 2.0 * b * t + t * t).max(0.0).sqrt(),
            RayRegularizer::General { space, s0, d } => {
                let point: Vec<f64> = s0.iter().zip(d.iter()).map(|(x, y)| x - t * y).collect();
                space.norm_unchecked(&point)
            }
        };
        self.poly_value(t) + self.coef * self.pow_e.apply(norm)
    }

    fn derivative(&self, t: f64) -> f64 {
        let reg = match &self.reg {
            RayRegularizer::Euclidean { a, b } => {
                let norm = (a - 2.0 * b * t + t * t).max(0.0).sqrt();
                if norm == 0.0 {
                    0.0
                } else {
                    // d/dτ ‖s₀−τd‖^e = e‖s₀−τd‖^{e−2}(τ − b)
                    self.coef * self.exponent * self.pow_e2.apply(norm) * (t - b)
                }
            }
            RayRegularizer::General { space, s0, d } => {
                let point: Vec<f64> = s0.iter().zip(d.iter()).map(|(x, y)| x - t * y).collect();
                let j = space.duality_map_unchecked(&point, self.exponent);
                -self.grad_coef * dot(&j, d)
            }
        };
        self.poly_derivative(t) + reg
    }

    fn poly_is_convex(&self) -> bool {
        match self.poly.len() {
            0..=2 => true,
            3 => self.poly[2] >= 0.0,
            _ => false,
        }
    }

    /// Lower bound on φ for τ ≥ 0 from |coefficients| and ‖s₀−τd‖ ≥ τ − ‖s₀‖;
    /// returns (value, derivative).
    fn lower_bound(&self, t: f64) -> (f64, f64) {
        let mut v = self.poly[0];
        let mut dv = 0.0;
        for (j, c) in self.poly.iter().enumerate().skip(1) {
            v -= c.abs() * pow(t, j as f64);
            dv -= j as f64 * c.abs() * pow(t, j as f64 - 1.0);
        }
        let gap = (t - self.anchor_norm).max(0.0);
        v += self.coef * pow(gap, self.exponent);
        dv += self.coef * self.exponent * pow(gap, self.exponent - 1.0);
        (v, dv)
    }

    /// Global minimizer over τ ≥ 0. φ'(0) = −‖G‖_* < 0 on entry.
    /// `start` seeds the bracket search and only affects the cost.
    fn global_minimizer(&self, cfg: &InnerConfig, slope0: f64, start: f64) -> f64 {
        // Bracket: φ(T) > φ(0) with φ(T/2) ≤ φ(0).
        let mut t_bracket = if start.is_normal() { 2.0 * start } else { 1.0 };
        if self.value(t_bracket) <= self.phi0 {
            while self.value(t_bracket) <= self.phi0 && t_bracket < 1e300 {
                t_bracket *= 2.0;
            }
        } else {
            while t_bracket > 1e-300 && self.value(0.5 * t_bracket) > self.phi0 {
                t_bracket *= 0.5;
            }
        }
        // A convex polynomial part makes φ convex, so φ' changes sign once in (0, T).
        if self.poly_is_convex() {
            let hi = self.derivative(t_bracket);
            if hi > 0.0 {
                let tol = cfg.ray_refine_tol * slope0.max(1.0);
                return self.refine(0.0, t_bracket, -slope0, hi, tol, cfg.ray_refine_tol);
            }
        }
        // Beyond t_safe, φ stays above φ(0): the lower bound is above φ(0)
        // and increasing, and its growth rate only improves with τ.
        let mut t_safe = t_bracket;
        loop {
            let (lb, dlb) = self.lower_bound(t_safe);
            if (lb > self.phi0 && dlb > 0.0) || t_safe > 1e300 {
                break;
            }
            t_safe *= 2.0;
        }

        let m = cfg.ray_scan_points;
        let geo = m / 2;
        let uniform: Vec<f64> = (0..=m).map(|i| t_bracket * i as f64 / m as f64).collect();
        let mut low = Vec::with_capacity(geo + 1);
        geometric(&mut low, t_bracket * 1e-12, t_bracket, geo);
        let mut grid = merge_sorted(&uniform, &low);
        if t_safe > t_bracket {
            geometric(&mut grid, t_bracket, t_safe, geo);
        }
        grid.dedup();

        let slopes: Vec<f64> = grid.iter().map(|&t| self.derivative(t)).collect();
        let tol = cfg.ray_refine_tol * slope0.max(1.0);
        let mut best = (0.0, self.phi0);
        let mut found = false;
        for i in 0..grid.len() - 1 {
            if slopes[i] < 0.0 && slopes[i + 1] >= 0.0 {
                let t = self.refine(grid[i], grid[i + 1], slopes[i], slopes[i + 1], tol, cfg.ray_refine_tol);
                let v = self.value(t);
                found = true;
                if v < best.1 {
                    best = (t, v);
                }
            }
        }
        if !found {
            for &t in &grid {
                let v = self.value(t);
                if v < best.1 {
                    best = (t, v);
                }
            }
        }
        best.0
    }

    /// Locates a zero of φ' in [lo, hi] with φ'(lo) < 0 ≤ φ'(hi) by
    /// Illinois-modified regula falsi with a bisection fallback. Stops once
    /// |φ'| ≤ `tol` or the iterate moves by less than `rel` relative.
    #[allow(clippy::too_many_arguments)]
    fn refine(&self, mut lo: f64, mut hi: f64, mut flo: f64, mut fhi: f64, tol: f64, rel: f64) -> f64 {
        let mut side = 0i8;
        let mut prev = f64::NAN;
        let mut width = hi - lo;
        let mut bisect = false;
        for it in 0..200 {
            let secant = hi - fhi * (hi - lo) / (fhi - flo);
            let t = if bisect || !(secant > lo && secant < hi) {
                0.5 * (lo + hi)
            } else {
                secant
            };
            let ft = self.derivative(t);
            if ft.abs() <= tol || (t - prev).abs() <= rel * t || hi - lo <= rel * hi {
                return t;
            }
            prev = t;
            if ft < 0.0 {
                lo = t;
                flo = ft;
                if side == -1 {
                    fhi *= 0.5;
                }
                side = -1;
            } else {
                hi = t;
                fhi = ft;
                if side == 1 {
                    flo *= 0.5;
                }
                side = 1;
            }
            // Bisect once whenever three steps fail to halve the bracket.
            bisect = false;
            if it % 3 == 2 {
                bisect = hi - lo > 0.5 * width;
                width = hi - lo;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Appends `count` points lo·ρ^i, i = 0..count, with ρ = (hi/lo)^{1/count}.
fn geometric(grid: &mut Vec<f64>, lo: f64, hi: f64, count: usize) {
    let ratio = (hi / lo).powf(1.0 / count as f64);
    let mut t = lo;
    for _ in 0..count {
        grid.push(t);
        t *= ratio;
    }
    grid.push(hi);
}

fn merge_sorted(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

fn horner(coeffs: &[f64], t: f64) -> f64 {
    let mut acc = 0.0;
    for &c in coeffs.iter().rev() {
        acc = acc * t + c;
    }
    acc
}

/// xᵉ, with small integer exponents kept off the slow path.
fn pow(x: f64, e: f64) -> f64 {
    Power::new(e).apply(x)
}

#[derive(Debug, Clone, Copy)]
enum Power {
    Int(i32),
    Real(f64),
}

impl Power {
    fn new(e: f64) -> Self {
        if e.fract() == 0.0 && e.abs() < 64.0 {
            Power::Int(e as i32)
        } else {
            Power::Real(e)
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Power::Int(0) => 1.0,
            Power::Int(1) => x,
            Power::Int(2) => x * x,
            Power::Int(3) => x * x * x,
            Power::Int(k) => x.powi(k),
            Power::Real(e) => x.powf(e),
        }
    }
}
