//! The outer adaptive regularization loop and post-hoc verification of a
//! recorded trajectory.
//!
//! Each iteration builds the p-th order Taylor model at xₖ, regularizes it
//! with σₖ/(p+β)! ‖s‖^{p+β}, computes a step with [`minimize_model`], and
//! accepts it when ρₖ = (f(xₖ) − f(xₖ+sₖ)) / ΔTₖ ≥ η₁. σ shrinks by γ₁ on
//! very successful steps (ρ ≥ η₂), is kept on successful ones and grows by
//! γ₂ otherwise.

use std::fmt;

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{NormedSpace, PrimalVector};
use crate::inner::{minimize_model, InnerConfig, InnerTermination};
use crate::problems::ProblemOracle;
use crate::tensor::{factorial, RegularizedModel, TaylorModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OuterConfig {
    pub sigma0: f64,
    pub sigma_min: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub chi: f64,
    pub theta: f64,
    pub epsilon: f64,
    pub p: usize,
    pub beta: f64,
    pub max_outer_iters: usize,
    /// Overrides the inner iteration budget when set.
    pub inner_max_iters: Option<usize>,
}

impl Default for OuterConfig {
    fn default() -> Self {
        Self {
            sigma0: 1.0,
            sigma_min: 1e-6,
            eta1: 0.1,
            eta2: 0.9,
            gamma1: 0.5,
            gamma2: 2.0,
            gamma3: 10.0,
            chi: 0.5,
            theta: 100.0,
            epsilon: 1e-5,
            p: 2,
            beta: 1.0,
            max_outer_iters: 10_000,
            inner_max_iters: None,
        }
    }
}

impl OuterConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, format!("must be positive and finite, got {v}")))
            }
        };
        positive("sigma0", self.sigma0)?;
        positive("sigma_min", self.sigma_min)?;
        if self.sigma_min > self.sigma0 {
            return Err(invalid("sigma_min", "must not exceed sigma0"));
        }
        if !(self.eta1 > 0.0 && self.eta1 <= self.eta2 && self.eta2 < 1.0) {
            return Err(invalid("eta1", "need 0 < eta1 <= eta2 < 1"));
        }
        if !(self.gamma1 > 0.0 && self.gamma1 < 1.0) {
            return Err(invalid("gamma1", "must lie in (0, 1)"));
        }
        if !(self.gamma2 > 1.0 && self.gamma2 < self.gamma3 && self.gamma3.is_finite()) {
            return Err(invalid("gamma2", "need 1 < gamma2 < gamma3"));
        }
        if !(self.chi > 0.0 && self.chi < 1.0) {
            return Err(invalid("chi", "must lie in (0, 1)"));
        }
        positive("theta", self.theta)?;
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(invalid("epsilon", "must lie in (0, 1]"));
        }
        if self.p == 0 {
            return Err(invalid("p", "model order must be at least 1"));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(invalid("beta", "must lie in (0, 1]"));
        }
        if self.max_outer_iters == 0 {
            return Err(invalid("max_outer_iters", "must be at least 1"));
        }
        if self.inner_max_iters == Some(0) {
            return Err(invalid("inner_max_iters", "must be at least 1"));
        }
        Ok(())
    }

    /// Regularization exponent p + β.
    pub fn exponent(&self) -> f64 {
        self.p as f64 + self.beta
    }

    /// (p+β)/(p+β−1), the power of 1/ε in the evaluation bound.
    pub fn complexity_exponent(&self) -> f64 {
        let a = self.exponent();
        a / (a - 1.0)
    }

    /// γ₃·max(σ₀, L/(1−η₂)).
    pub fn sigma_cap(&self, lipschitz: f64) -> f64 {
        self.gamma3 * self.sigma0.max(lipschitz / (1.0 - self.eta2))
    }

    /// Lower bound c with ‖sₖ‖^{p+β−1} ≥ c·ε on successful iterations that
    /// do not terminate, for σₖ ≤ `sigma_max`.
    pub fn step_lower_bound_factor(&self, lipschitz: f64, sigma_max: f64) -> f64 {
        let ga = factorial(self.exponent() - 1.0);
        ((1.0 - self.chi) * ga / (lipschitz + sigma_max)).min(ga / (lipschitz + sigma_max + self.theta * ga))
    }

    /// Bound on the number of successful iterations before termination:
    /// (p+β)!/(η₁σ_min)·(f₀ − f_low)·(c·ε)^{−(p+β)/(p+β−1)}.
    pub fn complexity_bound(&self, lipschitz: f64, sigma_max: f64, f0: f64, f_low: f64) -> f64 {
        let c = self.step_lower_bound_factor(lipschitz, sigma_max);
        factorial(self.exponent()) / (self.eta1 * self.sigma_min)
            * (f0 - f_low).max(0.0)
            * (c * self.epsilon).powf(-self.complexity_exponent())
    }

    /// The bound checked by (f) for a finished run: σ_max is the larger of
    /// the σ cap and the largest σ observed.
    pub fn run_complexity_bound(&self, run: &RunRecord, lipschitz: f64, f_low: f64) -> f64 {
        let sigma_max = self.sigma_cap(lipschitz).max(run.sigma_max_observed);
        self.complexity_bound(lipschitz, sigma_max, run.initial_f, f_low)
    }

    fn regularizer(&self, sigma: f64, step_norm: f64) -> f64 {
        // Same operation order as RegularizedModel::regularizer_at_norm.
        sigma / factorial(self.exponent()) * step_norm.powf(self.exponent())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub sigma: f64,
    pub f_value: f64,
    pub trial_f: f64,
    pub step_norm: f64,
    /// ‖g(xₖ)‖_*.
    pub grad_dual_norm: f64,
    /// ΔTₖ = T(xₖ, 0) − T(xₖ, sₖ).
    pub model_decrease: f64,
    pub actual_decrease: f64,
    /// Σ_l |∇ˡf(xₖ)[sₖ]ˡ|/l!, the scale of rounding in ΔTₖ.
    pub taylor_magnitude: f64,
    pub rho: f64,
    pub successful: bool,
    pub inner_iters: usize,
    pub inner_termination: InnerTermination,
    pub model_grad_dual_norm: f64,
    pub f_evals: usize,
    pub deriv_evals: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    Converged,
    MaxIters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub records: Vec<IterationRecord>,
    pub initial_point: PrimalVector,
    pub initial_f: f64,
    pub final_point: PrimalVector,
    pub final_f: f64,
    pub final_grad_dual_norm: f64,
    /// σ after the last update.
    pub final_sigma: f64,
    pub status: RunStatus,
    /// Largest σ held at any time, the final one included.
    pub sigma_max_observed: f64,
    /// Largest ‖·‖_∞ over iterates and trial points.
    pub box_radius: f64,
    pub f_evals: usize,
    pub deriv_evals: usize,
}

impl RunRecord {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn successful_count(&self) -> usize {
        self.records.iter().filter(|r| r.successful).count()
    }

    /// Gradient norm at x_{k+1}, if iteration k was successful.
    fn next_grad(&self, k: usize) -> Option<f64> {
        if !self.records[k].successful {
            return None;
        }
        Some(
            self.records
                .get(k + 1)
                .map(|r| r.grad_dual_norm)
                .unwrap_or(self.final_grad_dual_norm),
        )
    }

    /// Successful iterations whose new iterate is not yet ε-stationary.
    pub fn successful_before_termination(&self, epsilon: f64) -> usize {
        (0..self.records.len())
            .filter(|&k| self.next_grad(k).is_some_and(|g| g > epsilon))
            .count()
    }
}

/// Runs the adaptive regularization method from `x0`.
pub fn solve<P: ProblemOracle + ?Sized>(
    problem: &P,
    space: &NormedSpace,
    x0: &PrimalVector,
    cfg: &OuterConfig,
) -> Result<RunRecord> {
    cfg.validate()?;
    let n = problem.dim();
    if space.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: space.dim(),
        });
    }
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x0.len(),
        });
    }
    if problem.max_order() < cfg.p {
        return Err(Error::MissingDerivative {
            order: cfg.p,
            max: problem.max_order(),
        });
    }

    let derivatives = |x: &PrimalVector| {
        (1..=cfg.p)
            .map(|l| problem.eval_derivative(x, l))
            .collect::<Result<Vec<_>>>()
    };

    let mut x = x0.clone();
    let mut f = problem.eval_f(&x)?;
    let mut tensors = derivatives(&x)?;
    let mut f_evals = 1;
    let mut deriv_evals = 1;
    let mut gn = space.dual_norm_unchecked(tensors[0].entries());
    let mut sigma = cfg.sigma0;
    let mut sigma_max = sigma;
    let mut box_radius = x.max_abs();
    let mut records = Vec::new();

    let mut inner_cfg =
        InnerConfig::with_defaults(n, cfg.p, cfg.chi * cfg.epsilon, Some((cfg.theta, cfg.exponent() - 1.0)));
    if let Some(m) = cfg.inner_max_iters {
        inner_cfg.max_iters = m;
    }

    let status = loop {
        if gn <= cfg.epsilon {
            break RunStatus::Converged;
        }
        let k = records.len();
        if k == cfg.max_outer_iters {
            break RunStatus::MaxIters;
        }
        let taylor = TaylorModel::new(x.clone(), f, tensors.clone())?;
        let model = RegularizedModel::new(taylor, sigma, cfg.beta, *space)?;
        let inner = minimize_model(&model, &inner_cfg)?;

        let trial = x.add_scaled(1.0, &inner.s);
        box_radius = box_radius.max(trial.max_abs());
        let trial_f = problem.eval_f(&trial)?;
        f_evals += 1;

        let model_decrease = inner.taylor_decrease;
        let actual_decrease = f - trial_f;
        let rho = if model_decrease > 0.0 {
            actual_decrease / model_decrease
        } else {
            0.0
        };
        let valid = inner.decreased && inner.termination.meets_stopping_rule();
        let successful = valid && rho >= cfg.eta1;
        let taylor_magnitude = tensors
            .iter()
            .enumerate()
            .map(|(i, t)| t.repeated(inner.s.as_slice(), i + 1).entries()[0].abs() / factorial((i + 1) as f64))
            .sum();

        debug!(
            "k={k} sigma={sigma:e} |g|={gn:e} |s|={:e} rho={rho:.4} inner={} {:?}",
            inner.step_norm, inner.iterations, inner.termination
        );

        let (record_sigma, record_f, record_gn) = (sigma, f, gn);
        sigma = if successful && rho >= cfg.eta2 {
            cfg.sigma_min.max(cfg.gamma1 * sigma)
        } else if successful {
            sigma
        } else {
            cfg.gamma2 * sigma
        };
        sigma_max = sigma_max.max(sigma);

        if successful {
            x = trial;
            f = trial_f;
            tensors = derivatives(&x)?;
            deriv_evals += 1;
            gn = space.dual_norm_unchecked(tensors[0].entries());
        }

        records.push(IterationRecord {
            k,
            sigma: record_sigma,
            f_value: record_f,
            trial_f,
            step_norm: inner.step_norm,
            grad_dual_norm: record_gn,
            model_decrease,
            actual_decrease,
            taylor_magnitude,
            rho,
            successful,
            inner_iters: inner.iterations,
            inner_termination: inner.termination,
            model_grad_dual_norm: inner.model_grad_dual_norm,
            f_evals,
            deriv_evals,
        });
    };

    Ok(RunRecord {
        records,
        initial_point: x0.clone(),
        initial_f: problem.eval_f(x0)?,
        final_point: x,
        final_f: f,
        final_grad_dual_norm: gn,
        final_sigma: sigma,
        status,
        sigma_max_observed: sigma_max,
        box_radius,
        f_evals,
        deriv_evals,
    })
}

/// Which trajectory inequality failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CheckKind {
    /// (a) ΔT ≥ σ/(p+β)! ‖s‖^{p+β}.
    ModelDecrease,
    /// (b) σₖ ≤ γ₃ max(σ₀, L/(1−η₂)).
    SigmaCap,
    /// (c) |f(xₖ+sₖ) − T(xₖ,sₖ)| ≤ L/(p+β)! ‖s‖^{p+β}.
    TaylorError,
    /// (d) ‖sₖ‖^{p+β−1} ≥ c·ε on non-terminal successful iterations.
    StepLowerBound,
    /// (e) total iterations bounded by successful ones and σ growth.
    UnsuccessfulCount,
    /// (f) successful iterations bounded by the evaluation complexity bound.
    ComplexityBound,
}

impl CheckKind {
    pub fn label(self) -> &'static str {
        match self {
            CheckKind::ModelDecrease => "a",
            CheckKind::SigmaCap => "b",
            CheckKind::TaylorError => "c",
            CheckKind::StepLowerBound => "d",
            CheckKind::UnsuccessfulCount => "e",
            CheckKind::ComplexityBound => "f",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub check: CheckKind,
    /// Iteration index, or None for whole-run checks.
    pub k: Option<usize>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.k {
            Some(k) => write!(f, "({}) at k={k}: {}", self.check.label(), self.detail),
            None => write!(f, "({}): {}", self.check.label(), self.detail),
        }
    }
}

/// Verifies the per-iteration and counting inequalities on a finished run.
/// Checks (b), (c), (d) need the Hölder constant `lipschitz`; (f) also needs
/// `f_low`.
pub fn check_trajectory(
    run: &RunRecord,
    cfg: &OuterConfig,
    lipschitz: Option<f64>,
    f_low: Option<f64>,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let a = cfg.exponent();

    for r in &run.records {
        let bound = cfg.regularizer(r.sigma, r.step_norm);
        if !(r.model_decrease >= bound) {
            out.push(Violation {
                check: CheckKind::ModelDecrease,
                k: Some(r.k),
                detail: format!("model decrease {:e} below {:e}", r.model_decrease, bound),
            });
        }
    }

    let s = run.successful_count() as f64;
    let total = run.iterations() as f64;
    let count_bound = s * (1.0 + cfg.gamma1.ln().abs() / cfg.gamma2.ln())
        + (run.sigma_max_observed / cfg.sigma0).ln() / cfg.gamma2.ln();
    if total > count_bound + 1e-9 * count_bound.max(1.0) {
        out.push(Violation {
            check: CheckKind::UnsuccessfulCount,
            k: None,
            detail: format!("{total} iterations exceed counting bound {count_bound:.3}"),
        });
    }

    let Some(l) = lipschitz else {
        return out;
    };
    let cap = cfg.sigma_cap(l);
    for r in &run.records {
        if r.sigma > cap {
            out.push(Violation {
                check: CheckKind::SigmaCap,
                k: Some(r.k),
                detail: format!("sigma {:e} above cap {:e}", r.sigma, cap),
            });
        }
        if r.trial_f.is_finite() {
            let err = (r.actual_decrease - r.model_decrease).abs();
            let bound = l / factorial(a) * r.step_norm.powf(a);
            let slack = 64.0 * f64::EPSILON * (r.f_value.abs() + r.trial_f.abs() + r.taylor_magnitude);
            if err > bound + slack {
                out.push(Violation {
                    check: CheckKind::TaylorError,
                    k: Some(r.k),
                    detail: format!("Taylor error {err:e} above {bound:e}"),
                });
            }
        }
    }

    // σₖ ≤ cap whenever (b) holds; the observed maximum keeps (d) meaningful otherwise.
    let sigma_max = cap.max(run.sigma_max_observed);
    let c = cfg.step_lower_bound_factor(l, sigma_max);
    for (k, r) in run.records.iter().enumerate() {
        if run.next_grad(k).is_some_and(|g| g > cfg.epsilon) {
            let lhs = r.step_norm.powf(a - 1.0);
            if lhs < c * cfg.epsilon * (1.0 - 1e-12) {
                out.push(Violation {
                    check: CheckKind::StepLowerBound,
                    k: Some(r.k),
                    detail: format!("|s|^(p+beta-1) = {lhs:e} below {:e}", c * cfg.epsilon),
                });
            }
        }
    }

    if let Some(f_low) = f_low {
        let count = run.successful_before_termination(cfg.epsilon) as f64;
        let bound = cfg.run_complexity_bound(run, l, f_low);
        if count > bound {
            out.push(Violation {
                check: CheckKind::ComplexityBound,
                k: None,
                detail: format!("{count} successful iterations exceed bound {bound:e}"),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{DoubleWell, HolderPower, Rosenbrock, TridiagonalQuadratic};

    fn cfg(p: usize, beta: f64, epsilon: f64) -> OuterConfig {
        OuterConfig {
            p,
            beta,
            epsilon,
            ..OuterConfig::default()
        }
    }

    #[test]
    fn default_config_is_valid() {
        OuterConfig::default().validate().unwrap();
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = [
            OuterConfig {
                sigma_min: 2.0,
                ..Default::default()
            },
            OuterConfig {
                eta1: 0.95,
                ..Default::default()
            },
            OuterConfig {
                gamma1: 1.0,
                ..Default::default()
            },
            OuterConfig {
                gamma3: 1.5,
                ..Default::default()
            },
            OuterConfig {
                chi: 1.0,
                ..Default::default()
            },
            OuterConfig {
                epsilon: 0.0,
                ..Default::default()
            },
            OuterConfig {
                p: 0,
                ..Default::default()
            },
            OuterConfig {
                beta: 1.5,
                ..Default::default()
            },
            OuterConfig {
                theta: -1.0,
                ..Default::default()
            },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn convex_quadratic_converges_with_clean_trajectory() {
        let q = TridiagonalQuadratic::new(6).unwrap();
        let space = NormedSpace::euclidean(6).unwrap();
        let c = cfg(2, 1.0, 1e-6);
        let run = solve(&q, &space, &q.default_start(), &c).unwrap();
        assert_eq!(run.status, RunStatus::Converged);
        assert!(run.final_grad_dual_norm <= 1e-6);
        let l = q.holder_constant(&space, 2, 1.0, run.box_radius).unwrap();
        assert_eq!(l, 0.0);
        let v = check_trajectory(&run, &c, Some(l), q.metadata().f_low);
        assert!(v.is_empty(), "{v:?}");
        // With L = 0 every valid step is very successful.
        for r in &run.records {
            if r.sigma >= l / (1.0 - c.eta2) && r.inner_termination.meets_stopping_rule() {
                assert!(r.successful);
            }
        }
    }

    #[test]
    fn stationary_start_takes_zero_iterations() {
        let q = TridiagonalQuadratic::new(4).unwrap();
        let space = NormedSpace::euclidean(4).unwrap();
        let x0 = q.minimizer();
        let run = solve(&q, &space, &x0, &cfg(2, 1.0, 1e-6)).unwrap();
        assert_eq!(run.iterations(), 0);
        assert_eq!(run.final_point, x0);
        assert_eq!(run.f_evals, 1);
        assert_eq!(run.deriv_evals, 1);
    }

    #[test]
    fn double_well_satisfies_all_inequalities() {
        let dw = DoubleWell::new(4, 2).unwrap();
        for r in [2.0, 1.5, 3.0] {
            let space = NormedSpace::new(4, r).unwrap();
            let c = cfg(2, 1.0, 1e-6);
            let run = solve(&dw, &space, &dw.default_start(), &c).unwrap();
            assert_eq!(run.status, RunStatus::Converged);
            let l = dw.holder_constant(&space, 2, 1.0, run.box_radius).unwrap();
            let v = check_trajectory(&run, &c, Some(l), dw.metadata().f_low);
            assert!(v.is_empty(), "r={r}: {v:?}");
        }
    }

    #[test]
    fn bookkeeping_invariants() {
        let rb = Rosenbrock::new(2).unwrap();
        for r in [1.5, 2.0, 3.0] {
            let space = NormedSpace::new(2, r).unwrap();
            let c = cfg(2, 1.0, 1e-6);
            let run = solve(&rb, &space, &rb.default_start(), &c).unwrap();
            assert_eq!(run.status, RunStatus::Converged, "r={r}");
            assert_eq!(run.f_evals, run.iterations() + 1);
            assert_eq!(run.deriv_evals, run.successful_count() + 1);
            let mut telescoped = 0.0;
            for rec in &run.records {
                assert!(rec.sigma >= c.sigma_min);
                if rec.successful {
                    assert!(rec.actual_decrease >= c.eta1 * rec.model_decrease);
                    assert!(rec.model_decrease > 0.0);
                    telescoped += rec.actual_decrease;
                }
            }
            let direct = run.initial_f - run.final_f;
            assert!((telescoped - direct).abs() <= 1e-12 * run.initial_f.abs().max(1.0));
            assert!(check_trajectory(&run, &c, None, None).is_empty());
        }
    }

    #[test]
    fn holder_family_first_order() {
        let h = HolderPower::new(3, 0.5).unwrap();
        let space = NormedSpace::euclidean(3).unwrap();
        let c = cfg(1, 0.5, 1e-3);
        let run = solve(&h, &space, &h.default_start(), &c).unwrap();
        assert_eq!(run.status, RunStatus::Converged);
        let l = h.holder_constant(&space, 1, 0.5, run.box_radius);
        let v = check_trajectory(&run, &c, l, Some(0.0));
        assert!(v.is_empty(), "{v:?}");
    }

    #[test]
    fn synthetic_model_decrease_violation_is_caught() {
        let dw = DoubleWell::new(2, 2).unwrap();
        let space = NormedSpace::euclidean(2).unwrap();
        let c = cfg(2, 1.0, 1e-6);
        let mut run = solve(&dw, &space, &dw.default_start(), &c).unwrap();
        assert!(check_trajectory(&run, &c, None, None).is_empty());
        let rec = &mut run.records[0];
        rec.model_decrease = 0.5 * c.regularizer(rec.sigma, rec.step_norm);
        let v = check_trajectory(&run, &c, None, None);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].check, CheckKind::ModelDecrease);
        assert_eq!(v[0].k, Some(0));
        assert!(v[0].to_string().starts_with("(a)"));
    }

    #[test]
    fn max_outer_iterations_reported() {
        let rb = Rosenbrock::new(2).unwrap();
        let space = NormedSpace::euclidean(2).unwrap();
        let c = OuterConfig {
            max_outer_iters: 3,
            ..cfg(2, 1.0, 1e-8)
        };
        let run = solve(&rb, &space, &rb.default_start(), &c).unwrap();
        assert_eq!(run.status, RunStatus::MaxIters);
        assert_eq!(run.iterations(), 3);
    }

    #[test]
    fn missing_derivative_order_rejected() {
        let h = HolderPower::new(2, 0.5).unwrap();
        let space = NormedSpace::euclidean(2).unwrap();
        let err = solve(&h, &space, &h.default_start(), &cfg(2, 0.5, 1e-3)).unwrap_err();
        assert!(matches!(err, Error::MissingDerivative { .. }));
    }
}
