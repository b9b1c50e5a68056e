use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::geometry::{NormedSpace, PrimalVector};
use crate::tensor::SymmetricTensor;

use super::{check_order, ProblemOracle};

const FD_RANDOM_DIRECTIONS: usize = 8;
const FD_MAX_AXES: usize = 64;

/// Worst relative error between ∇ˡf(x)[u, v₂, …, v_ℓ] and the central
/// difference of ∇ˡ⁻¹f along u, over coordinate axes and random directions.
///
/// Errors are scaled by max(1, |exact|).
pub fn fd_check_oracle<P: ProblemOracle + ?Sized>(problem: &P, x: &PrimalVector, order: usize) -> Result<f64> {
    if order == 0 {
        return Err(invalid("order", "must be at least 1"));
    }
    check_order(order, problem.max_order())?;
    let n = problem.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed ^ order as u64);
    let others: Vec<PrimalVector> = (1..order).map(|_| random_unit(&mut rng, n)).collect();
    let other_refs: Vec<&PrimalVector> = others.iter().collect();

    let mut directions: Vec<PrimalVector> = Vec::new();
    let stride = n.div_ceil(FD_MAX_AXES).max(1);
    for i in (0..n).step_by(stride) {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        directions.push(PrimalVector::from_raw(e));
    }
    directions.extend((0..FD_RANDOM_DIRECTIONS).map(|_| random_unit(&mut rng, n)));

    let h = f64::EPSILON.cbrt() * x.max_abs().max(1.0);
    let top = problem.eval_derivative(x, order)?;
    let mut worst = 0.0_f64;
    for u in &directions {
        let mut args = vec![u];
        args.extend(other_refs.iter().copied());
        let exact = top.apply(&args)?;
        let plus = problem
            .eval_derivative(&x.add_scaled(h, u), order - 1)?
            .apply(&other_refs)?;
        let minus = problem
            .eval_derivative(&x.add_scaled(-h, u), order - 1)?
            .apply(&other_refs)?;
        let fd = (plus - minus) / (2.0 * h);
        worst = worst.max((exact - fd).abs() / exact.abs().max(1.0));
    }
    Ok(worst)
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> PrimalVector {
    loop {
        let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut *rng)).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 0.0 {
            return PrimalVector::from_raw(v.into_iter().map(|a| a / norm).collect());
        }
    }
}

fn random_in_ball(rng: &mut ChaCha8Rng, space: &NormedSpace, radius: f64) -> PrimalVector {
    let v = random_unit(rng, space.dim());
    let nv = space.norm_unchecked(v.as_slice());
    let rho = radius * rng.random::<f64>();
    v.scaled(rho / nv)
}

/// Lower bound on the norm of a symmetric form on `space`: the largest
/// |S[u]^ℓ| seen by a dual-direction power iteration from random unit starts.
pub fn tensor_norm_lower_bound(tensor: &SymmetricTensor, space: &NormedSpace, starts: usize, seed: u64) -> f64 {
    let order = tensor.order();
    if order == 0 {
        return tensor.entries()[0].abs();
    }
    if order == 1 {
        return space.dual_norm_unchecked(tensor.entries());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = space.dim();
    let mut best = 0.0_f64;
    for _ in 0..starts.max(1) {
        let v = random_unit(&mut rng, n);
        let mut u: Vec<f64> = {
            let nv = space.norm_unchecked(v.as_slice());
            v.as_slice().iter().map(|a| a / nv).collect()
        };
        for _ in 0..50 {
            let g = tensor.repeated(&u, order - 1);
            let value = crate::geometry::dot(g.entries(), &u);
            best = best.max(value.abs());
            let gn = space.dual_norm_unchecked(g.entries());
            if gn == 0.0 {
                break;
            }
            let sign = if value < 0.0 { -1.0 } else { 1.0 };
            let next: Vec<f64> = space
                .dual_direction_unchecked(g.entries(), gn)
                .into_iter()
                .map(|a| sign * a)
                .collect();
            if next.iter().zip(&u).all(|(a, b)| (a - b).abs() <= 1e-14) {
                break;
            }
            u = next;
        }
    }
    best
}

/// Largest sampled quotient ‖∇ᵖf(x) − ∇ᵖf(y)‖ / ‖x − y‖^β over `pairs`
/// pairs in the ball of radius `radius`. Half the pairs are independent,
/// half are local perturbations at log-uniform scales.
pub fn sampled_holder_quotient<P: ProblemOracle + ?Sized>(
    problem: &P,
    space: &NormedSpace,
    p: usize,
    beta: f64,
    radius: f64,
    pairs: usize,
    seed: u64,
) -> Result<f64> {
    check_order(p, problem.max_order())?;
    if !(radius > 0.0) {
        return Err(invalid("radius", "must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0_f64;
    for k in 0..pairs {
        let x = random_in_ball(&mut rng, space, radius);
        let y = if k % 2 == 0 {
            random_in_ball(&mut rng, space, radius)
        } else {
            let scale = radius * 10f64.powf(-4.0 * rng.random::<f64>());
            let w = random_in_ball(&mut rng, space, scale);
            let y = x.add_scaled(1.0, &w);
            let ny = space.norm_unchecked(y.as_slice());
            if ny > radius {
                y.scaled(radius / ny)
            } else {
                y
            }
        };
        let dist = space.norm_unchecked(x.add_scaled(-1.0, &y).as_slice());
        if dist == 0.0 {
            continue;
        }
        let dx = problem.eval_derivative(&x, p)?;
        let dy = problem.eval_derivative(&y, p)?;
        let diff: Vec<f64> = dx.entries().iter().zip(dy.entries()).map(|(a, b)| a - b).collect();
        let diff = SymmetricTensor::from_entries(p, space.dim(), diff)?;
        let norm = tensor_norm_lower_bound(&diff, space, 3, seed.wrapping_add(k as u64));
        best = best.max(norm / dist.powf(beta));
    }
    Ok(best)
}
