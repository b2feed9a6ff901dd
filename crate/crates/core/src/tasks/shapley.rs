//! Shapley values of gradient contributions under a cosine utility.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{invalid, Result};
use crate::geometry::Vector;

/// Largest player count accepted by [`shapley_exact`].
pub const EXACT_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapleyMethod {
    Exact,
    MonteCarlo(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapleyVector {
    pub values: Vec<f64>,
    pub method: ShapleyMethod,
    /// Standard error of each estimate; `None` for exact values.
    pub std_errors: Option<Vec<f64>>,
}

fn check(grads: &[Vector], grad_val: &Vector) -> Result<f64> {
    if grads.iter().any(|g| g.dim() != grad_val.dim()) {
        return Err(invalid("gradient dimensions must match the validation gradient"));
    }
    let norm = grad_val.norm_squared().sqrt();
    if norm == 0.0 {
        return Err(invalid("validation gradient must be non-zero"));
    }
    Ok(norm)
}

fn cosine(sum: &[f64], grad_val: &Vector, val_norm: f64) -> f64 {
    let norm = sum.iter().map(|c| c * c).sum::<f64>().sqrt();
    if norm == 0.0 {
        return 0.0;
    }
    let dot: f64 = sum.iter().zip(grad_val.as_slice()).map(|(a, b)| a * b).sum();
    dot / (norm * val_norm)
}

/// Cosine similarity between `grad_val` and the summed gradients of `subset`;
/// zero for the empty set or a zero sum.
pub fn cosine_utility(subset: &[usize], grads: &[Vector], grad_val: &Vector) -> Result<f64> {
    let val_norm = check(grads, grad_val)?;
    let mut sum = vec![0.0; grad_val.dim()];
    for &i in subset {
        let g = grads
            .get(i)
            .ok_or_else(|| invalid(format!("subset index {i} out of range")))?;
        for (s, c) in sum.iter_mut().zip(g.as_slice()) {
            *s += c;
        }
    }
    Ok(cosine(&sum, grad_val, val_norm))
}

/// Exact values by enumerating all coalitions with weights `k! (n-k-1)! / n!`.
pub fn shapley_exact(grads: &[Vector], grad_val: &Vector) -> Result<ShapleyVector> {
    let val_norm = check(grads, grad_val)?;
    let n = grads.len();
    if n > EXACT_LIMIT {
        return Err(invalid(format!("{n} players exceeds the exact limit {EXACT_LIMIT}; use Monte Carlo")));
    }
    let d = grad_val.dim();
    let size = 1usize << n;
    // utility of every coalition from incremental subset sums
    let mut sums = vec![0.0; size * d];
    let mut utility = vec![0.0; size];
    for mask in 1..size {
        let low = mask.trailing_zeros() as usize;
        let rest = mask & (mask - 1);
        for k in 0..d {
            sums[mask * d + k] = sums[rest * d + k] + grads[low][k];
        }
        utility[mask] = cosine(&sums[mask * d..(mask + 1) * d], grad_val, val_norm);
    }
    // weight[k] = k! (n-k-1)! / n!
    let weight: Vec<f64> = (0..n.max(1))
        .map(|k| {
            let mut w = 1.0 / n as f64;
            for t in 1..=k {
                w *= t as f64 / (n - t) as f64;
            }
            w
        })
        .collect();
    let values = (0..n)
        .map(|i| {
            let bit = 1usize << i;
            (0..size)
                .filter(|m| m & bit == 0)
                .map(|m| weight[m.count_ones() as usize] * (utility[m | bit] - utility[m]))
                .sum()
        })
        .collect();
    Ok(ShapleyVector { values, method: ShapleyMethod::Exact, std_errors: None })
}

/// Permutation-sampling estimate over `samples` uniformly random orderings.
pub fn shapley_monte_carlo<R: Rng + ?Sized>(
    grads: &[Vector],
    grad_val: &Vector,
    samples: usize,
    rng: &mut R,
) -> Result<ShapleyVector> {
    let val_norm = check(grads, grad_val)?;
    if samples == 0 {
        return Err(invalid("Monte Carlo needs at least one sample"));
    }
    let n = grads.len();
    let d = grad_val.dim();
    let mut total = vec![0.0; n];
    let mut total_sq = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    let mut running = vec![0.0; d];
    for _ in 0..samples {
        order.shuffle(rng);
        running.fill(0.0);
        let mut prev = 0.0;
        for &i in &order {
            for (s, c) in running.iter_mut().zip(grads[i].as_slice()) {
                *s += c;
            }
            let u = cosine(&running, grad_val, val_norm);
            let marginal = u - prev;
            total[i] += marginal;
            total_sq[i] += marginal * marginal;
            prev = u;
        }
    }
    let m = samples as f64;
    let values: Vec<f64> = total.iter().map(|t| t / m).collect();
    let std_errors = if samples > 1 {
        total_sq
            .iter()
            .zip(&values)
            .map(|(sq, mean)| ((sq / m - mean * mean).max(0.0) * m / (m - 1.0) / m).sqrt())
            .collect()
    } else {
        vec![f64::INFINITY; n]
    };
    Ok(ShapleyVector {
        values,
        method: ShapleyMethod::MonteCarlo(samples),
        std_errors: Some(std_errors),
    })
}

/// Coordinate-wise mean.
pub fn gradient_aggregate(grads: &[Vector]) -> Result<Vector> {
    let first = grads.first().ok_or_else(|| invalid("cannot aggregate an empty list"))?;
    if grads.iter().any(|g| g.dim() != first.dim()) {
        return Err(invalid("gradient dimensions differ"));
    }
    let mut sum = vec![0.0; first.dim()];
    for g in grads {
        for (s, c) in sum.iter_mut().zip(g.as_slice()) {
            *s += c;
        }
    }
    let n = grads.len() as f64;
    Ok(Vector::from_raw(sum.into_iter().map(|s| s / n).collect()))
}
