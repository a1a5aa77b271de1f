//! Supervised contrastive objectives over unit-norm embeddings.
//!
//! All gradient variants return `∂L/∂z` for every embedding in the batch;
//! chaining through the encoder is the caller's job.

use crate::error::{Error, Result};
use crate::numeric::{axpy, dot, log_sum_exp};

fn check_temperature(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidTemperature(tau))
    }
}

/// Scaled similarities `⟨z_i, z_k⟩/τ` for every `k ≠ i`, in index order.
fn logits_excluding<E: AsRef<[f64]>>(z: &[E], i: usize, tau: f64) -> Vec<(usize, f64)> {
    let zi = z[i].as_ref();
    (0..z.len())
        .filter(|&k| k != i)
        .map(|k| (k, dot(zi, z[k].as_ref()) / tau))
        .collect()
}

/// `exp(⟨z_i,z_j⟩/τ) / Σ_{k≠i} exp(⟨z_i,z_k⟩/τ)`.
pub fn psi<E: AsRef<[f64]>>(i: usize, j: usize, z: &[E], tau: f64) -> Result<f64> {
    check_temperature(tau)?;
    if z.len() < 2 || i >= z.len() || j >= z.len() || i == j {
        return Err(Error::InvalidArgument(format!("psi({i}, {j}) over a batch of {}", z.len())));
    }
    let logits = logits_excluding(z, i, tau);
    let lse = log_sum_exp(&logits.iter().map(|(_, v)| *v).collect::<Vec<_>>());
    let lj = dot(z[i].as_ref(), z[j].as_ref()) / tau;
    Ok((lj - lse).exp())
}

/// Accumulates the gradient of `−log Ψ(i, j)` scaled by `weight`.
fn accumulate_neg_log_psi<E: AsRef<[f64]>>(z: &[E], i: usize, positives: &[usize], tau: f64, grads: &mut [Vec<f64>]) -> f64 {
    let logits = logits_excluding(z, i, tau);
    let values: Vec<f64> = logits.iter().map(|(_, v)| *v).collect();
    let lse = log_sum_exp(&values);
    let zi = z[i].as_ref().to_vec();
    let weight = 1.0 / positives.len() as f64;
    let mut loss = 0.0;
    for &p in positives {
        let lp = dot(&zi, z[p].as_ref()) / tau;
        loss += weight * (lse - lp);
        axpy(&mut grads[i], -weight / tau, z[p].as_ref());
        axpy(&mut grads[p], -weight / tau, &zi);
    }
    // The LSE term appears once per anchor with total weight 1.
    for (k, v) in logits {
        let w = (v - lse).exp();
        axpy(&mut grads[i], w / tau, z[k].as_ref());
        axpy(&mut grads[k], w / tau, &zi);
    }
    loss
}

/// Supervised contrastive loss where every same-label point is a positive.
/// Anchors without positives contribute nothing.
pub fn simple_scl_loss_with_grad<E: AsRef<[f64]>>(z: &[E], labels: &[usize], tau: f64) -> Result<(f64, Vec<Vec<f64>>)> {
    check_temperature(tau)?;
    crate::error::check_len("simple_scl_loss labels", z.len(), labels.len())?;
    let dim = z.first().map_or(0, |v| v.as_ref().len());
    let mut grads = vec![vec![0.0; dim]; z.len()];
    let mut loss = 0.0;
    for i in 0..z.len() {
        let positives: Vec<usize> = (0..z.len()).filter(|&j| j != i && labels[j] == labels[i]).collect();
        if positives.is_empty() {
            continue;
        }
        loss += accumulate_neg_log_psi(z, i, &positives, tau, &mut grads);
    }
    Ok((loss, grads))
}

pub fn simple_scl_loss<E: AsRef<[f64]>>(z: &[E], labels: &[usize], tau: f64) -> Result<f64> {
    Ok(simple_scl_loss_with_grad(z, labels, tau)?.0)
}

/// Pair-based contrastive loss over a minibatch laid out as
/// `[anchor₀, positive₀, anchor₁, positive₁, …]`. One directed term per pair
/// (anchor = first element); `symmetric` adds the reversed term.
pub fn scl_snapshot_loss_with_grad<E: AsRef<[f64]>>(z: &[E], tau: f64, symmetric: bool) -> Result<(f64, Vec<Vec<f64>>)> {
    check_temperature(tau)?;
    if z.len() < 2 || z.len() % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "pair minibatch must have an even size ≥ 2, got {}",
            z.len()
        )));
    }
    let dim = z[0].as_ref().len();
    let mut grads = vec![vec![0.0; dim]; z.len()];
    let mut loss = 0.0;
    for k in 0..z.len() / 2 {
        let (a, p) = (2 * k, 2 * k + 1);
        loss += accumulate_neg_log_psi(z, a, &[p], tau, &mut grads);
        if symmetric {
            loss += accumulate_neg_log_psi(z, p, &[a], tau, &mut grads);
        }
    }
    Ok((loss, grads))
}

pub fn scl_snapshot_loss<E: AsRef<[f64]>>(z: &[E], tau: f64, symmetric: bool) -> Result<f64> {
    Ok(scl_snapshot_loss_with_grad(z, tau, symmetric)?.0)
}
