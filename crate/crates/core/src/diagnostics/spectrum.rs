//! Hessian spectrum probes built on Hessian-vector products.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::autodiff::DifferentiableLoss;
use crate::data::Batch;
use crate::error::{Error, Result};
use crate::params::{dot, norm, ParamVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// Sorted descending.
    pub eigenvalues: Vec<f64>,
    /// Unit eigenvectors, aligned with `eigenvalues`.
    #[serde(skip)]
    pub eigenvectors: Vec<Vec<f64>>,
    pub converged: Vec<bool>,
}

impl Spectrum {
    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|c| *c)
    }
}

pub(crate) fn gaussian_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

pub(crate) fn normalize(v: &mut [f64]) -> f64 {
    let n = norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let c = dot(v, b);
        v.iter_mut().zip(b).for_each(|(x, bi)| *x -= c * bi);
    }
}

/// Top-`k` Hessian eigenvalues (largest magnitude first found, reported in
/// descending order) by power iteration with Gram–Schmidt deflation.
///
/// An eigenpair is converged once successive Rayleigh quotients differ by less
/// than `tol·max(|λ|, 1e-12)`; otherwise the last estimate is returned with
/// `converged = false`.
pub fn power_iteration_topk(
    loss: &dyn DifferentiableLoss,
    point: &ParamVector,
    batch: &Batch,
    k: usize,
    iters: usize,
    tol: f64,
    seed: u64,
) -> Result<Spectrum> {
    let dim = point.dim();
    if k == 0 || k > dim {
        return Err(Error::invalid(format!("k must be in 1..={dim}, got {k}")));
    }
    if iters == 0 {
        return Err(Error::invalid("power iteration needs at least one iteration"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut found: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut pairs: Vec<(f64, Vec<f64>, bool)> = Vec::with_capacity(k);

    for _ in 0..k {
        let mut v = gaussian_vector(&mut rng, dim);
        project_out(&mut v, &found);
        project_out(&mut v, &found);
        normalize(&mut v);
        let mut lambda = 0.0;
        let mut prev: Option<f64> = None;
        let mut converged = false;
        for _ in 0..iters {
            let mut w = loss.hvp(point, batch, &v)?.into_vec();
            project_out(&mut w, &found);
            project_out(&mut w, &found);
            lambda = dot(&v, &w);
            if normalize(&mut w) == 0.0 {
                converged = true;
                break;
            }
            v = w;
            if let Some(p) = prev {
                if (lambda - p).abs() < tol * lambda.abs().max(1e-12) {
                    converged = true;
                    break;
                }
            }
            prev = Some(lambda);
        }
        found.push(v.clone());
        pairs.push((lambda, v, converged));
    }

    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    Ok(Spectrum {
        eigenvalues: pairs.iter().map(|p| p.0).collect(),
        converged: pairs.iter().map(|p| p.2).collect(),
        eigenvectors: pairs.into_iter().map(|p| p.1).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEstimate {
    pub trace: f64,
    pub stderr: f64,
}

/// Hutchinson's estimator: mean of `zᵀ H z` over Rademacher probes `z`.
pub fn hutchinson_trace(
    loss: &dyn DifferentiableLoss,
    point: &ParamVector,
    batch: &Batch,
    num_probes: usize,
    seed: u64,
) -> Result<TraceEstimate> {
    if num_probes < 2 {
        return Err(Error::invalid("hutchinson_trace needs at least two probes"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(num_probes);
    for _ in 0..num_probes {
        let z: Vec<f64> = (0..point.dim())
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        let hz = loss.hvp(point, batch, &z)?;
        samples.push(dot(&z, hz.as_slice()));
    }
    // Shifted by the first sample: identical samples give the sample itself
    // and a zero error exactly.
    let n = num_probes as f64;
    let shift = samples[0];
    let mean_dev = samples.iter().map(|s| s - shift).sum::<f64>() / n;
    let var = samples
        .iter()
        .map(|s| (s - shift - mean_dev).powi(2))
        .sum::<f64>()
        / (n - 1.0);
    Ok(TraceEstimate {
        trace: shift + mean_dev,
        stderr: (var / n).sqrt(),
    })
}
