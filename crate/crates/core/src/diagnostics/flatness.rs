//! Estimators of zeroth-order flatness `R⁽⁰⁾_ρ(θ) = max_{‖δ‖≤ρ} L(θ+δ) − L(θ)` and
//! first-order flatness `R⁽¹⁾_ρ(θ) = ρ · max_{‖δ‖≤ρ} ‖∇L(θ+δ)‖`.
//!
//! Both maximizations are non-convex; the estimators return the best value
//! found over a candidate set and a short projected ascent, so they are
//! lower bounds on the true maxima.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::spectrum::{gaussian_vector, normalize, power_iteration_topk};
use crate::autodiff::{grad_norm_ascent_from, DifferentiableLoss, DEFAULT_XI};
use crate::data::Batch;
use crate::error::{Error, Result};
use crate::params::{norm, ParamVector};

const BALL_STREAM: u64 = 2;
pub(crate) const CENSUS_STREAM: u64 = 3;
const CURVATURE_STREAM: u64 = 4;

/// Random-probe settings shared by the flatness estimators and the census.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    /// Census directions.
    pub num_directions: usize,
    /// Census step length; `step_norm · num_steps` is the census radius.
    pub step_norm: f64,
    pub num_steps: usize,
    pub seed: u64,
    pub ascent_steps: usize,
    /// Length of each normalized ascent step; `None` means `ρ/10`.
    pub ascent_lr: Option<f64>,
    pub ball_samples: usize,
    /// Power iterations used to seed the ascent along the top curvature direction.
    pub curvature_iters: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            num_directions: 100,
            step_norm: 0.01,
            num_steps: 10,
            seed: 0,
            ascent_steps: 20,
            ascent_lr: None,
            ball_samples: 64,
            curvature_iters: 50,
        }
    }
}

impl ProbeConfig {
    pub fn census_radius(&self) -> f64 {
        self.step_norm * self.num_steps as f64
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.num_directions == 0 {
            out.push("probe.num_directions must be positive".to_string());
        }
        if !(self.step_norm > 0.0 && self.step_norm.is_finite()) {
            out.push(format!("probe.step_norm must be positive (got {})", self.step_norm));
        }
        if self.num_steps == 0 {
            out.push("probe.num_steps must be positive".to_string());
        }
        if let Some(lr) = self.ascent_lr {
            if !(lr > 0.0 && lr.is_finite()) {
                out.push(format!("probe.ascent_lr must be positive (got {lr})"));
            }
        }
        out
    }

    fn step_len(&self, rho: f64) -> f64 {
        self.ascent_lr.unwrap_or(rho / 10.0)
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("rho must be positive, got {rho}")))
    }
}

/// Pulls `x` back onto the ball of radius `rho`.
fn project(x: &mut [f64], rho: f64) {
    let n = norm(x);
    if n > rho {
        let s = rho / n;
        x.iter_mut().for_each(|v| *v *= s);
    }
}

fn scaled(v: &[f64], s: f64) -> Vec<f64> {
    v.iter().map(|x| x * s).collect()
}

/// Seeded uniform samples from the ball of radius `rho` in `dim` dimensions.
fn ball_samples(dim: usize, rho: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(BALL_STREAM);
    (0..count)
        .map(|_| {
            let mut v = gaussian_vector(&mut rng, dim);
            normalize(&mut v);
            let r = rho * rng.random::<f64>().powf(1.0 / dim as f64);
            scaled(&v, r)
        })
        .collect()
}

/// Leading Hessian eigenvector, used as a maximizer seed.
fn curvature_direction(
    loss: &dyn DifferentiableLoss,
    point: &ParamVector,
    batch: &Batch,
    probe: &ProbeConfig,
) -> Result<Option<Vec<f64>>> {
    if probe.curvature_iters == 0 {
        return Ok(None);
    }
    let s = power_iteration_topk(
        loss,
        point,
        batch,
        1,
        probe.curvature_iters,
        1e-10,
        probe.seed ^ CURVATURE_STREAM,
    )?;
    Ok(s.eigenvectors.into_iter().next())
}

/// Result of one flatness search.
#[derive(Debug, Clone)]
pub struct FlatnessSearch {
    pub value: f64,
    /// Offset `δ` from the point at which `value` was attained.
    pub argmax: Vec<f64>,
    /// Every offset evaluated, in evaluation order.
    pub probes: Vec<Vec<f64>>,
}

fn r0_search(
    loss: &dyn DifferentiableLoss,
    point: &ParamVector,
    batch: &Batch,
    rho: f64,
    probe: &ProbeConfig,
    curvature: Option<&[f64]>,
) -> Result<FlatnessSearch> {
    let dim = point.dim();
    let (base, grad) = loss.value_and_gradient(point, batch)?;
    let mut candidates = vec![vec![0.0; dim]];
    let gn = grad.norm();
    if gn > 0.0 {
        candidates.push(scaled(grad.as_slice(), rho / gn));
    }
    if let Some(u) = curvature {
        candidates.push(scaled(u, rho));
        candidates.push(scaled(u, -rho));
    }
    candidates.extend(ball_samples(dim, rho, probe.ball_samples, probe.seed));

    let mut probes = Vec::new();
    let mut best = (0.0, vec![0.0; dim]);
    for c in candidates {
        let v = loss.evaluate(&point.offset(1.0, &c)?, batch)? - base;
        if v > best.0 {
            best = (v, c.clone());
        }
        probes.push(c);
    }

    let step = probe.step_len(rho);
    let mut x = best.1.clone();
    for _ in 0..probe.ascent_steps {
        let g = loss.gradient(&point.offset(1.0, &x)?, batch)?;
        let gn = g.norm();
        if gn == 0.0 {
            break;
        }
        x.iter_mut()
            .zip(g.as_slice())
            .for_each(|(xi, gi)| *xi += step * gi / gn);
        project(&mut x, rho);
        let v = loss.evaluate(&point.offset(1.0, &x)?, batch)? - base;
        if v > best.0 {
            best = (v, x.clone());
        }
        probes.push(x.clone());
    }
    Ok(FlatnessSearch {
        value: best.0,
        argmax: best.1,
        probes,
    })
}

fn r1_search(
    loss: &dyn DifferentiableLoss,
    point: &ParamVector,
    batch: &Batch,
    rho: f64,
    probe: &ProbeConfig,
    curvature: Option<&[f64]>,
    shared: &[Vec<f64>],
) -> Result<FlatnessSearch> {
    let dim = point.dim();
    let grad = loss.gradient(point, batch)?;
    let mut candidates = vec![vec![0.0; dim]];
    // one-step maximizer of the gradient norm
    let f = grad_norm_ascent_from(loss, point, batch, &grad, DEFAULT_XI)?;
    let fnorm = f.norm();
    if fnorm > 0.0 {
        candidates.push(scaled(f.as_slice(), rho / fnorm));
    }
    if let Some(u) = curvature {
        candidates.push(scaled(u, rho));
        candidates.push(scaled(u, -rho));
    }
    candidates.extend(ball_samples(dim, rho, probe.ball_samples, probe.seed));
    candidates.extend(shared.iter().cloned());

    let mut probes = Vec::new();
    let mut best = (grad.norm(), vec![0.0; dim]);
    for c in candidates {
        let gn = loss.gradient(&point.offset(1.0, &c)?, batch)?.norm();
        if gn > best.0 {
            best = (gn, c.clone());
        }
        probes.push(c);
    }

    let step = probe.step_len(rho);
    let mut x = best.1.clone();
    for _ in 0..probe.ascent_steps {
        let p = point.offset(1.0, &x)?;
        let g = loss.gradient(&p, batch)?;
        let d = grad_norm_ascent_from(loss, &p, batch, &g, DEFAULT_XI)?;
        let dn = d.norm();
        if dn == 0.0 {
            break;
        }
        x.iter_mut()
            .zip(d.as_slice())
            .for_each(|(xi, di)| *xi += step * di / dn);
        project(&mut x, rho);
        let gn = loss.gradient(&point.offset(1.0, &x)?, batch)?.norm();
        if gn > best.0 {
            best = (gn, x.clone());
        }
        probes.push(x.clone());
    }
    Ok(FlatnessSearch {
        value: rho * best.0,
        argmax: best.1,
        probes,
    })
}

/// Lower-bound estimate of `R⁽⁰⁾_ρ(point)`.
pub fn estimate_r0(
    loss: &dyn DifferentiableLoss,
    point: &ParamVector,
    batch: &Batch,
    rho: f64,
    probe: &ProbeConfig,
) -> Result<f64> {
    check_rho(rho)?;
    let u = curvature_direction(loss, point, batch, probe)?;
    Ok(r0_search(loss, point, batch, rho, probe, u.as_deref())?.value)
}

/// Lower-bound estimate of `R⁽¹⁾_ρ(point)`.
pub fn estimate_r1(
    loss: &dyn DifferentiableLoss,
    point: &ParamVector,
    batch: &Batch,
    rho: f64,
    probe: &ProbeConfig,
) -> Result<f64> {
    check_rho(rho)?;
    let u = curvature_direction(loss, point, batch, probe)?;
    Ok(r1_search(loss, point, batch, rho, probe, u.as_deref(), &[])?.value)
}

/// Points on the segment from the origin to `end`, excluding the origin.
fn segment(end: &[f64], pieces: usize) -> impl Iterator<Item = Vec<f64>> + '_ {
    (1..=pieces).map(move |k| scaled(end, k as f64 / pieces as f64))
}

/// `(r0_hat, r1_hat)` from shared probes: the first-order search also visits
/// every zeroth-order probe and the segment to the zeroth-order maximizer.
pub fn estimate_flatness(
    loss: &dyn DifferentiableLoss,
    point: &ParamVector,
    batch: &Batch,
    rho: f64,
    probe: &ProbeConfig,
) -> Result<(f64, f64)> {
    check_rho(rho)?;
    let u = curvature_direction(loss, point, batch, probe)?;
    let r0 = r0_search(loss, point, batch, rho, probe, u.as_deref())?;
    let mut shared = r0.probes.clone();
    shared.extend(segment(&r0.argmax, 16));
    let r1 = r1_search(loss, point, batch, rho, probe, u.as_deref(), &shared)?;
    Ok((r0.value, r1.value))
}
