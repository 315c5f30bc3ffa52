//! Single-step update rules: momentum SGD, SAM and GAM.

use serde::{Deserialize, Serialize};

use super::Schedule;
use crate::autodiff::{grad_norm_ascent_direction, grad_norm_ascent_from, DifferentiableLoss, DEFAULT_XI};
use crate::data::Batch;
use crate::error::{Error, Result};
use crate::params::{norm, regularized_unit, ParamVector};

/// Optimizer hyperparameters. Defaults: `ρ = α = 0.1`, momentum 0.9,
/// cosine learning rate (total steps filled in by the trainer) and constant radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Hyperparams {
    #[serde(rename = "lr")]
    pub eta0: f64,
    #[serde(rename = "rho")]
    pub rho0: f64,
    pub alpha: f64,
    pub xi: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub gam_apply_ratio: f64,
    pub lr_schedule: Schedule,
    pub rho_schedule: Schedule,
}

pub const DEFAULT_RHO: f64 = 0.1;
pub const DEFAULT_ALPHA: f64 = 0.1;
pub const RHO_GRID: [f64; 6] = [0.05, 0.1, 0.2, 0.5, 1.0, 2.0];
pub const ALPHA_GRID: [f64; 9] = [0.1, 0.2, 0.5, 1.0, 2.0, 3.0, 5.0, 7.0, 10.0];

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            eta0: 0.1,
            rho0: DEFAULT_RHO,
            alpha: DEFAULT_ALPHA,
            xi: DEFAULT_XI,
            momentum: 0.9,
            weight_decay: 0.0,
            gam_apply_ratio: 1.0,
            lr_schedule: Schedule::Cosine { total: 0 },
            rho_schedule: Schedule::Constant,
        }
    }
}

impl Hyperparams {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            out.push(format!("optimizer.lr must be positive (got {})", self.eta0));
        }
        if !(self.rho0 >= 0.0 && self.rho0.is_finite()) {
            out.push(format!("optimizer.rho must be non-negative (got {})", self.rho0));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            out.push(format!("optimizer.alpha must be non-negative (got {})", self.alpha));
        }
        if !(self.xi >= 0.0 && self.xi.is_finite()) {
            out.push(format!("optimizer.xi must be non-negative (got {})", self.xi));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            out.push(format!("optimizer.momentum must be in [0, 1) (got {})", self.momentum));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            out.push(format!(
                "optimizer.weight_decay must be non-negative (got {})",
                self.weight_decay
            ));
        }
        if !(0.0..=1.0).contains(&self.gam_apply_ratio) {
            out.push(format!(
                "optimizer.gam_apply_ratio must be in [0, 1] (got {})",
                self.gam_apply_ratio
            ));
        }
        out
    }
}

/// Mutable per-run optimizer state.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub hyper: Hyperparams,
    /// Steps taken so far; the next step evaluates schedules at `t + 1`.
    pub t: u64,
    momentum_buffer: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepReport {
    pub loss_value: f64,
    pub grad_norm: f64,
    /// `‖h_loss + α·h_norm‖²` (the squared norm of the combined direction).
    pub overall_grad_norm_sq: f64,
    pub applied_gam: bool,
}

impl OptimizerState {
    pub fn new(hyper: Hyperparams) -> Result<Self> {
        let violations = hyper.violations();
        if !violations.is_empty() {
            return Err(Error::Config(violations));
        }
        Ok(OptimizerState {
            hyper,
            t: 0,
            momentum_buffer: None,
        })
    }

    /// `(η_t, ρ_t)` for the upcoming step.
    pub fn next_rates(&self) -> Result<(f64, f64)> {
        let t = self.t + 1;
        let lr = self.hyper.lr_schedule.value(self.hyper.eta0, t)?;
        let rho = if self.hyper.rho0 == 0.0 {
            0.0
        } else {
            self.hyper.rho_schedule.value(self.hyper.rho0, t)?
        };
        Ok((lr, rho))
    }

    pub fn momentum_buffer(&self) -> Option<&[f64]> {
        self.momentum_buffer.as_deref()
    }

    /// `m ← μ·m + d; θ ← θ − η·m`, then advances `t`.
    fn apply(&mut self, params: &ParamVector, direction: Vec<f64>, lr: f64) -> Result<ParamVector> {
        let mu = self.hyper.momentum;
        let m = match self.momentum_buffer.take() {
            Some(mut m) if mu != 0.0 => {
                for (mi, di) in m.iter_mut().zip(&direction) {
                    *mi = mu * *mi + di;
                }
                m
            }
            _ => direction,
        };
        let next = params
            .as_slice()
            .iter()
            .zip(&m)
            .map(|(p, mi)| p - lr * mi)
            .collect();
        let next = params.with_values(next);
        self.momentum_buffer = Some(m);
        self.t += 1;
        next
    }
}

fn non_finite_at(line: u8, what: &'static str) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::NonFinite(_) => Error::NonFiniteStep { line, what },
        other => other,
    }
}

fn check_finite(v: &[f64], line: u8, what: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteStep { line, what })
    }
}

/// Momentum SGD on `loss`.
pub fn sgd_step(
    state: &mut OptimizerState,
    loss: &dyn DifferentiableLoss,
    params: &ParamVector,
    batch: &Batch,
) -> Result<(ParamVector, StepReport)> {
    let (lr, _) = state.next_rates()?;
    let (value, grad) = loss
        .value_and_gradient(params, batch)
        .map_err(non_finite_at(5, "gradient"))?;
    let gn = grad.norm();
    let next = state
        .apply(params, grad.into_vec(), lr)
        .map_err(non_finite_at(9, "update"))?;
    Ok((
        next,
        StepReport {
            loss_value: value,
            grad_norm: gn,
            overall_grad_norm_sq: gn * gn,
            applied_gam: false,
        },
    ))
}

/// SAM: descend along `∇L(θ + ε)` with `ε = ρ_t·g/(‖g‖+ξ)`, `g = ∇L(θ)`.
pub fn sam_step(
    state: &mut OptimizerState,
    loss: &dyn DifferentiableLoss,
    params: &ParamVector,
    batch: &Batch,
) -> Result<(ParamVector, StepReport)> {
    let (lr, rho) = state.next_rates()?;
    let (value, grad) = loss
        .value_and_gradient(params, batch)
        .map_err(non_finite_at(5, "gradient"))?;
    let eps = regularized_unit(grad.as_slice(), state.hyper.xi);
    let perturbed = params
        .offset(rho, &eps)
        .map_err(non_finite_at(7, "perturbed point"))?;
    let direction = loss
        .gradient(&perturbed, batch)
        .map_err(non_finite_at(8, "perturbed gradient"))?;
    let dn = direction.norm();
    let next = state
        .apply(params, direction.into_vec(), lr)
        .map_err(non_finite_at(9, "update"))?;
    Ok((
        next,
        StepReport {
            loss_value: value,
            grad_norm: grad.norm(),
            overall_grad_norm_sq: dn * dn,
            applied_gam: false,
        },
    ))
}

/// Intermediate vectors of one GAM step, for inspection.
#[derive(Debug, Clone)]
pub struct GamTrace {
    pub h_loss: Vec<f64>,
    pub f: Vec<f64>,
    pub theta_adv: Vec<f64>,
    pub h_norm: Vec<f64>,
    pub lr: f64,
    pub rho: f64,
}

/// One GAM iteration. `oracle` supplies `h_loss`, `empirical` the
/// gradient-norm term; both are evaluated on the same `batch`.
pub fn gam_step(
    state: &mut OptimizerState,
    oracle: &dyn DifferentiableLoss,
    empirical: &dyn DifferentiableLoss,
    params: &ParamVector,
    batch: &Batch,
) -> Result<(ParamVector, StepReport)> {
    gam_step_traced(state, oracle, empirical, params, batch).map(|(p, r, _)| (p, r))
}

pub fn gam_step_traced(
    state: &mut OptimizerState,
    oracle: &dyn DifferentiableLoss,
    empirical: &dyn DifferentiableLoss,
    params: &ParamVector,
    batch: &Batch,
) -> Result<(ParamVector, StepReport, Option<GamTrace>)> {
    Error::check_dim("gam oracle/empirical layout", oracle.dim(), empirical.dim())?;
    let (lr, rho) = state.next_rates()?;
    let xi = state.hyper.xi;
    let alpha = state.hyper.alpha;

    let (value, h_loss) = oracle
        .value_and_gradient(params, batch)
        .map_err(non_finite_at(5, "oracle gradient"))?;

    if alpha == 0.0 {
        let gn = h_loss.norm();
        let next = state
            .apply(params, h_loss.into_vec(), lr)
            .map_err(non_finite_at(9, "update"))?;
        let report = StepReport {
            loss_value: value,
            grad_norm: gn,
            overall_grad_norm_sq: gn * gn,
            applied_gam: true,
        };
        return Ok((next, report, None));
    }

    let grad = empirical
        .gradient(params, batch)
        .map_err(non_finite_at(6, "empirical gradient"))?;
    let f = grad_norm_ascent_from(empirical, params, batch, &grad, xi)
        .map_err(non_finite_at(6, "ascent direction"))?;
    check_finite(f.as_slice(), 6, "ascent direction")?;

    let theta_adv = params
        .offset(rho, &regularized_unit(f.as_slice(), xi))
        .map_err(non_finite_at(7, "adversarial point"))?;

    let norm_grad = grad_norm_ascent_direction(empirical, &theta_adv, batch, xi)
        .map_err(non_finite_at(8, "norm gradient"))?;
    let h_norm: Vec<f64> = norm_grad.as_slice().iter().map(|v| rho * v).collect();
    check_finite(&h_norm, 8, "norm gradient")?;

    let combined: Vec<f64> = h_loss
        .as_slice()
        .iter()
        .zip(&h_norm)
        .map(|(l, n)| l + alpha * n)
        .collect();
    check_finite(&combined, 9, "combined direction")?;
    let cn = norm(&combined);
    let next = state
        .apply(params, combined, lr)
        .map_err(non_finite_at(9, "update"))?;
    let report = StepReport {
        loss_value: value,
        grad_norm: grad.norm(),
        overall_grad_norm_sq: cn * cn,
        applied_gam: true,
    };
    let trace = GamTrace {
        h_loss: h_loss.into_vec(),
        f: f.into_vec(),
        theta_adv: theta_adv.into_vec(),
        h_norm,
        lr,
        rho,
    };
    Ok((next, report, Some(trace)))
}
