use serde::{Deserialize, Serialize};

use super::census::{minima_census, CensusBin};
use super::flatness::{estimate_flatness, ProbeConfig};
use super::spectrum::{hutchinson_trace, power_iteration_topk};
use crate::autodiff::DifferentiableLoss;
use crate::data::Batch;
use crate::error::Result;
use crate::params::ParamVector;

/// Flatness measurements at one parameter point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatnessReport {
    pub rho: f64,
    pub r0_hat: f64,
    pub r1_hat: f64,
    pub lambda_topk: Vec<f64>,
    pub lambda_converged: Vec<bool>,
    pub trace_hat: f64,
    pub trace_stderr: f64,
    pub census: Vec<CensusBin>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSettings {
    pub top_k: usize,
    pub power_iters: usize,
    pub power_tol: f64,
    pub trace_probes: usize,
}

impl Default for SpectrumSettings {
    fn default() -> Self {
        SpectrumSettings {
            top_k: 5,
            power_iters: 200,
            power_tol: 1e-8,
            trace_probes: 32,
        }
    }
}

pub fn flatness_report(
    loss: &dyn DifferentiableLoss,
    point: &ParamVector,
    batch: &Batch,
    rho: f64,
    probe: &ProbeConfig,
    spectrum: &SpectrumSettings,
) -> Result<FlatnessReport> {
    let (r0_hat, r1_hat) = estimate_flatness(loss, point, batch, rho, probe)?;
    let k = spectrum.top_k.min(point.dim());
    let top = power_iteration_topk(
        loss,
        point,
        batch,
        k,
        spectrum.power_iters,
        spectrum.power_tol,
        probe.seed,
    )?;
    let trace = hutchinson_trace(loss, point, batch, spectrum.trace_probes, probe.seed)?;
    let census = minima_census(loss, point, batch, probe)?;
    Ok(FlatnessReport {
        rho,
        r0_hat,
        r1_hat,
        lambda_topk: top.eigenvalues,
        lambda_converged: top.converged,
        trace_hat: trace.trace,
        trace_stderr: trace.stderr,
        census: census.histogram,
    })
}
