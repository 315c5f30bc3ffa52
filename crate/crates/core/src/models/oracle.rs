use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::autodiff::{DifferentiableLoss, DEFAULT_XI};
use crate::data::Batch;
use crate::error::{Error, Result};
use crate::params::{regularized_unit, Layout, ParamVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamTerm {
    pub rho: f64,
    #[serde(default = "default_xi")]
    pub xi: f64,
}

fn default_xi() -> f64 {
    DEFAULT_XI
}

/// What the optimizer's base gradient is taken from: the empirical loss,
/// optionally with weight decay on weight segments and/or a SAM term.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OracleLossSpec {
    pub weight_decay: f64,
    pub sam_term: Option<SamTerm>,
}

impl OracleLossSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::invalid("weight_decay must be finite and non-negative"));
        }
        if let Some(sam) = self.sam_term {
            if !(sam.rho > 0.0 && sam.rho.is_finite()) {
                return Err(Error::invalid("sam_term rho must be positive"));
            }
            if !(sam.xi >= 0.0) {
                return Err(Error::invalid("sam_term xi must be non-negative"));
            }
        }
        Ok(())
    }
}

/// The composed oracle loss.
///
/// With a SAM term the value and gradient are those of the base loss at
/// `θ + ρ·∇L̂(θ)/(‖∇L̂(θ)‖+ξ)`. The Hessian-vector product treats that
/// perturbation as locally constant.
pub struct OracleLoss {
    base: Arc<dyn DifferentiableLoss>,
    spec: OracleLossSpec,
    weight_mask: Vec<bool>,
}

pub fn make_oracle(base: Arc<dyn DifferentiableLoss>, spec: OracleLossSpec) -> Result<OracleLoss> {
    spec.validate()?;
    let weight_mask = base.layout().weight_mask();
    Ok(OracleLoss {
        base,
        spec,
        weight_mask,
    })
}

impl OracleLoss {
    pub fn spec(&self) -> &OracleLossSpec {
        &self.spec
    }

    pub fn base(&self) -> &Arc<dyn DifferentiableLoss> {
        &self.base
    }

    fn sam_point(&self, point: &ParamVector, batch: &Batch) -> Result<Option<ParamVector>> {
        let Some(sam) = self.spec.sam_term else {
            return Ok(None);
        };
        let g = self.base.gradient(point, batch)?;
        let eps = regularized_unit(g.as_slice(), sam.xi);
        point.offset(sam.rho, &eps).map(Some)
    }

    fn decay_penalty(&self, point: &ParamVector) -> f64 {
        let w = self.spec.weight_decay;
        0.5 * w
            * point
                .as_slice()
                .iter()
                .zip(&self.weight_mask)
                .filter(|(_, m)| **m)
                .map(|(v, _)| v * v)
                .sum::<f64>()
    }

    fn add_decay(&self, grad: ParamVector, along: &[f64]) -> Result<ParamVector> {
        let w = self.spec.weight_decay;
        if w == 0.0 {
            return Ok(grad);
        }
        let values = grad
            .as_slice()
            .iter()
            .zip(along)
            .zip(&self.weight_mask)
            .map(|((g, x), &m)| if m { g + w * x } else { *g })
            .collect();
        grad.with_values(values)
    }
}

impl DifferentiableLoss for OracleLoss {
    fn layout(&self) -> &Arc<Layout> {
        self.base.layout()
    }

    fn evaluate(&self, point: &ParamVector, batch: &Batch) -> Result<f64> {
        let base = match self.sam_point(point, batch)? {
            Some(p) => self.base.evaluate(&p, batch)?,
            None => self.base.evaluate(point, batch)?,
        };
        if self.spec.weight_decay == 0.0 {
            Ok(base)
        } else {
            Ok(base + self.decay_penalty(point))
        }
    }

    fn value_and_gradient(
        &self,
        point: &ParamVector,
        batch: &Batch,
    ) -> Result<(f64, ParamVector)> {
        let (value, grad) = match self.sam_point(point, batch)? {
            Some(p) => self.base.value_and_gradient(&p, batch)?,
            None => self.base.value_and_gradient(point, batch)?,
        };
        if self.spec.weight_decay == 0.0 {
            return Ok((value, grad));
        }
        let grad = self.add_decay(grad, point.as_slice())?;
        Ok((value + self.decay_penalty(point), grad))
    }

    fn hvp(&self, point: &ParamVector, batch: &Batch, direction: &[f64]) -> Result<ParamVector> {
        let hv = match self.sam_point(point, batch)? {
            Some(p) => self.base.hvp(&p, batch, direction)?,
            None => self.base.hvp(point, batch, direction)?,
        };
        self.add_decay(hv, direction)
    }
}
