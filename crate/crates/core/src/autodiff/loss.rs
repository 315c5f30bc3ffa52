use std::sync::Arc;

use super::{Dual, Scalar, Tape, Var};
use crate::data::Batch;
use crate::error::{Error, Result};
use crate::params::{norm, Layout, ParamVector};

/// A scalar objective over a parameter vector and a data batch.
pub trait DifferentiableLoss: Send + Sync {
    fn layout(&self) -> &Arc<Layout>;

    fn dim(&self) -> usize {
        self.layout().dim()
    }

    fn evaluate(&self, point: &ParamVector, batch: &Batch) -> Result<f64>;

    fn value_and_gradient(&self, point: &ParamVector, batch: &Batch)
        -> Result<(f64, ParamVector)>;

    fn gradient(&self, point: &ParamVector, batch: &Batch) -> Result<ParamVector> {
        self.value_and_gradient(point, batch).map(|(_, g)| g)
    }

    /// `∇²L(point)·direction` without forming the Hessian.
    fn hvp(&self, point: &ParamVector, batch: &Batch, direction: &[f64]) -> Result<ParamVector>;
}

/// An objective expressed as a computation on a [`Tape`]. Every `Objective`
/// is a [`DifferentiableLoss`]: gradients come from a reverse sweep over an
/// `f64` tape, Hessian-vector products from the same sweep over a [`Dual`]
/// tape seeded with the direction.
pub trait Objective: Send + Sync {
    fn layout(&self) -> &Arc<Layout>;

    /// Records the loss on `tape`; `params` are the parameter leaves in layout order.
    fn record<S: Scalar>(&self, tape: &mut Tape<S>, params: &[Var], batch: &Batch)
        -> Result<Var>;

    /// Rough node/edge counts for preallocation.
    fn tape_hint(&self, _batch: &Batch) -> (usize, usize) {
        (0, 0)
    }
}

fn check_point(layout: &Layout, point: &ParamVector) -> Result<()> {
    Error::check_dim("loss point", layout.dim(), point.dim())
}

fn finite_or(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(format!("{what} evaluated to {value}")))
    }
}

impl<T: Objective> DifferentiableLoss for T {
    fn layout(&self) -> &Arc<Layout> {
        Objective::layout(self)
    }

    fn evaluate(&self, point: &ParamVector, batch: &Batch) -> Result<f64> {
        check_point(Objective::layout(self), point)?;
        let (nodes, edges) = self.tape_hint(batch);
        let mut tape = Tape::<f64>::with_capacity(nodes, edges);
        let params: Vec<Var> = point.as_slice().iter().map(|&v| tape.input(v)).collect();
        let out = self.record(&mut tape, &params, batch)?;
        finite_or(tape.value(out), "loss")
    }

    fn value_and_gradient(
        &self,
        point: &ParamVector,
        batch: &Batch,
    ) -> Result<(f64, ParamVector)> {
        check_point(Objective::layout(self), point)?;
        let (nodes, edges) = self.tape_hint(batch);
        let mut tape = Tape::<f64>::with_capacity(nodes, edges);
        let params: Vec<Var> = point.as_slice().iter().map(|&v| tape.input(v)).collect();
        let out = self.record(&mut tape, &params, batch)?;
        let value = finite_or(tape.value(out), "loss")?;
        let adj = tape.backward(out);
        let grad = params.iter().map(|p| adj[p.index()]).collect();
        let grad = point.with_values(grad).map_err(|_| {
            Error::NonFinite("gradient".to_string())
        })?;
        Ok((value, grad))
    }

    fn hvp(&self, point: &ParamVector, batch: &Batch, direction: &[f64]) -> Result<ParamVector> {
        check_point(Objective::layout(self), point)?;
        Error::check_dim("hvp direction", point.dim(), direction.len())?;
        if direction.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("hvp direction".to_string()));
        }
        let (nodes, edges) = self.tape_hint(batch);
        let mut tape = Tape::<Dual>::with_capacity(nodes, edges);
        let params: Vec<Var> = point
            .as_slice()
            .iter()
            .zip(direction)
            .map(|(&v, &d)| tape.input(Dual::new(v, d)))
            .collect();
        let out = self.record(&mut tape, &params, batch)?;
        finite_or(tape.value(out).re, "loss")?;
        let adj = tape.backward(out);
        let hv = params.iter().map(|p| adj[p.index()].tangent).collect();
        point
            .with_values(hv)
            .map_err(|_| Error::NonFinite("Hessian-vector product".to_string()))
    }
}

impl<L: DifferentiableLoss + ?Sized> DifferentiableLoss for Arc<L> {
    fn layout(&self) -> &Arc<Layout> {
        (**self).layout()
    }
    fn evaluate(&self, point: &ParamVector, batch: &Batch) -> Result<f64> {
        (**self).evaluate(point, batch)
    }
    fn value_and_gradient(
        &self,
        point: &ParamVector,
        batch: &Batch,
    ) -> Result<(f64, ParamVector)> {
        (**self).value_and_gradient(point, batch)
    }
    fn hvp(&self, point: &ParamVector, batch: &Batch, direction: &[f64]) -> Result<ParamVector> {
        (**self).hvp(point, batch, direction)
    }
}

/// Central difference of gradients, `(∇L(θ+εv) − ∇L(θ−εv)) / 2ε`.
/// Independent of the dual-number path; used as a test oracle.
pub fn hvp_fd(
    loss: &dyn DifferentiableLoss,
    point: &ParamVector,
    batch: &Batch,
    direction: &[f64],
    eps: f64,
) -> Result<ParamVector> {
    if !(eps > 0.0) {
        return Err(Error::invalid(format!("hvp_fd step must be positive, got {eps}")));
    }
    Error::check_dim("hvp_fd direction", point.dim(), direction.len())?;
    let plus = loss.gradient(&point.offset(eps, direction)?, batch)?;
    let minus = loss.gradient(&point.offset(-eps, direction)?, batch)?;
    let values = plus
        .as_slice()
        .iter()
        .zip(minus.as_slice())
        .map(|(p, m)| (p - m) / (2.0 * eps))
        .collect();
    point.with_values(values)
}

/// `∇²L(θ)·∇L(θ) / (‖∇L(θ)‖ + xi)`, the gradient of `‖∇L‖` regularized by `xi`.
/// Returns the zero vector when the denominator vanishes.
pub fn grad_norm_ascent_direction(
    loss: &dyn DifferentiableLoss,
    point: &ParamVector,
    batch: &Batch,
    xi: f64,
) -> Result<ParamVector> {
    let grad = loss.gradient(point, batch)?;
    grad_norm_ascent_from(loss, point, batch, &grad, xi)
}

/// [`grad_norm_ascent_direction`] with a precomputed gradient at `point`.
pub(crate) fn grad_norm_ascent_from(
    loss: &dyn DifferentiableLoss,
    point: &ParamVector,
    batch: &Batch,
    grad: &ParamVector,
    xi: f64,
) -> Result<ParamVector> {
    if !(xi >= 0.0) {
        return Err(Error::invalid(format!("xi must be non-negative, got {xi}")));
    }
    let denom = norm(grad.as_slice()) + xi;
    if denom == 0.0 {
        return Ok(ParamVector::zeros(Arc::clone(point.layout())));
    }
    let unit: Vec<f64> = grad.as_slice().iter().map(|g| g / denom).collect();
    loss.hvp(point, batch, &unit)
}

/// A gradient request: loss, point and batch.
#[derive(Clone, Copy)]
pub struct GradQuery<'a> {
    pub loss: &'a dyn DifferentiableLoss,
    pub point: &'a ParamVector,
    pub batch: &'a Batch,
}

impl<'a> GradQuery<'a> {
    pub fn new(loss: &'a dyn DifferentiableLoss, point: &'a ParamVector, batch: &'a Batch) -> Self {
        GradQuery { loss, point, batch }
    }

    pub fn evaluate(&self) -> Result<f64> {
        self.loss.evaluate(self.point, self.batch)
    }

    pub fn gradient(&self) -> Result<ParamVector> {
        self.loss.gradient(self.point, self.batch)
    }

    pub fn grad_norm_ascent_direction(&self, xi: f64) -> Result<ParamVector> {
        grad_norm_ascent_direction(self.loss, self.point, self.batch, xi)
    }

    pub fn along(self, direction: &'a ParamVector) -> HvpQuery<'a> {
        HvpQuery {
            grad: self,
            direction,
        }
    }
}

/// A Hessian-vector request.
#[derive(Clone, Copy)]
pub struct HvpQuery<'a> {
    pub grad: GradQuery<'a>,
    pub direction: &'a ParamVector,
}

impl HvpQuery<'_> {
    pub fn hvp(&self) -> Result<ParamVector> {
        let q = &self.grad;
        q.loss.hvp(q.point, q.batch, self.direction.as_slice())
    }

    pub fn hvp_fd(&self, eps: f64) -> Result<ParamVector> {
        let q = &self.grad;
        hvp_fd(q.loss, q.point, q.batch, self.direction.as_slice(), eps)
    }
}
