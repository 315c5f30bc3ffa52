use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Objective, Scalar, Tape, Var};
use crate::data::Batch;
use crate::error::{Error, Result};
use crate::params::{Layout, ParamVector};

/// Diagonal quadratic `½ Σ aᵢ (θᵢ − cᵢ)²` with eigenvalues `a₁ ≥ a₂ ≥ … > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticSpec {
    pub diag: Vec<f64>,
    pub center: Vec<f64>,
}

impl QuadraticSpec {
    pub fn centered(diag: Vec<f64>) -> Self {
        let center = vec![0.0; diag.len()];
        QuadraticSpec { diag, center }
    }

    pub fn validate(&self) -> Result<()> {
        if self.diag.is_empty() {
            return Err(Error::invalid("quadratic needs at least one eigenvalue"));
        }
        Error::check_dim("quadratic center", self.diag.len(), self.center.len())?;
        if let Some(a) = self.diag.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(Error::invalid(format!(
                "quadratic eigenvalues must be finite and positive, got {a}"
            )));
        }
        if self.diag.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::invalid("quadratic eigenvalues must be sorted descending"));
        }
        if self.center.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("quadratic center must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct QuadraticLoss {
    spec: QuadraticSpec,
    layout: Arc<Layout>,
}

/// Builds the diagonal quadratic objective. Batch-independent.
pub fn quadratic_loss(spec: QuadraticSpec) -> Result<QuadraticLoss> {
    spec.validate()?;
    let layout = Arc::new(Layout::flat(spec.diag.len()));
    Ok(QuadraticLoss { spec, layout })
}

impl QuadraticLoss {
    pub fn spec(&self) -> &QuadraticSpec {
        &self.spec
    }

    pub fn lambda_max(&self) -> f64 {
        self.spec.diag[0]
    }

    pub fn center(&self) -> ParamVector {
        ParamVector::from_parts_unchecked(self.spec.center.clone(), Arc::clone(&self.layout))
    }
}

impl Objective for QuadraticLoss {
    fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    fn record<S: Scalar>(&self, tape: &mut Tape<S>, params: &[Var], _batch: &Batch) -> Result<Var> {
        let terms: Vec<Var> = params
            .iter()
            .zip(self.spec.diag.iter().zip(&self.spec.center))
            .map(|(&p, (&a, &c))| {
                let r = tape.add_const(p, -c);
                let sq = tape.square(r);
                tape.scale(sq, 0.5 * a)
            })
            .collect();
        Ok(tape.sum(&terms))
    }

    fn tape_hint(&self, _batch: &Batch) -> (usize, usize) {
        let d = self.spec.diag.len();
        (4 * d + 1, 4 * d)
    }
}

/// Dense quadratic `½ (θ − c)ᵀ A (θ − c)` with symmetric `A`.
#[derive(Debug, Clone)]
pub struct DenseQuadratic {
    /// Row-major `d × d`.
    matrix: Vec<f64>,
    center: Vec<f64>,
    layout: Arc<Layout>,
}

impl DenseQuadratic {
    pub fn new(matrix: Vec<f64>, center: Vec<f64>) -> Result<Self> {
        let d = center.len();
        Error::check_dim("dense quadratic matrix", d * d, matrix.len())?;
        for i in 0..d {
            for j in 0..i {
                if matrix[i * d + j] != matrix[j * d + i] {
                    return Err(Error::invalid("dense quadratic matrix must be symmetric"));
                }
            }
        }
        Ok(DenseQuadratic {
            matrix,
            center,
            layout: Arc::new(Layout::flat(d)),
        })
    }

    pub fn trace(&self) -> f64 {
        let d = self.center.len();
        (0..d).map(|i| self.matrix[i * d + i]).sum()
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }
}

impl Objective for DenseQuadratic {
    fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    fn record<S: Scalar>(&self, tape: &mut Tape<S>, params: &[Var], _batch: &Batch) -> Result<Var> {
        let d = self.center.len();
        let resid: Vec<Var> = params
            .iter()
            .zip(&self.center)
            .map(|(&p, &c)| tape.add_const(p, -c))
            .collect();
        let zero = tape.constant(0.0);
        let prod: Vec<Var> = (0..d)
            .map(|i| tape.affine_data(&resid, &self.matrix[i * d..(i + 1) * d], zero))
            .collect();
        let quad = tape.affine(&resid, &prod, zero);
        Ok(tape.scale(quad, 0.5))
    }

    fn tape_hint(&self, _batch: &Batch) -> (usize, usize) {
        let d = self.center.len();
        (3 * d + 4, d * d + 4 * d + 2)
    }
}

/// `aᵀθ + b`: constant gradient, zero Hessian.
#[derive(Debug, Clone)]
pub struct LinearLoss {
    coeffs: Vec<f64>,
    offset: f64,
    layout: Arc<Layout>,
}

impl LinearLoss {
    pub fn new(coeffs: Vec<f64>, offset: f64) -> Self {
        let layout = Arc::new(Layout::flat(coeffs.len()));
        LinearLoss {
            coeffs,
            offset,
            layout,
        }
    }
}

impl Objective for LinearLoss {
    fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    fn record<S: Scalar>(&self, tape: &mut Tape<S>, params: &[Var], _batch: &Batch) -> Result<Var> {
        let bias = tape.constant(self.offset);
        Ok(tape.affine_data(params, &self.coeffs, bias))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::DifferentiableLoss;

    fn batch() -> Batch {
        Batch::placeholder()
    }

    #[test]
    fn quadratic_value_examples() {
        let q = quadratic_loss(QuadraticSpec::centered(vec![2.0, 1.0])).unwrap();
        let p = ParamVector::from_vec(vec![1.0, 1.0]).unwrap();
        assert_eq!(q.evaluate(&p, &batch()).unwrap(), 1.5);
        assert_eq!(q.evaluate(&q.center(), &batch()).unwrap(), 0.0);
        let p = ParamVector::from_vec(vec![1.0, 0.0]).unwrap();
        assert_eq!(q.evaluate(&p, &batch()).unwrap(), 1.0);
    }

    #[test]
    fn quadratic_hvp_is_diagonal_product() {
        let q = quadratic_loss(QuadraticSpec::centered(vec![3.0, 1.0])).unwrap();
        let p = ParamVector::from_vec(vec![0.4, -2.0]).unwrap();
        let hv = q.hvp(&p, &batch(), &[1.0, 0.0]).unwrap();
        assert_eq!(hv.as_slice(), &[3.0, 0.0]);
    }

    #[test]
    fn invalid_spectra_rejected() {
        assert!(quadratic_loss(QuadraticSpec::centered(vec![1.0, 2.0])).is_err());
        assert!(quadratic_loss(QuadraticSpec::centered(vec![1.0, 0.0])).is_err());
        assert!(quadratic_loss(QuadraticSpec::centered(vec![])).is_err());
    }

    #[test]
    fn dense_quadratic_matches_matrix_product() {
        let a = vec![2.0, 0.5, 0.5, 1.0];
        let q = DenseQuadratic::new(a, vec![0.0, 0.0]).unwrap();
        let p = ParamVector::from_vec(vec![1.0, -1.0]).unwrap();
        // ½(2 − 0.5 − 0.5 + 1) = 1
        assert!((q.evaluate(&p, &batch()).unwrap() - 1.0).abs() < 1e-15);
        let g = q.gradient(&p, &batch()).unwrap();
        assert_eq!(g.as_slice(), &[1.5, -0.5]);
        let hv = q.hvp(&p, &batch(), &[0.0, 1.0]).unwrap();
        assert_eq!(hv.as_slice(), &[0.5, 1.0]);
        assert_eq!(q.trace(), 3.0);
    }

    #[test]
    fn linear_loss_has_zero_hessian() {
        let l = LinearLoss::new(vec![1.0, -2.0, 2.0], 0.5);
        let p = ParamVector::from_vec(vec![0.1, 0.2, 0.3]).unwrap();
        assert_eq!(l.gradient(&p, &batch()).unwrap().as_slice(), &[1.0, -2.0, 2.0]);
        let hv = l.hvp(&p, &batch(), &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(hv.as_slice(), &[0.0, 0.0, 0.0]);
    }
}
