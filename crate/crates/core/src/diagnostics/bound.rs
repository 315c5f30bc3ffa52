use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inputs to the first-order-flatness generalization bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// Training-set size.
    pub n: u64,
    /// Parameter count.
    pub d: u64,
    pub rho: f64,
    /// Bound on the per-example loss.
    pub loss_bound: f64,
    pub delta: f64,
    pub theta_norm: f64,
    pub emp_loss: f64,
    pub r1: f64,
}

impl BoundInputs {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.n <= 1 {
            v.push(format!("n must exceed 1 (got {})", self.n));
        }
        if self.d < 1 {
            v.push("d must be at least 1".to_string());
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            v.push(format!("rho must be positive (got {})", self.rho));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            v.push(format!("delta must lie in (0, 1) (got {})", self.delta));
        }
        if !(self.emp_loss >= 0.0 && self.loss_bound >= self.emp_loss && self.loss_bound.is_finite()) {
            v.push(format!(
                "need loss_bound >= emp_loss >= 0 (got {} and {})",
                self.loss_bound, self.emp_loss
            ));
        }
        if !(self.theta_norm >= 0.0 && self.theta_norm.is_finite()) {
            v.push(format!("theta_norm must be non-negative (got {})", self.theta_norm));
        }
        if !(self.r1 >= 0.0 && self.r1.is_finite()) {
            v.push(format!("r1 must be non-negative (got {})", self.r1));
        }
        v
    }
}

/// `L̂ + R⁽¹⁾ + M/√n + √((¼ d ln(1 + ‖θ‖²(√d + √ln n)²/(dρ²)) + ¼ + ln(n/δ) + 2 ln(6n + 3d)) / (n − 1))`
pub fn generalization_bound(b: &BoundInputs) -> Result<f64> {
    let v = b.violations();
    if !v.is_empty() {
        return Err(Error::invalid(v.join("; ")));
    }
    let n = b.n as f64;
    let d = b.d as f64;
    let spread = d.sqrt() + n.ln().sqrt();
    let ratio = b.theta_norm * b.theta_norm * spread * spread / (d * b.rho * b.rho);
    let complexity = 0.25 * d * ratio.ln_1p()
        + 0.25
        + (n / b.delta).ln()
        + 2.0 * (6.0 * n + 3.0 * d).ln();
    Ok(b.emp_loss + b.r1 + b.loss_bound / n.sqrt() + (complexity / (n - 1.0)).sqrt())
}
