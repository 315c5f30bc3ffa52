//! Reverse-mode differentiation with exact Hessian-vector products.

mod loss;
mod scalar;
mod tape;

pub use loss::{
    grad_norm_ascent_direction, hvp_fd, DifferentiableLoss, GradQuery, HvpQuery, Objective,
};
pub(crate) use loss::grad_norm_ascent_from;
pub use scalar::{Dual, Scalar};
pub use tape::{Tape, Var};

/// Default `ξ` in normalized directions `v / (‖v‖ + ξ)`.
pub const DEFAULT_XI: f64 = 1e-12;
