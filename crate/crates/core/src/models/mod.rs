//! Test objectives: analytic quadratics, small MLPs and oracle-loss composition.

pub(crate) mod mlp;
mod oracle;
mod quadratic;

pub use mlp::{init_params, mlp_loss, Activation, MlpLoss, MlpSpec, Task};
pub use oracle::{make_oracle, OracleLoss, OracleLossSpec, SamTerm};
pub use quadratic::{quadratic_loss, DenseQuadratic, LinearLoss, QuadraticLoss, QuadraticSpec};
