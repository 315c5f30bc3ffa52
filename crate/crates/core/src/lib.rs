//! Gradient-norm-aware minimization (GAM), sharpness-aware minimization (SAM)
//! and SGD on a small reverse-mode autodiff engine, with flatness diagnostics:
//! zeroth/first-order flatness estimates, Hessian spectra, minima census and
//! landscape slices.

pub mod autodiff;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod models;
pub mod optim;
pub mod params;

pub use autodiff::{DifferentiableLoss, GradQuery, HvpQuery, Objective};
pub use data::{Batch, Dataset, Targets};
pub use error::{Error, Result};
pub use params::{Layout, ParamVector, Segment, SegmentKind};
