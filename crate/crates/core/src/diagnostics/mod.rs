//! Flatness measurements: `R⁽⁰⁾`/`R⁽¹⁾` estimators, Hessian spectrum and trace,
//! minima census, landscape slices and the generalization bound.

mod bound;
mod census;
mod flatness;
mod report;
mod slice;
mod spectrum;

pub use bound::{generalization_bound, BoundInputs};
pub use census::{census_along, count_extrema, minima_census, Census, CensusBin, ExtremaCount, TIE_RTOL};
pub use flatness::{estimate_flatness, estimate_r0, estimate_r1, FlatnessSearch, ProbeConfig};
pub use report::{flatness_report, FlatnessReport, SpectrumSettings};
pub use slice::{filter_normalize, landscape_slice, random_direction, LandscapeSlice, SliceSpec};
pub use spectrum::{hutchinson_trace, power_iteration_topk, Spectrum, TraceEstimate};
