//! Counts of interior local minima and maxima of the loss along random rays.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::flatness::{ProbeConfig, CENSUS_STREAM};
use super::spectrum::{gaussian_vector, normalize};
use crate::autodiff::DifferentiableLoss;
use crate::data::Batch;
use crate::error::{Error, Result};
use crate::params::ParamVector;

/// Neighbouring values closer than this (relative) count as ties.
pub const TIE_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ExtremaCount {
    pub minima: usize,
    pub maxima: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CensusBin {
    pub minima: usize,
    pub maxima: usize,
    pub directions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Census {
    pub per_direction: Vec<ExtremaCount>,
    /// Sorted by `(minima, maxima)`.
    pub histogram: Vec<CensusBin>,
}

fn strictly_less(a: f64, b: f64) -> bool {
    b - a > TIE_RTOL * a.abs().max(b.abs())
}

/// Strict interior extrema of a sampled sequence; endpoints never count.
pub fn count_extrema(values: &[f64]) -> ExtremaCount {
    let mut c = ExtremaCount {
        minima: 0,
        maxima: 0,
    };
    for w in values.windows(3) {
        let (l, m, r) = (w[0], w[1], w[2]);
        if strictly_less(m, l) && strictly_less(m, r) {
            c.minima += 1;
        } else if strictly_less(l, m) && strictly_less(r, m) {
            c.maxima += 1;
        }
    }
    c
}

/// Census along seeded Gaussian directions normalized to unit length.
pub fn minima_census(
    loss: &dyn DifferentiableLoss,
    point: &ParamVector,
    batch: &Batch,
    probe: &ProbeConfig,
) -> Result<Census> {
    let violations = probe.violations();
    if !violations.is_empty() {
        return Err(Error::Config(violations));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(probe.seed);
    rng.set_stream(CENSUS_STREAM);
    let directions: Vec<Vec<f64>> = (0..probe.num_directions)
        .map(|_| {
            let mut d = gaussian_vector(&mut rng, point.dim());
            normalize(&mut d);
            d
        })
        .collect();
    census_along(loss, point, batch, &directions, probe)
}

/// Census along caller-supplied directions (normalized here).
pub fn census_along(
    loss: &dyn DifferentiableLoss,
    point: &ParamVector,
    batch: &Batch,
    directions: &[Vec<f64>],
    probe: &ProbeConfig,
) -> Result<Census> {
    let mut per_direction = Vec::with_capacity(directions.len());
    for dir in directions {
        Error::check_dim("census direction", point.dim(), dir.len())?;
        let mut u = dir.clone();
        if normalize(&mut u) == 0.0 {
            return Err(Error::invalid("census direction must be non-zero"));
        }
        let values = (0..=probe.num_steps)
            .map(|s| loss.evaluate(&point.offset(s as f64 * probe.step_norm, &u)?, batch))
            .collect::<Result<Vec<f64>>>()?;
        per_direction.push(count_extrema(&values));
    }
    let mut bins: BTreeMap<ExtremaCount, usize> = BTreeMap::new();
    for c in &per_direction {
        *bins.entry(*c).or_default() += 1;
    }
    let histogram = bins
        .into_iter()
        .map(|(c, n)| CensusBin {
            minima: c.minima,
            maxima: c.maxima,
            directions: n,
        })
        .collect();
    Ok(Census {
        per_direction,
        histogram,
    })
}
