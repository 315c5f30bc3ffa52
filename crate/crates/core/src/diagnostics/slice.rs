//! One- and two-dimensional loss landscape slices.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::spectrum::gaussian_vector;
use crate::autodiff::DifferentiableLoss;
use crate::data::Batch;
use crate::error::{Error, Result};
use crate::params::{norm, ParamVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SliceSpec {
    pub half_width: f64,
    /// Odd, so the center is on the grid.
    pub points: usize,
    /// Rescale each direction segment to the norm of the matching parameter segment.
    pub filter_normalize: bool,
}

impl Default for SliceSpec {
    fn default() -> Self {
        SliceSpec {
            half_width: 1.0,
            points: 21,
            filter_normalize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeSlice {
    pub xs: Vec<f64>,
    pub ys: Option<Vec<f64>>,
    /// Row-major over `(y, x)`; a single row for 1-D slices.
    pub values: Vec<f64>,
}

impl LandscapeSlice {
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.xs.len() + ix]
    }
}

/// Gaussian direction with one entry per parameter.
pub fn random_direction(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gaussian_vector(&mut rng, dim)
}

/// Rescales every layout segment of `direction` to the norm of the same
/// segment of `point`. Segments where either norm is zero become zero.
pub fn filter_normalize(direction: &[f64], point: &ParamVector) -> Result<Vec<f64>> {
    Error::check_dim("slice direction", point.dim(), direction.len())?;
    let mut out = direction.to_vec();
    for seg in point.layout().segments() {
        let r = seg.range();
        let dn = norm(&direction[r.clone()]);
        let pn = norm(&point.as_slice()[r.clone()]);
        let s = if dn > 0.0 { pn / dn } else { 0.0 };
        out[r].iter_mut().for_each(|v| *v *= s);
    }
    Ok(out)
}

fn grid(half_width: f64, points: usize) -> Vec<f64> {
    let m = (points - 1) as f64;
    (0..points)
        .map(|i| half_width * (2.0 * i as f64 - m) / m)
        .collect()
}

/// Loss on `point + x·d₁ (+ y·d₂)` over a symmetric grid.
pub fn landscape_slice(
    loss: &dyn DifferentiableLoss,
    point: &ParamVector,
    batch: &Batch,
    dir1: &[f64],
    dir2: Option<&[f64]>,
    spec: &SliceSpec,
) -> Result<LandscapeSlice> {
    if spec.points < 3 || spec.points.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "slice grid needs an odd number of points >= 3, got {}",
            spec.points
        )));
    }
    if !(spec.half_width > 0.0 && spec.half_width.is_finite()) {
        return Err(Error::invalid("slice half_width must be positive"));
    }
    let prep = |d: &[f64]| -> Result<Vec<f64>> {
        if spec.filter_normalize {
            filter_normalize(d, point)
        } else {
            Error::check_dim("slice direction", point.dim(), d.len())?;
            Ok(d.to_vec())
        }
    };
    let d1 = prep(dir1)?;
    let d2 = dir2.map(prep).transpose()?;
    let xs = grid(spec.half_width, spec.points);
    let ys = d2.as_ref().map(|_| xs.clone());

    let mut values = Vec::new();
    match (&d2, &ys) {
        (Some(d2), Some(ys)) => {
            for &y in ys {
                for &x in &xs {
                    let offset: Vec<f64> = d1.iter().zip(d2).map(|(a, b)| x * a + y * b).collect();
                    values.push(loss.evaluate(&point.offset(1.0, &offset)?, batch)?);
                }
            }
        }
        _ => {
            for &x in &xs {
                values.push(loss.evaluate(&point.offset(x, &d1)?, batch)?);
            }
        }
    }
    Ok(LandscapeSlice { xs, ys, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{quadratic_loss, QuadraticSpec};

    #[test]
    fn grid_is_antisymmetric_and_centered() {
        let g = grid(0.7, 9);
        assert_eq!(g[4], 0.0);
        for i in 0..9 {
            assert_eq!(g[i], -g[8 - i]);
        }
    }

    #[test]
    fn quadratic_slice_along_first_axis() {
        let q = quadratic_loss(QuadraticSpec::centered(vec![2.0, 1.0])).unwrap();
        let spec = SliceSpec {
            half_width: 1.0,
            points: 5,
            filter_normalize: false,
        };
        let s = landscape_slice(&q, &q.center(), &Batch::placeholder(), &[1.0, 0.0], None, &spec).unwrap();
        for (x, v) in s.xs.iter().zip(&s.values) {
            assert!((v - x * x).abs() < 1e-15);
        }
    }

    #[test]
    fn even_grid_rejected() {
        let q = quadratic_loss(QuadraticSpec::centered(vec![1.0])).unwrap();
        let spec = SliceSpec {
            points: 4,
            ..SliceSpec::default()
        };
        assert!(landscape_slice(&q, &q.center(), &Batch::placeholder(), &[1.0], None, &spec).is_err());
    }

    #[test]
    fn filter_normalization_matches_segment_norms() {
        use crate::params::{Layout, SegmentKind};
        use std::sync::Arc;
        let layout = Arc::new(Layout::new([
            ("w".to_string(), SegmentKind::Weight, 2),
            ("b".to_string(), SegmentKind::Bias, 1),
        ]));
        let p = ParamVector::new(vec![3.0, 4.0, 0.0], layout).unwrap();
        let d = filter_normalize(&[1.0, 0.0, 2.0], &p).unwrap();
        assert_eq!(d, vec![5.0, 0.0, 0.0]);
    }
}
