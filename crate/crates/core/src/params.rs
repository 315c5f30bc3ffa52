//! Flat parameter vectors with a named segment layout.

use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Weight,
    Bias,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub kind: SegmentKind,
    pub offset: usize,
    pub len: usize,
}

impl Segment {
    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len
    }
}

/// Ordered, contiguous segments covering `0..dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    segments: Vec<Segment>,
}

impl Layout {
    pub fn new(parts: impl IntoIterator<Item = (String, SegmentKind, usize)>) -> Self {
        let mut offset = 0;
        let segments = parts
            .into_iter()
            .map(|(name, kind, len)| {
                let seg = Segment {
                    name,
                    kind,
                    offset,
                    len,
                };
                offset += len;
                seg
            })
            .collect();
        Layout { segments }
    }

    /// Single weight segment named `theta`.
    pub fn flat(dim: usize) -> Self {
        Layout::new([("theta".to_string(), SegmentKind::Weight, dim)])
    }

    pub fn dim(&self) -> usize {
        self.segments.iter().map(|s| s.len).sum()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// `true` for coordinates that belong to weight segments.
    pub fn weight_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.dim()];
        for seg in &self.segments {
            if seg.kind == SegmentKind::Weight {
                mask[seg.range()].iter_mut().for_each(|m| *m = true);
            }
        }
        mask
    }

    /// Rebuilds a layout from serialized segments, checking contiguity.
    pub fn from_segments(segments: Vec<Segment>) -> Result<Self> {
        let mut offset = 0;
        for seg in &segments {
            if seg.offset != offset {
                return Err(Error::invalid(format!(
                    "segment {} starts at {} but previous segment ends at {}",
                    seg.name, seg.offset, offset
                )));
            }
            offset += seg.len;
        }
        Ok(Layout { segments })
    }
}

/// The trainable parameters of a model as one ordered vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
    layout: Arc<Layout>,
}

impl ParamVector {
    pub fn new(values: Vec<f64>, layout: Arc<Layout>) -> Result<Self> {
        Error::check_dim("ParamVector::new", layout.dim(), values.len())?;
        let p = ParamVector { values, layout };
        p.ensure_finite("ParamVector::new")?;
        Ok(p)
    }

    /// Wraps `values` in a single-segment layout.
    pub fn from_vec(values: Vec<f64>) -> Result<Self> {
        let layout = Arc::new(Layout::flat(values.len()));
        ParamVector::new(values, layout)
    }

    pub fn zeros(layout: Arc<Layout>) -> Self {
        ParamVector {
            values: vec![0.0; layout.dim()],
            layout,
        }
    }

    pub(crate) fn from_parts_unchecked(values: Vec<f64>, layout: Arc<Layout>) -> Self {
        debug_assert_eq!(values.len(), layout.dim());
        ParamVector { values, layout }
    }

    /// Same layout, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        ParamVector::new(values, Arc::clone(&self.layout))
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn segment(&self, seg: &Segment) -> &[f64] {
        &self.values[seg.range()]
    }

    pub fn ensure_finite(&self, context: &str) -> Result<()> {
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "{context} (coordinate {i} = {})",
                self.values[i]
            )));
        }
        Ok(())
    }

    pub fn norm(&self) -> f64 {
        norm(&self.values)
    }

    pub fn dot(&self, other: &ParamVector) -> f64 {
        dot(&self.values, &other.values)
    }

    /// `self + scale * dir`
    pub fn offset(&self, scale: f64, dir: &[f64]) -> Result<ParamVector> {
        Error::check_dim("ParamVector::offset", self.dim(), dir.len())?;
        let values = self
            .values
            .iter()
            .zip(dir)
            .map(|(a, b)| a + scale * b)
            .collect();
        self.with_values(values)
    }
}

impl AsRef<[f64]> for ParamVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `v / (‖v‖ + xi)`; the zero vector when the denominator vanishes.
pub(crate) fn regularized_unit(v: &[f64], xi: f64) -> Vec<f64> {
    let denom = norm(v) + xi;
    if denom == 0.0 {
        vec![0.0; v.len()]
    } else {
        v.iter().map(|x| x / denom).collect()
    }
}
