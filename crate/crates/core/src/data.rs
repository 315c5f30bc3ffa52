//! In-memory datasets and minibatches.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Labels { labels: Vec<usize>, classes: usize },
    /// Row-major `n × dim` regression targets.
    Values { values: Vec<f64>, dim: usize },
    /// Batch-independent objectives (quadratics) carry no targets.
    None,
}

/// Row-major feature matrix with targets. Also used as the minibatch type.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Vec<f64>,
    rows: usize,
    feature_dim: usize,
    targets: Targets,
    /// Source row ids, for minibatches gathered from a larger dataset.
    indices: Vec<usize>,
}

pub type Batch = Dataset;

impl Dataset {
    pub fn new(inputs: Vec<f64>, feature_dim: usize, targets: Targets) -> Result<Self> {
        let rows = if feature_dim == 0 {
            match &targets {
                Targets::Labels { labels, .. } => labels.len(),
                Targets::Values { values, dim } => values.len() / (*dim).max(1),
                Targets::None => 0,
            }
        } else {
            if !inputs.len().is_multiple_of(feature_dim) {
                return Err(Error::Dataset(format!(
                    "{} input values do not divide into rows of {feature_dim}",
                    inputs.len()
                )));
            }
            inputs.len() / feature_dim
        };
        if let Some(i) = inputs.iter().position(|v| !v.is_finite()) {
            return Err(Error::Dataset(format!(
                "non-finite input at row {}, column {}",
                i / feature_dim.max(1),
                i % feature_dim.max(1)
            )));
        }
        match &targets {
            Targets::Labels { labels, classes } => {
                Error::check_dim("dataset labels", rows, labels.len())?;
                if let Some(&bad) = labels.iter().find(|&&l| l >= *classes) {
                    return Err(Error::LabelOutOfRange {
                        label: bad,
                        classes: *classes,
                    });
                }
            }
            Targets::Values { values, dim } => {
                Error::check_dim("dataset targets", rows * dim, values.len())?;
            }
            Targets::None => {}
        }
        Ok(Dataset {
            inputs,
            rows,
            feature_dim,
            targets,
            indices: (0..rows).collect(),
        })
    }

    /// A single featureless row for objectives that ignore data.
    pub fn placeholder() -> Self {
        Dataset {
            inputs: Vec::new(),
            rows: 1,
            feature_dim: 0,
            targets: Targets::None,
            indices: vec![0],
        }
    }

    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.feature_dim..(i + 1) * self.feature_dim]
    }

    pub fn num_classes(&self) -> Option<usize> {
        match self.targets {
            Targets::Labels { classes, .. } => Some(classes),
            _ => None,
        }
    }

    /// Output width a model must produce for these targets.
    pub fn target_dim(&self) -> usize {
        match &self.targets {
            Targets::Labels { classes, .. } => *classes,
            Targets::Values { dim, .. } => *dim,
            Targets::None => 0,
        }
    }

    /// Gathers `rows` (positions in this dataset) into a new batch.
    pub fn select(&self, rows: &[usize]) -> Dataset {
        let mut inputs = Vec::with_capacity(rows.len() * self.feature_dim);
        for &r in rows {
            inputs.extend_from_slice(self.row(r));
        }
        let targets = match &self.targets {
            Targets::Labels { labels, classes } => Targets::Labels {
                labels: rows.iter().map(|&r| labels[r]).collect(),
                classes: *classes,
            },
            Targets::Values { values, dim } => Targets::Values {
                values: rows
                    .iter()
                    .flat_map(|&r| values[r * dim..(r + 1) * dim].iter().copied())
                    .collect(),
                dim: *dim,
            },
            Targets::None => Targets::None,
        };
        Dataset {
            inputs,
            rows: rows.len(),
            feature_dim: self.feature_dim,
            targets,
            indices: rows.iter().map(|&r| self.indices[r]).collect(),
        }
    }
}
