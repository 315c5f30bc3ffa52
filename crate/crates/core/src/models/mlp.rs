use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Objective, Scalar, Tape, Var};
use crate::data::{Batch, Dataset, Targets};
use crate::error::{Error, Result};
use crate::params::{Layout, ParamVector, SegmentKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    /// Not twice differentiable at 0; Hessian-vector products are only
    /// defined almost everywhere.
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    #[default]
    SoftmaxCrossEntropy,
    Mse,
}

/// Fully connected network; `layer_widths` includes input and output widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub layer_widths: Vec<usize>,
    pub activation: Activation,
    pub init_seed: u64,
    pub init_scale: f64,
}

impl MlpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.layer_widths.len() < 3 {
            return Err(Error::invalid(
                "mlp needs input, output and at least one hidden layer width",
            ));
        }
        if self.layer_widths.contains(&0) {
            return Err(Error::invalid("mlp layer widths must be positive"));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return Err(Error::invalid("mlp init_scale must be positive"));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.layer_widths
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    /// `layer{i}.weight` (row-major `out × in`) then `layer{i}.bias`, per layer.
    pub fn layout(&self) -> Layout {
        Layout::new(self.layer_widths.windows(2).enumerate().flat_map(|(i, w)| {
            [
                (format!("layer{i}.weight"), SegmentKind::Weight, w[0] * w[1]),
                (format!("layer{i}.bias"), SegmentKind::Bias, w[1]),
            ]
        }))
    }

    pub fn input_dim(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_widths.last().unwrap()
    }

    /// Plain forward pass; returns the output layer (logits for classification).
    pub fn forward(&self, params: &[f64], input: &[f64]) -> Vec<f64> {
        let mut act = input.to_vec();
        let mut offset = 0;
        let layers = self.layer_widths.len() - 1;
        for (l, w) in self.layer_widths.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let weights = &params[offset..offset + fan_in * fan_out];
            let bias = &params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            offset += fan_in * fan_out + fan_out;
            let mut next: Vec<f64> = (0..fan_out)
                .map(|j| {
                    bias[j]
                        + weights[j * fan_in..(j + 1) * fan_in]
                            .iter()
                            .zip(&act)
                            .map(|(a, b)| a * b)
                            .sum::<f64>()
                })
                .collect();
            if l + 1 < layers {
                for v in &mut next {
                    *v = match self.activation {
                        Activation::Tanh => v.tanh(),
                        Activation::Relu => v.max(0.0),
                    };
                }
            }
            act = next;
        }
        act
    }
}

/// Seeded uniform(−s, s) weights with `s = init_scale / √fan_in`; zero biases.
pub fn init_params(spec: &MlpSpec) -> Result<ParamVector> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.init_seed);
    let mut values = Vec::with_capacity(spec.param_count());
    for w in spec.layer_widths.windows(2) {
        let s = spec.init_scale / (w[0] as f64).sqrt();
        values.extend((0..w[0] * w[1]).map(|_| rng.random_range(-s..s)));
        values.extend(std::iter::repeat_n(0.0, w[1]));
    }
    ParamVector::new(values, Arc::new(spec.layout()))
}

/// Mean per-example loss of an MLP over a batch.
#[derive(Debug, Clone)]
pub struct MlpLoss {
    spec: MlpSpec,
    task: Task,
    layout: Arc<Layout>,
}

pub fn mlp_loss(spec: MlpSpec, task: Task) -> Result<MlpLoss> {
    spec.validate()?;
    let layout = Arc::new(spec.layout());
    Ok(MlpLoss { spec, task, layout })
}

impl MlpLoss {
    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn task(&self) -> Task {
        self.task
    }

    fn check_batch(&self, batch: &Batch) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        Error::check_dim("mlp input width", self.spec.input_dim(), batch.feature_dim())?;
        match (self.task, batch.targets()) {
            (Task::SoftmaxCrossEntropy, Targets::Labels { classes, .. }) => {
                Error::check_dim("mlp output width", self.spec.output_dim(), *classes)
            }
            (Task::Mse, Targets::Values { dim, .. }) => {
                Error::check_dim("mlp output width", self.spec.output_dim(), *dim)
            }
            (task, _) => Err(Error::invalid(format!(
                "batch targets do not match task {task:?}"
            ))),
        }
    }

    /// Fraction of rows whose argmax logit equals the label; ties go to the
    /// lowest class index. `None` for regression targets.
    pub fn accuracy(&self, params: &ParamVector, data: &Dataset) -> Option<f64> {
        let Targets::Labels { labels, .. } = data.targets() else {
            return None;
        };
        if labels.is_empty() {
            return None;
        }
        let correct = labels
            .iter()
            .enumerate()
            .filter(|(i, &y)| argmax(&self.spec.forward(params.as_slice(), data.row(*i))) == y)
            .count();
        Some(correct as f64 / labels.len() as f64)
    }
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

impl Objective for MlpLoss {
    fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    fn record<S: Scalar>(&self, tape: &mut Tape<S>, params: &[Var], batch: &Batch) -> Result<Var> {
        self.check_batch(batch)?;
        let widths = &self.spec.layer_widths;
        let layers = widths.len() - 1;
        let mut per_example = Vec::with_capacity(batch.len());
        for row in 0..batch.len() {
            let mut offset = 0;
            let mut act: Vec<Var> = Vec::new();
            for (l, w) in widths.windows(2).enumerate() {
                let (fan_in, fan_out) = (w[0], w[1]);
                let weights = &params[offset..offset + fan_in * fan_out];
                let bias = &params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
                offset += fan_in * fan_out + fan_out;
                let mut next: Vec<Var> = (0..fan_out)
                    .map(|j| {
                        let wj = &weights[j * fan_in..(j + 1) * fan_in];
                        if l == 0 {
                            tape.affine_data(wj, batch.row(row), bias[j])
                        } else {
                            tape.affine(wj, &act, bias[j])
                        }
                    })
                    .collect();
                if l + 1 < layers {
                    for v in &mut next {
                        *v = match self.spec.activation {
                            Activation::Tanh => tape.tanh(*v),
                            Activation::Relu => tape.relu(*v),
                        };
                    }
                }
                act = next;
            }
            let loss = match batch.targets() {
                Targets::Labels { labels, .. } => {
                    let lse = tape.log_sum_exp(&act);
                    tape.sub(lse, act[labels[row]])
                }
                Targets::Values { values, dim } => {
                    let target = &values[row * dim..(row + 1) * dim];
                    let sq: Vec<Var> = act
                        .iter()
                        .zip(target)
                        .map(|(&o, &t)| {
                            let r = tape.add_const(o, -t);
                            tape.square(r)
                        })
                        .collect();
                    let s = tape.sum(&sq);
                    tape.scale(s, 1.0 / *dim as f64)
                }
                Targets::None => unreachable!("checked by check_batch"),
            };
            per_example.push(loss);
        }
        let total = tape.sum(&per_example);
        Ok(tape.scale(total, 1.0 / batch.len() as f64))
    }

    fn tape_hint(&self, batch: &Batch) -> (usize, usize) {
        let per_nodes: usize = self.spec.layer_widths[1..].iter().map(|w| 2 * w).sum::<usize>() + 8;
        let per_edges: usize = self
            .spec
            .layer_widths
            .windows(2)
            .map(|w| 2 * (w[0] + 1) * w[1] + w[1])
            .sum::<usize>()
            + 8;
        let b = batch.len();
        (self.layout.dim() + b * per_nodes + 2, b * per_edges + b + 1)
    }
}
