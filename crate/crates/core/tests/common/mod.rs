#![allow(dead_code)]

use std::sync::Arc;

use gam_core::autodiff::{Objective, Scalar, Tape, Var};
use gam_core::data::Targets;
use gam_core::models::{init_params, mlp_loss, Activation, MlpLoss, MlpSpec, Task};
use gam_core::{Batch, Dataset, Layout, ParamVector, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// `−cos(2π·freq·θ₁)`.
pub struct Cosine {
    pub freq: f64,
    layout: Arc<Layout>,
}

impl Cosine {
    pub fn new(freq: f64) -> Self {
        Cosine {
            freq,
            layout: Arc::new(Layout::flat(1)),
        }
    }
}

impl Objective for Cosine {
    fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    fn record<S: Scalar>(&self, tape: &mut Tape<S>, p: &[Var], _: &Batch) -> Result<Var> {
        let x = tape.scale(p[0], 2.0 * std::f64::consts::PI * self.freq);
        let c = tape.cos(x);
        Ok(tape.neg(c))
    }
}

/// `θ₁²·θ₂`.
pub struct SquareTimes {
    layout: Arc<Layout>,
}

impl SquareTimes {
    pub fn new() -> Self {
        SquareTimes {
            layout: Arc::new(Layout::flat(2)),
        }
    }
}

impl Objective for SquareTimes {
    fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    fn record<S: Scalar>(&self, tape: &mut Tape<S>, p: &[Var], _: &Batch) -> Result<Var> {
        let sq = tape.square(p[0]);
        Ok(tape.mul(sq, p[1]))
    }
}

/// `θ₁² + 3θ₂`.
pub struct SquarePlusLinear {
    layout: Arc<Layout>,
}

impl SquarePlusLinear {
    pub fn new() -> Self {
        SquarePlusLinear {
            layout: Arc::new(Layout::flat(2)),
        }
    }
}

impl Objective for SquarePlusLinear {
    fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    fn record<S: Scalar>(&self, tape: &mut Tape<S>, p: &[Var], _: &Batch) -> Result<Var> {
        let sq = tape.square(p[0]);
        let lin = tape.scale(p[1], 3.0);
        Ok(tape.add(sq, lin))
    }
}

pub fn point(values: &[f64]) -> ParamVector {
    ParamVector::from_vec(values.to_vec()).unwrap()
}

pub fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(f64::MIN_POSITIVE)
}

/// Central-difference gradient, one coordinate at a time.
pub fn fd_gradient(
    loss: &dyn gam_core::DifferentiableLoss,
    p: &ParamVector,
    batch: &Batch,
    eps: f64,
) -> Vec<f64> {
    (0..p.dim())
        .map(|i| {
            let mut e = vec![0.0; p.dim()];
            e[i] = 1.0;
            let plus = loss.evaluate(&p.offset(eps, &e).unwrap(), batch).unwrap();
            let minus = loss.evaluate(&p.offset(-eps, &e).unwrap(), batch).unwrap();
            (plus - minus) / (2.0 * eps)
        })
        .collect()
}

/// Random classification or regression batch for an MLP with `widths`.
pub fn random_batch(rng: &mut ChaCha8Rng, widths: &[usize], rows: usize, task: Task) -> Dataset {
    let (input, output) = (widths[0], *widths.last().unwrap());
    let inputs = gaussian(rng, rows * input);
    let targets = match task {
        Task::SoftmaxCrossEntropy => Targets::Labels {
            labels: (0..rows).map(|_| rng.random_range(0..output)).collect(),
            classes: output,
        },
        Task::Mse => Targets::Values {
            values: gaussian(rng, rows * output),
            dim: output,
        },
    };
    Dataset::new(inputs, input, targets).unwrap()
}

pub fn mlp(widths: &[usize], activation: Activation, task: Task, seed: u64) -> (MlpLoss, ParamVector) {
    let spec = MlpSpec {
        layer_widths: widths.to_vec(),
        activation,
        init_seed: seed,
        init_scale: 1.0,
    };
    let init = init_params(&spec).unwrap();
    (mlp_loss(spec, task).unwrap(), init)
}
