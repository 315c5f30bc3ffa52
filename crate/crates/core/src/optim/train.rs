use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::step::{gam_step, sam_step, sgd_step, Hyperparams, OptimizerState, StepReport};
use super::Schedule;
use crate::autodiff::DifferentiableLoss;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::{make_oracle, OracleLossSpec, SamTerm};
use crate::params::ParamVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptimizerKind {
    #[serde(rename = "sgd")]
    Sgd,
    #[serde(rename = "sam")]
    Sam,
    /// SGD base with the gradient-norm term.
    #[serde(rename = "gam")]
    Gam,
    /// SAM oracle with the gradient-norm term; both use the same `ρ_t`.
    #[serde(rename = "sam+gam")]
    SamGam,
}

impl OptimizerKind {
    pub fn uses_gam(self) -> bool {
        matches!(self, OptimizerKind::Gam | OptimizerKind::SamGam)
    }
}

/// One row per epoch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub epoch: usize,
    pub step: u64,
    pub train_loss: f64,
    pub train_acc: Option<f64>,
    pub test_acc: Option<f64>,
    pub best_test_acc: Option<f64>,
    pub mean_overall_grad_norm_sq: f64,
    pub wall_ms: u64,
}

/// Accuracy of a parameter point on a dataset; `None` when undefined.
pub type AccuracyFn<'a> = dyn Fn(&ParamVector, &Dataset) -> Option<f64> + Sync + 'a;

pub struct TrainSetup<'a> {
    pub empirical: Arc<dyn DifferentiableLoss>,
    pub train: &'a Dataset,
    pub test: Option<&'a Dataset>,
    pub init: ParamVector,
    pub kind: OptimizerKind,
    pub hyper: Hyperparams,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub accuracy: Option<&'a AccuracyFn<'a>>,
    /// Keep every [`StepReport`] in the outcome.
    pub record_steps: bool,
    /// When false, `wall_ms` is written as 0 so outputs are byte-reproducible.
    pub record_timing: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub rows: Vec<MetricsRow>,
    pub steps: Vec<StepReport>,
    pub params: ParamVector,
    /// Set when training stopped on a non-finite loss or step.
    pub divergence: Option<String>,
}

impl TrainSetup<'_> {
    pub fn iters_per_epoch(&self) -> usize {
        self.train.len().div_ceil(self.batch_size)
    }

    /// Iterations at the start of each epoch that take a GAM step.
    pub fn gam_iters_per_epoch(&self) -> usize {
        if !self.kind.uses_gam() {
            return 0;
        }
        let iters = self.iters_per_epoch();
        ((self.hyper.gam_apply_ratio * iters as f64).ceil() as usize).min(iters)
    }

    /// Hyperparameters with a cosine schedule's total filled in when left at 0.
    pub fn resolved_hyper(&self) -> Hyperparams {
        let total = (self.epochs * self.iters_per_epoch()) as u64;
        let mut h = self.hyper;
        for s in [&mut h.lr_schedule, &mut h.rho_schedule] {
            if let Schedule::Cosine { total: t @ 0 } = s {
                *t = total;
            }
        }
        h
    }
}

fn is_divergence(e: &Error) -> bool {
    matches!(e, Error::NonFinite(_) | Error::NonFiniteStep { .. })
}

/// Runs `epochs` passes of seeded-shuffled minibatches. `on_epoch` is called
/// with the 1-based epoch and the parameters at its end.
pub fn train_run(
    setup: &TrainSetup<'_>,
    mut on_epoch: impl FnMut(usize, &ParamVector) -> Result<()>,
) -> Result<TrainOutcome> {
    if setup.batch_size == 0 || setup.batch_size > setup.train.len() {
        return Err(Error::Config(vec![format!(
            "batch_size must be in 1..={} (got {})",
            setup.train.len(),
            setup.batch_size
        )]));
    }
    Error::check_dim("initial parameters", setup.empirical.dim(), setup.init.dim())?;
    let hyper = setup.resolved_hyper();
    let mut state = OptimizerState::new(hyper)?;
    let empirical: &dyn DifferentiableLoss = setup.empirical.as_ref();
    let decay = make_oracle(
        Arc::clone(&setup.empirical),
        OracleLossSpec {
            weight_decay: hyper.weight_decay,
            sam_term: None,
        },
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..setup.train.len()).collect();
    let iters = setup.iters_per_epoch();
    let gam_iters = setup.gam_iters_per_epoch();

    let mut params = setup.init.clone();
    let mut rows = Vec::with_capacity(setup.epochs);
    let mut steps = Vec::new();
    let mut best_test: Option<f64> = None;

    for epoch in 1..=setup.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut norm_sum = 0.0;
        for (i, chunk) in order.chunks(setup.batch_size).enumerate() {
            let batch = setup.train.select(chunk);
            let use_gam = i < gam_iters;
            let result = match setup.kind {
                OptimizerKind::Sgd => sgd_step(&mut state, &decay, &params, &batch),
                OptimizerKind::Sam => sam_step(&mut state, &decay, &params, &batch),
                OptimizerKind::Gam if use_gam => {
                    gam_step(&mut state, &decay, empirical, &params, &batch)
                }
                OptimizerKind::Gam => sgd_step(&mut state, &decay, &params, &batch),
                OptimizerKind::SamGam if use_gam => {
                    let (_, rho) = state.next_rates()?;
                    let sam_term = (rho > 0.0).then_some(SamTerm {
                        rho,
                        xi: hyper.xi,
                    });
                    let oracle = make_oracle(
                        Arc::clone(&setup.empirical),
                        OracleLossSpec {
                            weight_decay: hyper.weight_decay,
                            sam_term,
                        },
                    )?;
                    gam_step(&mut state, &oracle, empirical, &params, &batch)
                }
                OptimizerKind::SamGam => sam_step(&mut state, &decay, &params, &batch),
            };
            let (next, report) = match result {
                Ok(r) if r.1.loss_value.is_finite() => r,
                Ok(r) => {
                    let reason = format!("loss {} at step {}", r.1.loss_value, state.t);
                    return Ok(diverged(rows, steps, params, epoch, state.t, reason));
                }
                Err(e) if is_divergence(&e) => {
                    return Ok(diverged(rows, steps, params, epoch, state.t, e.to_string()));
                }
                Err(e) => return Err(e),
            };
            loss_sum += report.loss_value;
            norm_sum += report.overall_grad_norm_sq;
            if setup.record_steps {
                steps.push(report);
            }
            params = next;
        }

        let (train_acc, test_acc) = match setup.accuracy {
            Some(acc) => (acc(&params, setup.train), setup.test.and_then(|t| acc(&params, t))),
            None => (None, None),
        };
        if let Some(a) = test_acc {
            best_test = Some(best_test.map_or(a, |b| b.max(a)));
        }
        on_epoch(epoch, &params)?;
        rows.push(MetricsRow {
            epoch,
            step: state.t,
            train_loss: loss_sum / iters as f64,
            train_acc,
            test_acc,
            best_test_acc: best_test,
            mean_overall_grad_norm_sq: norm_sum / iters as f64,
            wall_ms: if setup.record_timing {
                started.elapsed().as_millis() as u64
            } else {
                0
            },
        });
    }

    Ok(TrainOutcome {
        rows,
        steps,
        params,
        divergence: None,
    })
}

fn diverged(
    rows: Vec<MetricsRow>,
    steps: Vec<StepReport>,
    params: ParamVector,
    epoch: usize,
    step: u64,
    reason: String,
) -> TrainOutcome {
    let err = Error::Divergence {
        epoch,
        step,
        reason,
    };
    log::warn!("{err}");
    TrainOutcome {
        rows,
        steps,
        params,
        divergence: Some(err.to_string()),
    }
}
