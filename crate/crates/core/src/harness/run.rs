//! Single training runs and their on-disk artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::checkpoint::write_checkpoint;
use super::config::{DatasetSpec, ModelConfig, RunConfig, SliceRequest};
use super::dataset::{load_dataset, train_test_split};
use crate::autodiff::DifferentiableLoss;
use crate::data::{Dataset, Targets};
use crate::diagnostics::{
    flatness_report, landscape_slice, minima_census, power_iteration_topk, random_direction,
    Census, FlatnessReport, LandscapeSlice,
};
use crate::error::{Error, Result};
use crate::models::{init_params, mlp_loss, quadratic_loss, MlpLoss, MlpSpec, QuadraticSpec, Task};
use crate::optim::{train_run, Hyperparams, MetricsRow, TrainSetup};
use crate::params::ParamVector;

const DATA_STREAM: u64 = 1 << 32;
const SPLIT_STREAM: u64 = (1 << 32) + 1;
const INIT_STREAM: u64 = (1 << 32) + 2;

/// Independent 64-bit seed for `stream` under `base`.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(stream);
    rng.next_u64()
}

#[derive(Debug, Clone)]
enum Model {
    Mlp(Arc<MlpLoss>),
    Quadratic,
}

/// Loaded data, model and start point for a configuration.
pub struct Experiment {
    pub config: RunConfig,
    pub train: Dataset,
    pub test: Option<Dataset>,
    pub loss: Arc<dyn DifferentiableLoss>,
    pub init: ParamVector,
    model: Model,
}

fn one_hot(data: &Dataset) -> Result<Dataset> {
    let Targets::Labels { labels, classes } = data.targets() else {
        return Ok(data.clone());
    };
    let mut values = vec![0.0; labels.len() * classes];
    for (i, &l) in labels.iter().enumerate() {
        values[i * classes + l] = 1.0;
    }
    Dataset::new(
        data.inputs().to_vec(),
        data.feature_dim(),
        Targets::Values {
            values,
            dim: *classes,
        },
    )
}

impl Experiment {
    pub fn prepare(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let seed = config.seed;
        let full = load_dataset(&config.dataset, derive_seed(seed, DATA_STREAM))?;
        match (&config.model, &config.dataset) {
            (ModelConfig::Quadratic { init_scale }, DatasetSpec::Quadratic { diag, .. }) => {
                let q = quadratic_loss(QuadraticSpec::centered(diag.clone()))?;
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, INIT_STREAM));
                let center = q.center();
                let values = center
                    .as_slice()
                    .iter()
                    .map(|c| c + init_scale * rng.random_range(-1.0..=1.0))
                    .collect();
                let init = center.with_values(values)?;
                Ok(Experiment {
                    config: config.clone(),
                    train: full,
                    test: None,
                    loss: Arc::new(q),
                    init,
                    model: Model::Quadratic,
                })
            }
            (
                ModelConfig::Mlp {
                    hidden,
                    activation,
                    init_scale,
                    task,
                },
                _,
            ) => {
                let full = match task {
                    Task::Mse => one_hot(&full)?,
                    Task::SoftmaxCrossEntropy => full,
                };
                let (train, test) = if config.test_fraction > 0.0 {
                    let (tr, te) =
                        train_test_split(&full, config.test_fraction, derive_seed(seed, SPLIT_STREAM));
                    (tr, (!te.is_empty()).then_some(te))
                } else {
                    (full, None)
                };
                if config.batch_size > train.len() {
                    return Err(Error::Config(vec![format!(
                        "batch_size = {} exceeds the {} training rows",
                        config.batch_size,
                        train.len()
                    )]));
                }
                let mut widths = vec![train.feature_dim()];
                widths.extend(hidden);
                widths.push(train.target_dim());
                let spec = MlpSpec {
                    layer_widths: widths,
                    activation: *activation,
                    init_seed: derive_seed(seed, INIT_STREAM),
                    init_scale: *init_scale,
                };
                let init = init_params(&spec)?;
                let mlp = Arc::new(mlp_loss(spec, *task)?);
                Ok(Experiment {
                    config: config.clone(),
                    train,
                    test,
                    loss: mlp.clone(),
                    init,
                    model: Model::Mlp(mlp),
                })
            }
            _ => Err(Error::Config(vec![
                "model.kind and dataset.kind are incompatible".to_string()
            ])),
        }
    }

    /// Classification accuracy; regression targets compare argmaxes.
    pub fn accuracy(&self, params: &ParamVector, data: &Dataset) -> Option<f64> {
        let Model::Mlp(mlp) = &self.model else {
            return None;
        };
        match data.targets() {
            Targets::Labels { .. } => mlp.accuracy(params, data),
            Targets::Values { values, dim } if !data.is_empty() => {
                let correct = (0..data.len())
                    .filter(|&i| {
                        let out = mlp.spec().forward(params.as_slice(), data.row(i));
                        crate::models::mlp::argmax(&out)
                            == crate::models::mlp::argmax(&values[i * dim..(i + 1) * dim])
                    })
                    .count();
                Some(correct as f64 / data.len() as f64)
            }
            _ => None,
        }
    }

    pub fn param_count(&self) -> usize {
        self.init.dim()
    }

    /// Flatness report on the full training set.
    pub fn flatness_report(&self, params: &ParamVector) -> Result<FlatnessReport> {
        let d = &self.config.diagnostics;
        flatness_report(
            self.loss.as_ref(),
            params,
            &self.train,
            self.config.diagnostics_rho(),
            &d.probe,
            &d.spectrum,
        )
    }

    pub fn census(&self, params: &ParamVector) -> Result<Census> {
        minima_census(self.loss.as_ref(), params, &self.train, &self.config.diagnostics.probe)
    }

    pub fn lambda_max(&self, params: &ParamVector) -> Result<f64> {
        let s = &self.config.diagnostics.spectrum;
        let top = power_iteration_topk(
            self.loss.as_ref(),
            params,
            &self.train,
            1,
            s.power_iters,
            s.power_tol,
            self.config.diagnostics.probe.seed,
        )?;
        Ok(top.eigenvalues[0])
    }

    pub fn slice(&self, params: &ParamVector, request: &SliceRequest) -> Result<LandscapeSlice> {
        let d1 = random_direction(params.dim(), request.seed);
        let d2 = (request.dim == 2).then(|| random_direction(params.dim(), derive_seed(request.seed, 1)));
        if !(request.dim == 1 || request.dim == 2) {
            return Err(Error::invalid(format!("slice dim must be 1 or 2, got {}", request.dim)));
        }
        landscape_slice(self.loss.as_ref(), params, &self.train, &d1, d2.as_deref(), &request.grid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Record per-epoch wall time; off gives byte-identical outputs across reruns.
    pub record_timing: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            record_timing: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub rows: Vec<MetricsRow>,
    pub params: ParamVector,
    pub divergence: Option<String>,
    /// `(epoch, report)` for each requested spectrum epoch.
    pub reports: Vec<(usize, FlatnessReport)>,
    /// Top Hessian eigenvalue at the final parameters (skipped after divergence).
    pub final_lambda_max: Option<f64>,
    pub output_dir: PathBuf,
}

impl RunSummary {
    pub fn final_test_acc(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.test_acc)
    }

    pub fn best_test_acc(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.best_test_acc)
    }
}

#[derive(Serialize)]
struct Resolved {
    train_rows: usize,
    test_rows: usize,
    param_count: usize,
    iters_per_epoch: usize,
    gam_iters_per_epoch: usize,
    hyper: Hyperparams,
    diagnostics_rho: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'static str,
    status: &'static str,
    divergence: Option<&'a str>,
    config: &'a RunConfig,
    resolved: Resolved,
    final_lambda_max: Option<f64>,
}

pub(crate) fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Dataset(format!("{}: {other:?}", path.display())),
    })?;
    if rows.is_empty() {
        w.write_record([
            "epoch",
            "step",
            "train_loss",
            "train_acc",
            "test_acc",
            "best_test_acc",
            "mean_overall_grad_norm_sq",
            "wall_ms",
        ])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `x,loss` (1-D) or `x,y,loss` (2-D) rows.
pub fn write_slice(path: &Path, slice: &LandscapeSlice) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Dataset(format!("{}: {other:?}", path.display())),
    })?;
    match &slice.ys {
        None => {
            w.write_record(["x", "loss"])?;
            for (x, v) in slice.xs.iter().zip(&slice.values) {
                w.write_record([x.to_string(), v.to_string()])?;
            }
        }
        Some(ys) => {
            w.write_record(["x", "y", "loss"])?;
            for (iy, y) in ys.iter().enumerate() {
                for (ix, x) in slice.xs.iter().enumerate() {
                    w.write_record([x.to_string(), y.to_string(), slice.at(ix, iy).to_string()])?;
                }
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_report(path: &Path, epoch: usize, report: &FlatnessReport) -> Result<()> {
    let mut value = serde_json::to_value(report)?;
    if let serde_json::Value::Object(map) = &mut value {
        map.insert("epoch".to_string(), epoch.into());
    }
    write_json(path, &value)
}

/// Trains per `config`, writing `metrics.csv`, `flatness_<epoch>.json`,
/// `slice_<i>_<dim>d.csv`, `params.bin`/`params.json` and `manifest.json`
/// into `config.output_dir`.
pub fn run(config: &RunConfig, options: RunOptions) -> Result<RunSummary> {
    let exp = Experiment::prepare(config)?;
    let out = config.output_dir.clone();
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;

    let accuracy = |p: &ParamVector, d: &Dataset| exp.accuracy(p, d);
    let setup = TrainSetup {
        empirical: Arc::clone(&exp.loss),
        train: &exp.train,
        test: exp.test.as_ref(),
        init: exp.init.clone(),
        kind: config.optimizer.kind,
        hyper: config.optimizer.hyper(),
        epochs: config.epochs,
        batch_size: config.batch_size,
        seed: config.seed,
        accuracy: Some(&accuracy),
        record_steps: false,
        record_timing: options.record_timing,
    };
    let mut reports = Vec::new();
    let outcome = train_run(&setup, |epoch, params| {
        if config.diagnostics.spectrum_epochs.contains(&epoch) {
            log::info!("flatness report at epoch {epoch}");
            let report = exp.flatness_report(params)?;
            write_report(&out.join(format!("flatness_{epoch}.json")), epoch, &report)?;
            reports.push((epoch, report));
        }
        Ok(())
    })?;

    write_metrics(&out.join("metrics.csv"), &outcome.rows)?;
    write_checkpoint(&out.join("params.bin"), &outcome.params)?;
    let final_lambda_max = if outcome.divergence.is_none() {
        for (i, request) in config.diagnostics.slices.iter().enumerate() {
            let slice = exp.slice(&outcome.params, request)?;
            write_slice(&out.join(format!("slice_{i}_{}d.csv", request.dim)), &slice)?;
        }
        Some(exp.lambda_max(&outcome.params)?)
    } else {
        None
    };

    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        status: if outcome.divergence.is_some() { "diverged" } else { "ok" },
        divergence: outcome.divergence.as_deref(),
        config,
        resolved: Resolved {
            train_rows: exp.train.len(),
            test_rows: exp.test.as_ref().map_or(0, Dataset::len),
            param_count: exp.param_count(),
            iters_per_epoch: setup.iters_per_epoch(),
            gam_iters_per_epoch: setup.gam_iters_per_epoch(),
            hyper: setup.resolved_hyper(),
            diagnostics_rho: config.diagnostics_rho(),
        },
        final_lambda_max,
    };
    write_json(&out.join("manifest.json"), &manifest)?;

    Ok(RunSummary {
        rows: outcome.rows,
        params: outcome.params,
        divergence: outcome.divergence,
        reports,
        final_lambda_max,
        output_dir: out,
    })
}
