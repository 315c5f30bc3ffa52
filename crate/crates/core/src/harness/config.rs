//! Declarative run configuration (JSON).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::{ProbeConfig, SliceSpec, SpectrumSettings};
use crate::error::{Error, Result};
use crate::models::{Activation, Task};
use crate::optim::{Hyperparams, OptimizerKind, Schedule, DEFAULT_ALPHA, DEFAULT_RHO};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    /// Numeric features with one integer label column.
    Csv {
        path: PathBuf,
        label_col: usize,
        #[serde(default)]
        has_header: bool,
    },
    /// IDX image/label pair (unsigned-byte payloads).
    Idx {
        images_path: PathBuf,
        labels_path: PathBuf,
        #[serde(default)]
        subset_n: Option<usize>,
    },
    TwoMoons {
        n: usize,
        #[serde(default = "default_noise")]
        noise: f64,
    },
    GaussianBlobs {
        n: usize,
        k: usize,
        dim: usize,
        #[serde(default = "default_spread")]
        spread: f64,
    },
    /// Batch-independent diagonal quadratic; `diag` sorted descending.
    Quadratic {
        diag: Vec<f64>,
        #[serde(default)]
        dim: Option<usize>,
    },
}

fn default_noise() -> f64 {
    0.1
}

fn default_spread() -> f64 {
    1.0
}

impl DatasetSpec {
    /// Row count when known without reading files.
    pub fn known_len(&self) -> Option<usize> {
        match self {
            DatasetSpec::TwoMoons { n, .. } | DatasetSpec::GaussianBlobs { n, .. } => Some(*n),
            DatasetSpec::Idx { subset_n, .. } => *subset_n,
            DatasetSpec::Quadratic { .. } => Some(1),
            DatasetSpec::Csv { .. } => None,
        }
    }

    pub fn is_quadratic(&self) -> bool {
        matches!(self, DatasetSpec::Quadratic { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Mlp {
        hidden: Vec<usize>,
        #[serde(default)]
        activation: Activation,
        #[serde(default = "default_init_scale")]
        init_scale: f64,
        #[serde(default)]
        task: Task,
    },
    /// Start point drawn uniformly from `center ± init_scale`.
    Quadratic {
        #[serde(default = "default_init_scale")]
        init_scale: f64,
    },
}

fn default_init_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_xi")]
    pub xi: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default)]
    pub weight_decay: f64,
    #[serde(default = "default_ratio")]
    pub gam_apply_ratio: f64,
    /// `{"kind": "cosine", "total": 0}` resolves `total` to the run length.
    #[serde(default = "default_lr_schedule")]
    pub lr_schedule: Schedule,
    #[serde(default = "default_rho_schedule")]
    pub rho_schedule: Schedule,
}

fn default_lr() -> f64 {
    Hyperparams::default().eta0
}
fn default_rho() -> f64 {
    DEFAULT_RHO
}
fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}
fn default_xi() -> f64 {
    Hyperparams::default().xi
}
fn default_momentum() -> f64 {
    Hyperparams::default().momentum
}
fn default_ratio() -> f64 {
    1.0
}
fn default_lr_schedule() -> Schedule {
    Hyperparams::default().lr_schedule
}
fn default_rho_schedule() -> Schedule {
    Hyperparams::default().rho_schedule
}

impl OptimizerConfig {
    pub fn new(kind: OptimizerKind) -> Self {
        let h = Hyperparams::default();
        OptimizerConfig {
            kind,
            lr: h.eta0,
            rho: h.rho0,
            alpha: h.alpha,
            xi: h.xi,
            momentum: h.momentum,
            weight_decay: h.weight_decay,
            gam_apply_ratio: h.gam_apply_ratio,
            lr_schedule: h.lr_schedule,
            rho_schedule: h.rho_schedule,
        }
    }

    pub fn hyper(&self) -> Hyperparams {
        Hyperparams {
            eta0: self.lr,
            rho0: self.rho,
            alpha: self.alpha,
            xi: self.xi,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
            gam_apply_ratio: self.gam_apply_ratio,
            lr_schedule: self.lr_schedule,
            rho_schedule: self.rho_schedule,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceRequest {
    /// 1 or 2.
    pub dim: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub grid: SliceSpec,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsConfig {
    /// Radius for flatness estimates; `None` uses the optimizer's `rho`.
    pub rho: Option<f64>,
    pub probe: ProbeConfig,
    pub spectrum: SpectrumSettings,
    /// 1-based epochs after which a flatness report is written.
    pub spectrum_epochs: Vec<usize>,
    /// Slices computed at the final parameters.
    pub slices: Vec<SliceRequest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSpec,
    pub model: ModelConfig,
    pub optimizer: OptimizerConfig,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    /// Held-out fraction for test accuracy (ignored for quadratics).
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_epochs() -> usize {
    10
}
fn default_batch_size() -> usize {
    32
}
fn default_test_fraction() -> f64 {
    0.2
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("runs/latest")
}

/// Training rows after holding out the test fraction.
pub fn train_len(n: usize, test_fraction: f64) -> usize {
    n - (n as f64 * test_fraction).floor() as usize
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Pretty JSON with every field explicit.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn diagnostics_rho(&self) -> f64 {
        self.diagnostics.rho.unwrap_or(if self.optimizer.rho > 0.0 {
            self.optimizer.rho
        } else {
            DEFAULT_RHO
        })
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    /// Every invariant violation, each naming its field.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let missing = |v: &mut Vec<String>, field: &str, p: &Path| {
            if !p.exists() {
                v.push(format!("{field}: path {} does not exist", p.display()));
            }
        };
        match &self.dataset {
            DatasetSpec::Csv { path, .. } => missing(&mut v, "dataset.path", path),
            DatasetSpec::Idx {
                images_path,
                labels_path,
                subset_n,
            } => {
                missing(&mut v, "dataset.images_path", images_path);
                missing(&mut v, "dataset.labels_path", labels_path);
                if *subset_n == Some(0) {
                    v.push("dataset.subset_n must be positive".to_string());
                }
            }
            DatasetSpec::TwoMoons { n, noise } => {
                if *n < 2 {
                    v.push(format!("dataset.n must be at least 2 (got {n})"));
                }
                if !(*noise >= 0.0 && noise.is_finite()) {
                    v.push(format!("dataset.noise must be non-negative (got {noise})"));
                }
            }
            DatasetSpec::GaussianBlobs { n, k, dim, spread } => {
                if *k < 2 || *n < *k {
                    v.push(format!("dataset.k must be in 2..=n (got k = {k}, n = {n})"));
                }
                if *dim == 0 {
                    v.push("dataset.dim must be positive".to_string());
                }
                if !(*spread > 0.0 && spread.is_finite()) {
                    v.push(format!("dataset.spread must be positive (got {spread})"));
                }
            }
            DatasetSpec::Quadratic { diag, dim } => {
                if diag.is_empty() {
                    v.push("dataset.diag must be non-empty".to_string());
                }
                if diag.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
                    v.push("dataset.diag entries must be positive".to_string());
                }
                if diag.windows(2).any(|w| w[0] < w[1]) {
                    v.push("dataset.diag must be sorted descending".to_string());
                }
                if let Some(d) = dim {
                    if *d != diag.len() {
                        v.push(format!(
                            "dataset.dim = {d} does not match {} diag entries",
                            diag.len()
                        ));
                    }
                }
            }
        }
        match (&self.model, self.dataset.is_quadratic()) {
            (ModelConfig::Quadratic { init_scale }, true) => {
                if !(*init_scale >= 0.0 && init_scale.is_finite()) {
                    v.push("model.init_scale must be non-negative".to_string());
                }
            }
            (ModelConfig::Mlp { hidden, init_scale, .. }, false) => {
                if hidden.is_empty() || hidden.contains(&0) {
                    v.push("model.hidden must list at least one positive width".to_string());
                }
                if !(*init_scale > 0.0 && init_scale.is_finite()) {
                    v.push("model.init_scale must be positive".to_string());
                }
            }
            (ModelConfig::Quadratic { .. }, false) => {
                v.push("model.kind = quadratic requires dataset.kind = quadratic".to_string())
            }
            (ModelConfig::Mlp { .. }, true) => {
                v.push("dataset.kind = quadratic requires model.kind = quadratic".to_string())
            }
        }
        v.extend(self.optimizer.hyper().violations());
        if self.epochs == 0 {
            v.push("epochs must be positive".to_string());
        }
        if self.batch_size == 0 {
            v.push("batch_size must be positive".to_string());
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            v.push(format!("test_fraction must be in [0, 1) (got {})", self.test_fraction));
        }
        if let Some(n) = self.dataset.known_len() {
            let train = if self.dataset.is_quadratic() {
                n
            } else {
                train_len(n, self.test_fraction)
            };
            if self.batch_size > train {
                v.push(format!(
                    "batch_size = {} exceeds the {train} training rows",
                    self.batch_size
                ));
            }
        }
        if let Some(rho) = self.diagnostics.rho {
            if !(rho > 0.0 && rho.is_finite()) {
                v.push(format!("diagnostics.rho must be positive (got {rho})"));
            }
        }
        v.extend(
            self.diagnostics
                .probe
                .violations()
                .into_iter()
                .map(|m| format!("diagnostics.{m}")),
        );
        let s = &self.diagnostics.spectrum;
        if s.top_k == 0 || s.power_iters == 0 {
            v.push("diagnostics.spectrum.top_k and power_iters must be positive".to_string());
        }
        if s.trace_probes < 2 {
            v.push("diagnostics.spectrum.trace_probes must be at least 2".to_string());
        }
        for &e in &self.diagnostics.spectrum_epochs {
            if e == 0 || e > self.epochs {
                v.push(format!(
                    "diagnostics.spectrum_epochs entry {e} outside 1..={}",
                    self.epochs
                ));
            }
        }
        for (i, s) in self.diagnostics.slices.iter().enumerate() {
            if !(s.dim == 1 || s.dim == 2) {
                v.push(format!("diagnostics.slices[{i}].dim must be 1 or 2"));
            }
            if s.grid.points < 3 || s.grid.points.is_multiple_of(2) {
                v.push(format!("diagnostics.slices[{i}].grid.points must be odd and >= 3"));
            }
        }
        v
    }
}

/// Reads, parses and validates a configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RunConfig::from_json(&text)
}
