//! Grid sweeps over `(ρ, α)`.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::config::RunConfig;
use super::run::{derive_seed, run, RunOptions};
use crate::error::{Error, Result};

/// One grid cell's outcome; `status` is `ok`, `diverged` or `error: ...`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub cell: usize,
    pub rho: f64,
    pub alpha: f64,
    pub seed: u64,
    pub status: String,
    pub final_test_acc: Option<f64>,
    pub best_test_acc: Option<f64>,
    pub final_lambda_max: Option<f64>,
}

/// Seed for cell `index`, independent of every other cell.
pub fn cell_seed(base: u64, index: usize) -> u64 {
    derive_seed(base, index as u64)
}

/// Configuration for each cell, row-major over `rhos × alphas`; outputs go to
/// `<output_dir>/cell_<index>`.
pub fn sweep_configs(base: &RunConfig, rhos: &[f64], alphas: &[f64]) -> Result<Vec<RunConfig>> {
    if rhos.is_empty() || alphas.is_empty() {
        return Err(Error::Config(vec!["sweep grid must be non-empty".to_string()]));
    }
    let mut configs = Vec::with_capacity(rhos.len() * alphas.len());
    let mut violations = Vec::new();
    for &rho in rhos {
        for &alpha in alphas {
            let index = configs.len();
            let mut c = base.clone();
            c.optimizer.rho = rho;
            c.optimizer.alpha = alpha;
            c.seed = cell_seed(base.seed, index);
            c.output_dir = base.output_dir.join(format!("cell_{index:03}"));
            violations.extend(
                c.violations()
                    .into_iter()
                    .map(|m| format!("cell {index} (rho = {rho}, alpha = {alpha}): {m}")),
            );
            configs.push(c);
        }
    }
    if violations.is_empty() {
        Ok(configs)
    } else {
        Err(Error::Config(violations))
    }
}

/// Runs every cell concurrently and writes `sweep_summary.csv` in cell order.
pub fn sweep(base: &RunConfig, rhos: &[f64], alphas: &[f64], options: RunOptions) -> Result<Vec<SweepCell>> {
    let configs = sweep_configs(base, rhos, alphas)?;
    std::fs::create_dir_all(&base.output_dir).map_err(|e| Error::io(&base.output_dir, e))?;
    let cells: Vec<SweepCell> = configs
        .par_iter()
        .enumerate()
        .map(|(cell, c)| {
            let mut out = SweepCell {
                cell,
                rho: c.optimizer.rho,
                alpha: c.optimizer.alpha,
                seed: c.seed,
                status: "ok".to_string(),
                final_test_acc: None,
                best_test_acc: None,
                final_lambda_max: None,
            };
            match run(c, options) {
                Ok(s) => {
                    if s.divergence.is_some() {
                        out.status = "diverged".to_string();
                    }
                    out.final_test_acc = s.final_test_acc();
                    out.best_test_acc = s.best_test_acc();
                    out.final_lambda_max = s.final_lambda_max;
                }
                Err(e) => out.status = format!("error: {e}"),
            }
            out
        })
        .collect();
    write_summary(&base.output_dir.join("sweep_summary.csv"), &cells)?;
    Ok(cells)
}

pub fn write_summary(path: &Path, cells: &[SweepCell]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Dataset(format!("{}: {other:?}", path.display())),
    })?;
    for c in cells {
        w.serialize(c)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
