//! Dataset loaders: CSV, IDX and seeded synthetic generators.

use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::config::{train_len, DatasetSpec};
use super::idx::read_idx;
use crate::data::{Dataset, Targets};
use crate::error::{Error, Result};

/// Loads the full dataset described by `spec`; `seed` drives synthetic generators.
pub fn load_dataset(spec: &DatasetSpec, seed: u64) -> Result<Dataset> {
    match spec {
        DatasetSpec::Csv {
            path,
            label_col,
            has_header,
        } => load_csv(path, *label_col, *has_header),
        DatasetSpec::Idx {
            images_path,
            labels_path,
            subset_n,
        } => load_idx(images_path, labels_path, *subset_n),
        DatasetSpec::TwoMoons { n, noise } => two_moons(*n, *noise, seed),
        DatasetSpec::GaussianBlobs { n, k, dim, spread } => {
            gaussian_blobs(*n, *k, *dim, *spread, seed)
        }
        DatasetSpec::Quadratic { .. } => Ok(Dataset::placeholder()),
    }
}

/// Shuffles rows with `seed` and holds out `⌊n·test_fraction⌋` of them.
pub fn train_test_split(data: &Dataset, test_fraction: f64, seed: u64) -> (Dataset, Dataset) {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = train_len(data.len(), test_fraction);
    (data.select(&order[..n_train]), data.select(&order[n_train..]))
}

/// Numeric CSV; the label column holds non-negative integer class ids.
pub fn load_csv(path: &Path, label_col: usize, has_header: bool) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Dataset(format!("{}: {other:?}", path.display())),
        })?;
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(i + 1, |p| p.line() as usize);
        if label_col >= record.len() {
            return Err(Error::Dataset(format!(
                "row {line}: label column {label_col} missing ({} columns)",
                record.len()
            )));
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::Dataset(format!(
                    "row {line}: expected {w} columns, found {}",
                    record.len()
                )))
            }
            _ => {}
        }
        for (col, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            if col == label_col {
                let label = cell.parse::<usize>().map_err(|_| {
                    Error::Dataset(format!(
                        "row {line}, column {col}: label {cell:?} is not a non-negative integer"
                    ))
                })?;
                labels.push(label);
            } else {
                let value = cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    Error::Dataset(format!("row {line}, column {col}: {cell:?} is not a finite number"))
                })?;
                inputs.push(value);
            }
        }
    }
    let Some(width) = width else {
        return Err(Error::Dataset(format!("{}: no data rows", path.display())));
    };
    let classes = labels.iter().max().map_or(0, |m| m + 1).max(2);
    Dataset::new(inputs, width - 1, Targets::Labels { labels, classes })
}

/// IDX image tensor (pixels scaled by 1/255, flattened per image) and labels.
pub fn load_idx(images: &Path, labels: &Path, subset_n: Option<usize>) -> Result<Dataset> {
    let img = read_idx(images)?;
    let lab = read_idx(labels)?;
    if img.dims.len() < 2 {
        return Err(Error::Dataset(format!(
            "{}: image file needs at least 2 dimensions, found {}",
            images.display(),
            img.dims.len()
        )));
    }
    if lab.dims.len() != 1 {
        return Err(Error::Dataset(format!(
            "{}: label file must be 1-dimensional, found {}",
            labels.display(),
            lab.dims.len()
        )));
    }
    let n = img.dims[0];
    if lab.dims[0] != n {
        return Err(Error::Dataset(format!(
            "{n} images but {} labels",
            lab.dims[0]
        )));
    }
    let keep = subset_n.map_or(n, |s| s.min(n));
    let width: usize = img.dims[1..].iter().product();
    let classes = lab.data.iter().max().map_or(0, |&m| m as usize + 1).max(2);
    let inputs = img.data[..keep * width]
        .iter()
        .map(|&p| f64::from(p) / 255.0)
        .collect();
    let labels = lab.data[..keep].iter().map(|&l| l as usize).collect();
    Dataset::new(inputs, width, Targets::Labels { labels, classes })
}

/// Two interleaved half circles with Gaussian noise; labels 0 (upper) and 1.
pub fn two_moons(n: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if n < 2 || !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::invalid(format!(
            "two_moons needs n >= 2 and noise >= 0 (got {n}, {noise})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_upper = n / 2;
    let n_lower = n - n_upper;
    let mut inputs = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    let arc = |i: usize, m: usize| if m > 1 { PI * i as f64 / (m - 1) as f64 } else { 0.0 };
    for i in 0..n_upper {
        let t = arc(i, n_upper);
        inputs.extend([t.cos(), t.sin()]);
        labels.push(0);
    }
    for i in 0..n_lower {
        let t = arc(i, n_lower);
        inputs.extend([1.0 - t.cos(), 0.5 - t.sin()]);
        labels.push(1);
    }
    for v in &mut inputs {
        let z: f64 = rng.sample(StandardNormal);
        *v += noise * z;
    }
    Dataset::new(inputs, 2, Targets::Labels { labels, classes: 2 })
}

/// `k` isotropic Gaussian clusters with centers uniform in `[-5, 5]^dim`;
/// row `i` belongs to cluster `i mod k`.
pub fn gaussian_blobs(n: usize, k: usize, dim: usize, spread: f64, seed: u64) -> Result<Dataset> {
    if k < 2 || n < k || dim == 0 || !(spread > 0.0 && spread.is_finite()) {
        return Err(Error::invalid(format!(
            "gaussian_blobs needs 2 <= k <= n, dim > 0, spread > 0 (got n={n}, k={k}, dim={dim}, spread={spread})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<f64> = (0..k * dim).map(|_| rng.random_range(-5.0..5.0)).collect();
    let mut inputs = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % k;
        for j in 0..dim {
            let z: f64 = rng.sample(StandardNormal);
            inputs.push(centers[c * dim + j] + spread * z);
        }
        labels.push(c);
    }
    Dataset::new(inputs, dim, Targets::Labels { labels, classes: k })
}
