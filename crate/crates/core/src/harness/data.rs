//! Desk-scale datasets: two-moons, Gaussian blobs and IDX image files.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::config::{DatasetKind, DatasetSpec};
use super::idx::{read_idx, MAGIC_IMAGES, MAGIC_LABELS};
use super::rng::{stream, Purpose};
use super::{HarnessError, HarnessResult};
use crate::network::Matrix;

/// Feature rows with class-index labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<usize>,
    pub classes: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn features(&self) -> usize {
        self.x.cols
    }

    /// Rows `idx` in that order.
    pub fn gather(&self, idx: &[usize]) -> (Matrix, Vec<usize>) {
        let d = self.x.cols;
        let mut data = Vec::with_capacity(idx.len() * d);
        for &i in idx {
            data.extend_from_slice(self.x.row(i));
        }
        let y = idx.iter().map(|&i| self.y[i]).collect();
        (Matrix { rows: idx.len(), cols: d, data }, y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitData {
    pub train: Dataset,
    pub val: Dataset,
}

/// Builds or reads the dataset and splits it with a permutation drawn from
/// the dataset seed. Synthetic features are standardized with training-set
/// statistics; image pixels are scaled to `[0, 1]`.
pub fn load_dataset(spec: &DatasetSpec, val_fraction: f64) -> HarnessResult<SplitData> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(HarnessError::Config(format!("val_fraction = {val_fraction} is outside (0, 1)")));
    }
    let mut rng = stream(spec.seed, Purpose::Data);
    let (full, standardize) = match spec.kind {
        DatasetKind::Moons => (
            moons(spec.samples.unwrap_or(600), spec.noise.unwrap_or(0.2), &mut rng)?,
            true,
        ),
        DatasetKind::Blobs => (
            blobs(
                spec.samples.unwrap_or(600),
                spec.classes.unwrap_or(2),
                spec.features.unwrap_or(2),
                spec.cluster_std.unwrap_or(1.0),
                &mut rng,
            )?,
            true,
        ),
        DatasetKind::Idx => (idx_images(spec)?, false),
    };
    let n = full.len();
    if n < 2 {
        return Err(HarnessError::Runtime(format!("dataset has {n} samples; need at least 2 to split")));
    }
    let n_val = ((n as f64 * val_fraction).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let (vx, vy) = full.gather(&order[..n_val]);
    let (tx, ty) = full.gather(&order[n_val..]);
    let mut split = SplitData {
        train: Dataset { x: tx, y: ty, classes: full.classes },
        val: Dataset { x: vx, y: vy, classes: full.classes },
    };
    if standardize {
        standardize_with_train_stats(&mut split);
    }
    Ok(split)
}

/// Two interleaved half circles, as in scikit-learn's `make_moons`.
fn moons<R: Rng>(n: usize, noise: f64, rng: &mut R) -> HarnessResult<Dataset> {
    if n < 2 {
        return Err(HarnessError::Runtime("moons needs at least 2 samples".into()));
    }
    let n_outer = n / 2;
    let n_inner = n - n_outer;
    let gauss = Normal::new(0.0, noise).map_err(|e| HarnessError::Config(e.to_string()))?;
    let mut data = Vec::with_capacity(2 * n);
    let mut y = Vec::with_capacity(n);
    let angle = |k: usize, m: usize| {
        if m > 1 {
            std::f64::consts::PI * k as f64 / (m - 1) as f64
        } else {
            0.0
        }
    };
    for k in 0..n_outer {
        let a = angle(k, n_outer);
        data.extend_from_slice(&[a.cos(), a.sin()]);
        y.push(0);
    }
    for k in 0..n_inner {
        let a = angle(k, n_inner);
        data.extend_from_slice(&[1.0 - a.cos(), 0.5 - a.sin()]);
        y.push(1);
    }
    if noise > 0.0 {
        for v in &mut data {
            *v += gauss.sample(rng);
        }
    }
    Ok(Dataset {
        x: Matrix { rows: n, cols: 2, data },
        y,
        classes: 2,
    })
}

/// Isotropic Gaussian clusters with centers drawn uniformly from
/// `[-10, 10]^features`. Samples are dealt to clusters as evenly as possible.
fn blobs<R: Rng>(n: usize, classes: usize, features: usize, std: f64, rng: &mut R) -> HarnessResult<Dataset> {
    if n == 0 || classes == 0 || features == 0 {
        return Err(HarnessError::Runtime("blobs needs positive samples, classes and features".into()));
    }
    let centers: Vec<f64> = (0..classes * features).map(|_| rng.random_range(-10.0..10.0)).collect();
    let gauss = Normal::new(0.0, std).map_err(|e| HarnessError::Config(e.to_string()))?;
    let mut data = Vec::with_capacity(n * features);
    let mut y = Vec::with_capacity(n);
    for k in 0..classes {
        let count = n / classes + usize::from(k < n % classes);
        let c = &centers[k * features..(k + 1) * features];
        for _ in 0..count {
            data.extend(c.iter().map(|&m| m + gauss.sample(rng)));
            y.push(k);
        }
    }
    Ok(Dataset {
        x: Matrix { rows: n, cols: features, data },
        y,
        classes,
    })
}

fn idx_images(spec: &DatasetSpec) -> HarnessResult<Dataset> {
    let (Some(ipath), Some(lpath)) = (&spec.images, &spec.labels) else {
        return Err(HarnessError::Config("idx datasets need images and labels".into()));
    };
    let images = read_idx(ipath, MAGIC_IMAGES)?;
    let labels = read_idx(lpath, MAGIC_LABELS)?;
    if images.len() != labels.len() {
        return Err(HarnessError::Format {
            path: lpath.clone(),
            message: format!("{} labels for {} images", labels.len(), images.len()),
        });
    }
    if images.is_empty() || images.item_size() == 0 {
        return Err(HarnessError::Format {
            path: ipath.clone(),
            message: "no image data".into(),
        });
    }
    let n = spec.samples.map_or(images.len(), |s| s.min(images.len()));
    let d = images.item_size();
    let data = images.data[..n * d].iter().map(|&p| p as f64 / 255.0).collect();
    let y: Vec<usize> = labels.data[..n].iter().map(|&l| l as usize).collect();
    let classes = y.iter().max().map_or(0, |m| m + 1);
    Ok(Dataset {
        x: Matrix { rows: n, cols: d, data },
        y,
        classes,
    })
}

fn standardize_with_train_stats(split: &mut SplitData) {
    let d = split.train.features();
    let n = split.train.len() as f64;
    for j in 0..d {
        let col = split.train.x.data.iter().skip(j).step_by(d);
        let mean = col.clone().sum::<f64>() / n;
        let var = col.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        for ds in [&mut split.train, &mut split.val] {
            for i in 0..ds.len() {
                let v = &mut ds.x.data[i * d + j];
                *v = (*v - mean) / sd;
            }
        }
    }
}
