//! Synthetic benchmark datasets and their CSV form.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_for, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

/// Feature matrix with hidden ground-truth labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub split: Split,
    input_dim: usize,
    classes: usize,
    /// Row-major `len() x input_dim`.
    features: Vec<f64>,
    true_labels: Vec<usize>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        split: Split,
        input_dim: usize,
        classes: usize,
        features: Vec<f64>,
        true_labels: Vec<usize>,
    ) -> Result<Self> {
        let n = true_labels.len();
        if n == 0 {
            return Err(Error::Empty("dataset"));
        }
        if input_dim == 0 || features.len() != n * input_dim {
            return Err(Error::DimensionMismatch {
                what: "feature matrix",
                expected: n * input_dim,
                got: features.len(),
            });
        }
        if let Some(&bad) = true_labels.iter().find(|&&l| l >= classes) {
            return Err(Error::invalid(format!(
                "label {bad} out of range for {classes} classes"
            )));
        }
        if !features.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("dataset features".into()));
        }
        Ok(Dataset {
            name: name.into(),
            split,
            input_dim,
            classes,
            features,
            true_labels,
        })
    }

    pub fn len(&self) -> usize {
        self.true_labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.true_labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.features.chunks_exact(self.input_dim)
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    /// Ground truth for evaluation code. Selection never calls this.
    pub fn true_labels(&self) -> &[usize] {
        &self.true_labels
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &l in &self.true_labels {
            counts[l] += 1;
        }
        counts
    }

    /// Content hash over shape, features (bit patterns) and labels.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update((self.input_dim as u64).to_le_bytes());
        h.update((self.classes as u64).to_le_bytes());
        for v in &self.features {
            h.update(v.to_bits().to_le_bytes());
        }
        for &l in &self.true_labels {
            h.update((l as u64).to_le_bytes());
        }
        h.finalize().iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    pub fn subset(&self, indices: &[usize], split: Split) -> Result<Dataset> {
        let mut features = Vec::with_capacity(indices.len() * self.input_dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::IndexOutOfRange {
                    idx: i,
                    len: self.len(),
                });
            }
            features.extend_from_slice(self.row(i));
            labels.push(self.true_labels[i]);
        }
        Dataset::new(
            self.name.clone(),
            split,
            self.input_dim,
            self.classes,
            features,
            labels,
        )
    }

    /// Shuffles once and cuts into disjoint train and test parts.
    pub fn split(&self, n_train: usize, seed: u64) -> Result<(Dataset, Dataset)> {
        if n_train == 0 || n_train >= self.len() {
            return Err(Error::invalid(format!(
                "n_train must lie in [1, {}), got {n_train}",
                self.len()
            )));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut rng_for(seed, Domain::Split, 0));
        let train = self.subset(&order[..n_train], Split::Train)?;
        let test = self.subset(&order[n_train..], Split::Test)?;
        Ok((train, test))
    }

    /// Copy with every feature column shifted to zero mean and scaled to
    /// unit (population) variance. Constant columns are only centered.
    pub fn standardized(&self) -> Dataset {
        let mut out = self.clone();
        standardize(&mut out.features, self.input_dim);
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for d in 0..self.input_dim {
            let _ = write!(out, "f{d},");
        }
        out.push_str("label\n");
        for (row, label) in self.rows().zip(&self.true_labels) {
            for v in row {
                out.push_str(&fmt_f64(*v));
                out.push(',');
            }
            let _ = writeln!(out, "{label}");
        }
        out
    }

    /// Parses the `f0,...,fD,label` layout. The class count is the larger of
    /// `classes` (if given) and `max label + 1`.
    pub fn from_csv(
        name: &str,
        split: Split,
        text: &str,
        classes: Option<usize>,
    ) -> Result<Dataset> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(Error::Empty("CSV input"))?;
        let cols: Vec<&str> = header.split(',').collect();
        let dim = cols.len().saturating_sub(1);
        let header_ok = cols.last() == Some(&"label")
            && cols[..dim]
                .iter()
                .enumerate()
                .all(|(i, c)| *c == format!("f{i}"));
        if dim == 0 || !header_ok {
            return Err(Error::Parse {
                location: "line 1".into(),
                message: format!("expected header `f0,...,fD,label`, got `{header}`"),
            });
        }
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let bad = |message: String| Error::Parse {
                location: format!("line {}", lineno + 2),
                message,
            };
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != dim + 1 {
                return Err(bad(format!(
                    "expected {} fields, got {}",
                    dim + 1,
                    fields.len()
                )));
            }
            for f in &fields[..dim] {
                features.push(f.parse::<f64>().map_err(|e| bad(format!("`{f}`: {e}")))?);
            }
            let l = fields[dim];
            labels.push(
                l.parse::<usize>()
                    .map_err(|e| bad(format!("label `{l}`: {e}")))?,
            );
        }
        let max_label = labels.iter().copied().max().unwrap_or(0);
        let classes = classes.unwrap_or(0).max(max_label + 1);
        Dataset::new(name, split, dim, classes, features, labels)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read_csv(path: &Path, split: Split, classes: Option<usize>) -> Result<Dataset> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("dataset");
        Dataset::from_csv(name, split, &std::fs::read_to_string(path)?, classes)
    }
}

/// Scientific notation with 17 significant digits; round-trips exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// The labeling oracle: reveals the ground-truth label of one sample.
pub fn oracle_label(ds: &Dataset, idx: usize) -> Result<usize> {
    ds.true_labels
        .get(idx)
        .copied()
        .ok_or(Error::IndexOutOfRange { idx, len: ds.len() })
}

/// Raw two-moons points before standardization.
pub fn two_moons_raw(n: usize, noise_sigma: f64, seed: u64) -> Result<(Vec<[f64; 2]>, Vec<usize>)> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "two_moons needs an even n >= 2, got {n}"
        )));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::invalid("noise_sigma must be finite and >= 0"));
    }
    let mut rng = rng_for(seed, Domain::Dataset, 0);
    let half = n / 2;
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let t = std::f64::consts::PI * rng.gen::<f64>();
        let (label, x, y) = if i < half {
            (0, t.cos(), t.sin())
        } else {
            (1, 1.0 - t.cos(), 0.5 - t.sin())
        };
        let nx: f64 = StandardNormal.sample(&mut rng);
        let ny: f64 = StandardNormal.sample(&mut rng);
        points.push([x + noise_sigma * nx, y + noise_sigma * ny]);
        labels.push(label);
    }
    Ok((points, labels))
}

/// Two interleaving half circles, standardized per dimension.
pub fn gen_two_moons(n: usize, noise_sigma: f64, seed: u64) -> Result<Dataset> {
    let (points, labels) = two_moons_raw(n, noise_sigma, seed)?;
    let mut features: Vec<f64> = points.iter().flatten().copied().collect();
    standardize(&mut features, 2);
    Dataset::new("two_moons", Split::Train, 2, 2, features, labels)
}

fn standardize(features: &mut [f64], dim: usize) {
    let n = (features.len() / dim) as f64;
    for d in 0..dim {
        let mean = features.iter().skip(d).step_by(dim).sum::<f64>() / n;
        let var = features
            .iter()
            .skip(d)
            .step_by(dim)
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / n;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        for v in features.iter_mut().skip(d).step_by(dim) {
            *v = (*v - mean) / sd;
        }
    }
}

/// Side of the box from which blob centers are drawn.
pub const BLOB_CENTER_BOX: f64 = 10.0;

/// `classes` isotropic 2-D Gaussian clusters. Sample `i` belongs to class
/// `i % classes`, so class counts differ by at most one.
pub fn gen_blobs(
    n: usize,
    classes: usize,
    centers_seed: u64,
    spread: f64,
    seed: u64,
) -> Result<Dataset> {
    if classes < 2 {
        return Err(Error::invalid("blobs need at least 2 classes"));
    }
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    if !(spread >= 0.0 && spread.is_finite()) {
        return Err(Error::invalid("spread must be finite and >= 0"));
    }
    let centers = blob_centers(classes, centers_seed);
    let mut rng = rng_for(seed, Domain::Dataset, 0);
    let mut features = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % classes;
        for center in centers[c] {
            let z: f64 = StandardNormal.sample(&mut rng);
            features.push(center + spread * z);
        }
        labels.push(c);
    }
    Dataset::new("blobs", Split::Train, 2, classes, features, labels)
}

pub fn blob_centers(classes: usize, centers_seed: u64) -> Vec<[f64; 2]> {
    let mut rng = rng_for(centers_seed, Domain::DatasetCenters, 0);
    (0..classes)
        .map(|_| {
            [
                rng.gen_range(-BLOB_CENTER_BOX..BLOB_CENTER_BOX),
                rng.gen_range(-BLOB_CENTER_BOX..BLOB_CENTER_BOX),
            ]
        })
        .collect()
}

/// Number of distinct grid templates available to [`gen_grid_patterns`].
pub const GRID_TEMPLATES: usize = 8;

/// Binary template `class` on a `g x g` grid, flattened row-major. Every
/// template is left-right symmetric so a horizontal flip never turns one
/// class into another.
pub fn grid_template(class: usize, g: usize) -> Vec<f64> {
    let mut t = vec![0.0; g * g];
    let mut on = |r: usize, c: usize| t[r * g + c] = 1.0;
    let mid_lo = (g - 1) / 2;
    let mid_hi = g / 2;
    match class {
        // horizontal bar
        0 => (0..g).for_each(|c| {
            on(mid_lo, c);
            on(mid_hi, c);
        }),
        // vertical bar
        1 => (0..g).for_each(|r| {
            on(r, mid_lo);
            on(r, mid_hi);
        }),
        // X
        2 => (0..g).for_each(|i| {
            on(i, i);
            on(i, g - 1 - i);
        }),
        // border
        3 => (0..g).for_each(|i| {
            on(0, i);
            on(g - 1, i);
            on(i, 0);
            on(i, g - 1);
        }),
        // central block
        4 => {
            for r in g / 4..g - g / 4 {
                for c in g / 4..g - g / 4 {
                    on(r, c);
                }
            }
        }
        // T
        5 => (0..g).for_each(|i| {
            on(0, i);
            on(i, mid_lo);
            on(i, mid_hi);
        }),
        // U
        6 => (0..g).for_each(|i| {
            on(i, 0);
            on(i, g - 1);
            on(g - 1, i);
        }),
        // H
        7 => (0..g).for_each(|i| {
            on(i, 0);
            on(i, g - 1);
            on(mid_lo, i);
            on(mid_hi, i);
        }),
        _ => panic!("no grid template {class}"),
    }
    t
}

/// Image-like data: one binary template per class plus Gaussian pixel noise.
pub fn gen_grid_patterns(
    n: usize,
    classes: usize,
    grid_dim: usize,
    noise: f64,
    seed: u64,
) -> Result<Dataset> {
    if grid_dim < 4 {
        return Err(Error::invalid("grid_dim must be >= 4"));
    }
    if !(2..=GRID_TEMPLATES).contains(&classes) {
        return Err(Error::invalid(format!(
            "grid patterns support 2..={GRID_TEMPLATES} classes, got {classes}"
        )));
    }
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::invalid("noise must be finite and >= 0"));
    }
    let templates: Vec<Vec<f64>> = (0..classes).map(|c| grid_template(c, grid_dim)).collect();
    let mut rng = rng_for(seed, Domain::Dataset, 0);
    let mut features = Vec::with_capacity(n * grid_dim * grid_dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % classes;
        for &v in &templates[c] {
            let z: f64 = StandardNormal.sample(&mut rng);
            features.push(v + noise * z);
        }
        labels.push(c);
    }
    Dataset::new(
        "grid_patterns",
        Split::Train,
        grid_dim * grid_dim,
        classes,
        features,
        labels,
    )
}
