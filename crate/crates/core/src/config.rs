//! Experiment configuration as plain `key = value` text.
//!
//! A config file lists any subset of the keys in [`ExperimentConfig::KEYS`];
//! everything else takes its default. Command-line flags are applied on top
//! with the same keys, and [`ExperimentConfig::to_text`] writes the fully
//! resolved configuration back out.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::al::ALConfig;
use crate::data::{gen_blobs, gen_grid_patterns, gen_two_moons, Dataset, Split};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    TwoMoons,
    Blobs,
    GridPatterns,
    Csv,
}

impl DatasetKind {
    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::TwoMoons => "two_moons",
            DatasetKind::Blobs => "blobs",
            DatasetKind::GridPatterns => "grid_patterns",
            DatasetKind::Csv => "csv",
        }
    }
}

impl std::str::FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two_moons" => Ok(DatasetKind::TwoMoons),
            "blobs" => Ok(DatasetKind::Blobs),
            "grid_patterns" => Ok(DatasetKind::GridPatterns),
            "csv" => Ok(DatasetKind::Csv),
            other => Err(Error::invalid(format!(
                "unknown dataset kind `{other}` (expected two_moons, blobs, grid_patterns or csv)"
            ))),
        }
    }
}

/// Where the train/test pair comes from. Synthetic kinds generate
/// `n_train + n_test` samples with `data_seed` and split them; blobs are
/// standardized before the split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    pub n_train: usize,
    pub n_test: usize,
    pub noise: f64,
    pub classes: usize,
    pub centers_seed: u64,
    pub spread: f64,
    pub grid_dim: usize,
    pub data_seed: u64,
    pub train_path: Option<PathBuf>,
    pub test_path: Option<PathBuf>,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            kind: DatasetKind::TwoMoons,
            n_train: 500,
            n_test: 500,
            noise: 0.1,
            classes: 2,
            centers_seed: 7,
            spread: 1.0,
            grid_dim: 8,
            data_seed: 100,
            train_path: None,
            test_path: None,
        }
    }
}

impl DatasetSpec {
    /// Generates one unsplit synthetic dataset of `n` samples.
    pub fn generate(&self, n: usize) -> Result<Dataset> {
        match self.kind {
            DatasetKind::TwoMoons => gen_two_moons(n, self.noise, self.data_seed),
            DatasetKind::Blobs => Ok(gen_blobs(
                n,
                self.classes,
                self.centers_seed,
                self.spread,
                self.data_seed,
            )?
            .standardized()),
            DatasetKind::GridPatterns => {
                gen_grid_patterns(n, self.classes, self.grid_dim, self.noise, self.data_seed)
            }
            DatasetKind::Csv => Err(Error::invalid(
                "csv datasets are read from files, not generated",
            )),
        }
    }

    /// The (train, test) pair this spec describes.
    pub fn build(&self) -> Result<(Dataset, Dataset)> {
        match self.kind {
            DatasetKind::Csv => {
                let path = |p: &Option<PathBuf>, key: &str| {
                    p.clone().ok_or_else(|| {
                        Error::Config(vec![format!("dataset.kind = csv needs {key}")])
                    })
                };
                let classes = Some(self.classes);
                let train = Dataset::read_csv(
                    &path(&self.train_path, "dataset.train_path")?,
                    Split::Train,
                    classes,
                )?;
                let test = Dataset::read_csv(
                    &path(&self.test_path, "dataset.test_path")?,
                    Split::Test,
                    classes,
                )?;
                Ok((train, test))
            }
            _ => self
                .generate(self.n_train + self.n_test)?
                .split(self.n_train, self.data_seed),
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.kind != DatasetKind::Csv {
            if self.n_train == 0 {
                v.push("dataset.n_train must be >= 1".to_string());
            }
            if self.n_test == 0 {
                v.push("dataset.n_test must be >= 1".to_string());
            }
            if !(self.noise >= 0.0 && self.noise.is_finite()) {
                v.push(format!("dataset.noise must be >= 0, got {}", self.noise));
            }
        }
        if self.classes < 2 {
            v.push(format!(
                "dataset.classes must be >= 2, got {}",
                self.classes
            ));
        }
        match self.kind {
            DatasetKind::TwoMoons if self.classes != 2 => {
                v.push(format!(
                    "two_moons has 2 classes, got dataset.classes = {}",
                    self.classes
                ));
            }
            DatasetKind::Blobs if !(self.spread > 0.0 && self.spread.is_finite()) => {
                v.push(format!(
                    "dataset.spread must be positive, got {}",
                    self.spread
                ));
            }
            DatasetKind::GridPatterns => {
                if self.grid_dim < 4 {
                    v.push(format!(
                        "dataset.grid_dim must be >= 4, got {}",
                        self.grid_dim
                    ));
                }
                if self.classes > crate::data::GRID_TEMPLATES {
                    v.push(format!(
                        "grid_patterns supports at most {} classes, got {}",
                        crate::data::GRID_TEMPLATES,
                        self.classes
                    ));
                }
            }
            DatasetKind::Csv if self.train_path.is_none() || self.test_path.is_none() => {
                v.push(
                    "dataset.kind = csv needs dataset.train_path and dataset.test_path".to_string(),
                );
            }
            _ => {}
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub al: ALConfig,
    pub trials: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetSpec::default(),
            al: ALConfig::default(),
            trials: 5,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("invalid value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::invalid(format!(
            "invalid boolean `{value}` for `{key}`"
        ))),
    }
}

fn opt_path(p: &Option<PathBuf>) -> String {
    p.as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_default()
}

/// Splits config text into `(key, value)` pairs. Blank lines and lines
/// starting with `#` are skipped.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            location: format!("line {}", n + 1),
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Parse {
                location: format!("line {}", n + 1),
                message: "empty key".to_string(),
            });
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl ExperimentConfig {
    /// Every recognized key, in the order [`Self::to_text`] writes them.
    pub const KEYS: [&'static str; 39] = [
        "dataset.kind",
        "dataset.n_train",
        "dataset.n_test",
        "dataset.noise",
        "dataset.classes",
        "dataset.centers_seed",
        "dataset.spread",
        "dataset.grid_dim",
        "dataset.data_seed",
        "dataset.train_path",
        "dataset.test_path",
        "trials",
        "seed",
        "strategy",
        "start_size",
        "batch_size",
        "doubling",
        "cycles",
        "balanced_start",
        "epochs_per_cycle",
        "labeled_batch",
        "unlabeled_batch",
        "lr",
        "cosine_decay",
        "momentum",
        "warm_start",
        "hidden_dim",
        "activation",
        "init_scale",
        "prior",
        "timing",
        "loss.distance",
        "loss.unsup_weight",
        "loss.n_train_augs",
        "augment.kind",
        "augment.sigma",
        "augment.max_shift",
        "augment.flip",
        "augment.n_eval_augs",
    ];

    pub fn is_key(key: &str) -> bool {
        Self::KEYS.contains(&key)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let d = &mut self.dataset;
        let a = &mut self.al;
        match key {
            "dataset.kind" => d.kind = parse(key, value)?,
            "dataset.n_train" => d.n_train = parse(key, value)?,
            "dataset.n_test" => d.n_test = parse(key, value)?,
            "dataset.noise" => d.noise = parse(key, value)?,
            "dataset.classes" => d.classes = parse(key, value)?,
            "dataset.centers_seed" => d.centers_seed = parse(key, value)?,
            "dataset.spread" => d.spread = parse(key, value)?,
            "dataset.grid_dim" => d.grid_dim = parse(key, value)?,
            "dataset.data_seed" => d.data_seed = parse(key, value)?,
            "dataset.train_path" => {
                d.train_path = (!value.is_empty()).then(|| PathBuf::from(value))
            }
            "dataset.test_path" => d.test_path = (!value.is_empty()).then(|| PathBuf::from(value)),
            "trials" => self.trials = parse(key, value)?,
            "seed" => a.seed = parse(key, value)?,
            "strategy" => a.strategy = parse(key, value)?,
            "start_size" => a.start_size = parse(key, value)?,
            "batch_size" => a.batch_size = parse(key, value)?,
            "doubling" => a.doubling = parse_bool(key, value)?,
            "cycles" => a.cycles = parse(key, value)?,
            "balanced_start" => a.balanced_start = parse_bool(key, value)?,
            "epochs_per_cycle" => a.epochs_per_cycle = parse(key, value)?,
            "labeled_batch" => a.labeled_batch = parse(key, value)?,
            "unlabeled_batch" => a.unlabeled_batch = parse(key, value)?,
            "lr" => a.lr = parse(key, value)?,
            "cosine_decay" => a.cosine_decay = parse_bool(key, value)?,
            "momentum" => a.momentum = parse(key, value)?,
            "warm_start" => a.warm_start = parse_bool(key, value)?,
            "hidden_dim" => a.hidden_dim = parse(key, value)?,
            "activation" => a.activation = parse(key, value)?,
            "init_scale" => a.init_scale = parse(key, value)?,
            "prior" => a.prior = parse(key, value)?,
            "timing" => a.timing = parse_bool(key, value)?,
            "loss.distance" => a.loss.distance = parse(key, value)?,
            "loss.unsup_weight" => a.loss.unsup_weight = parse(key, value)?,
            "loss.n_train_augs" => a.loss.n_train_augs = parse(key, value)?,
            "augment.kind" => a.augment.kind = parse(key, value)?,
            "augment.sigma" => a.augment.sigma = parse(key, value)?,
            "augment.max_shift" => a.augment.max_shift = parse(key, value)?,
            "augment.flip" => a.augment.flip = parse_bool(key, value)?,
            "augment.n_eval_augs" => a.augment.n_eval_augs = parse(key, value)?,
            other => return Err(Error::invalid(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let d = &self.dataset;
        let a = &self.al;
        Some(match key {
            "dataset.kind" => d.kind.name().to_string(),
            "dataset.n_train" => d.n_train.to_string(),
            "dataset.n_test" => d.n_test.to_string(),
            "dataset.noise" => d.noise.to_string(),
            "dataset.classes" => d.classes.to_string(),
            "dataset.centers_seed" => d.centers_seed.to_string(),
            "dataset.spread" => d.spread.to_string(),
            "dataset.grid_dim" => d.grid_dim.to_string(),
            "dataset.data_seed" => d.data_seed.to_string(),
            "dataset.train_path" => opt_path(&d.train_path),
            "dataset.test_path" => opt_path(&d.test_path),
            "trials" => self.trials.to_string(),
            "seed" => a.seed.to_string(),
            "strategy" => a.strategy.name().to_string(),
            "start_size" => a.start_size.to_string(),
            "batch_size" => a.batch_size.to_string(),
            "doubling" => a.doubling.to_string(),
            "cycles" => a.cycles.to_string(),
            "balanced_start" => a.balanced_start.to_string(),
            "epochs_per_cycle" => a.epochs_per_cycle.to_string(),
            "labeled_batch" => a.labeled_batch.to_string(),
            "unlabeled_batch" => a.unlabeled_batch.to_string(),
            "lr" => a.lr.to_string(),
            "cosine_decay" => a.cosine_decay.to_string(),
            "momentum" => a.momentum.to_string(),
            "warm_start" => a.warm_start.to_string(),
            "hidden_dim" => a.hidden_dim.to_string(),
            "activation" => a.activation.name().to_string(),
            "init_scale" => a.init_scale.to_string(),
            "prior" => a.prior.name().to_string(),
            "timing" => a.timing.to_string(),
            "loss.distance" => a.loss.distance.name().to_string(),
            "loss.unsup_weight" => a.loss.unsup_weight.to_string(),
            "loss.n_train_augs" => a.loss.n_train_augs.to_string(),
            "augment.kind" => a.augment.kind.name().to_string(),
            "augment.sigma" => a.augment.sigma.to_string(),
            "augment.max_shift" => a.augment.max_shift.to_string(),
            "augment.flip" => a.augment.flip.to_string(),
            "augment.n_eval_augs" => a.augment.n_eval_augs.to_string(),
            _ => return None,
        })
    }

    /// Every key with its resolved value.
    pub fn entries(&self) -> Vec<(String, String)> {
        Self::KEYS
            .iter()
            .map(|k| (k.to_string(), self.get(k).expect("listed key")))
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// Applies `pairs` over the current values, failing on the first bad one.
    pub fn apply<K: AsRef<str>, V: AsRef<str>>(&mut self, pairs: &[(K, V)]) -> Result<()> {
        for (k, v) in pairs {
            self.set(k.as_ref(), v.as_ref())?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = ExperimentConfig::default();
        c.apply(&parse_pairs(text)?)?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    /// Every violated constraint across dataset, budget and training settings.
    pub fn violations(&self) -> Vec<String> {
        let mut v = self.dataset.violations();
        if self.trials == 0 {
            v.push("trials must be >= 1".to_string());
        }
        if self.dataset.kind == DatasetKind::Csv {
            v.extend(self.al.violations());
        } else {
            v.extend(
                self.al
                    .violations_for(self.dataset.n_train, self.dataset.classes),
            );
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }
}
