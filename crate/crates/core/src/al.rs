//! The label / select / retrain cycle.
//!
//! Each cycle trains on `L_l + unsup_weight * L_u`, where the supervised
//! term averages over mini-batches of the labeled pool and the consistency
//! term over mini-batches drawn with replacement from the unlabeled pool.
//! Selection then scores the unlabeled pool with the trained model, the
//! oracle labels the chosen batch, and the next cycle warm-starts from the
//! current weights.

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::{augment, AugmentationSpec};
use crate::coldstart::{al_target_loss, measure_cross_entropy, pred_marginal, PriorKind};
use crate::data::{fmt_f64, Dataset};
use crate::error::{Error, Result};
use crate::nn::{
    forward, init_params, sgd_step_in_place, total_loss_and_grad, Activation, AugmentedSample,
    LabeledSample, LossSpec, ModelParams, SgdState,
};
use crate::pool::{apply_selection, init_start_set, PoolState};
use crate::rng::{derive_seed, rng_for, Domain};
use crate::selection::{select_batch, Strategy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ALConfig {
    /// `K_0`.
    pub start_size: usize,
    /// `K`.
    pub batch_size: usize,
    /// After the first selection, each batch equals the current labeled
    /// count, doubling the total every cycle.
    pub doubling: bool,
    /// `T`, the number of selection cycles.
    pub cycles: usize,
    pub balanced_start: bool,
    pub epochs_per_cycle: usize,
    pub labeled_batch: usize,
    pub unlabeled_batch: usize,
    pub lr: f64,
    /// Cosine-anneal the learning rate from `lr` towards zero over each cycle.
    pub cosine_decay: bool,
    pub momentum: f64,
    pub seed: u64,
    pub strategy: Strategy,
    pub loss: LossSpec,
    pub augment: AugmentationSpec,
    pub warm_start: bool,
    pub hidden_dim: usize,
    pub activation: Activation,
    pub init_scale: f64,
    pub prior: PriorKind,
    /// Record wall-clock time per cycle. Off by default so that record files
    /// are reproducible byte for byte.
    pub timing: bool,
}

impl Default for ALConfig {
    fn default() -> Self {
        ALConfig {
            start_size: 10,
            batch_size: 10,
            doubling: false,
            cycles: 4,
            balanced_start: true,
            epochs_per_cycle: 200,
            labeled_batch: 32,
            unlabeled_batch: 64,
            lr: 0.1,
            cosine_decay: true,
            momentum: 0.9,
            seed: 0,
            strategy: Strategy::Consistency,
            loss: LossSpec::default(),
            augment: AugmentationSpec::default(),
            warm_start: true,
            hidden_dim: 32,
            activation: Activation::Tanh,
            init_scale: 0.5,
            prior: PriorKind::Uniform,
            timing: false,
        }
    }
}

impl ALConfig {
    /// Batch size used at each selection cycle `0..cycles`.
    pub fn batch_schedule(&self) -> Vec<usize> {
        let mut labeled = self.start_size;
        (0..self.cycles)
            .map(|t| {
                let k = if self.doubling && t > 0 {
                    labeled
                } else {
                    self.batch_size
                };
                labeled += k;
                k
            })
            .collect()
    }

    /// Labeled count after the full schedule.
    pub fn total_budget(&self) -> usize {
        self.start_size + self.batch_schedule().iter().sum::<usize>()
    }

    /// Every violated constraint, without a dataset.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.start_size == 0 {
            v.push("start_size must be >= 1".to_string());
        }
        if self.batch_size == 0 {
            v.push("batch_size must be >= 1".to_string());
        }
        if self.labeled_batch == 0 {
            v.push("labeled_batch must be >= 1".to_string());
        }
        if self.unlabeled_batch == 0 {
            v.push("unlabeled_batch must be >= 1".to_string());
        }
        if self.hidden_dim == 0 {
            v.push("hidden_dim must be >= 1".to_string());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            v.push(format!("lr must be positive, got {}", self.lr));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            v.push(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            ));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            v.push(format!("init_scale must be >= 0, got {}", self.init_scale));
        }
        if let Err(e) = self.loss.validate() {
            v.push(e.to_string());
        }
        if let Err(e) = self.augment.validate() {
            v.push(e.to_string());
        }
        v
    }

    /// Every violated constraint, including the labeling budget against a
    /// training set of `n` samples with `classes` classes.
    pub fn violations_for(&self, n: usize, classes: usize) -> Vec<String> {
        let mut v = self.violations();
        if self.start_size > n {
            v.push(format!(
                "start_size {} exceeds training set size {n}",
                self.start_size
            ));
        }
        if self.balanced_start && classes > 0 && !self.start_size.is_multiple_of(classes) {
            v.push(format!(
                "balanced start_size {} is not divisible by {classes} classes",
                self.start_size
            ));
        }
        if self.total_budget() > n {
            v.push(format!(
                "start_size plus all batches ({}) exceeds training set size {n}",
                self.total_budget()
            ));
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

    fn init(&self, ds: &Dataset) -> Result<ModelParams> {
        init_params(
            self.seed,
            ds.input_dim(),
            self.hidden_dim,
            ds.classes(),
            self.init_scale,
            self.activation,
        )
    }
}

/// One SSL training phase on the current pool.
///
/// Starts from `params` when `warm_start` is set, otherwise from a fresh
/// initialization. An epoch is `ceil(|D| / labeled_batch)` steps, i.e. one
/// pass-equivalent over the whole training pool; labeled mini-batches are
/// drawn from a stream over `L_t` that is reshuffled after every full pass,
/// so the step count never depends on how many labels exist or on the
/// consistency weight. `cycle` keys the mini-batch and augmentation streams.
pub fn train_cycle(
    params: &ModelParams,
    pool: &PoolState,
    ds: &Dataset,
    config: &ALConfig,
    cycle: usize,
) -> Result<ModelParams> {
    if pool.labeled.is_empty() {
        return Err(Error::Empty("labeled pool"));
    }
    config.validate()?;
    let mut params = if config.warm_start {
        params.clone()
    } else {
        config.init(ds)?
    };
    if config.epochs_per_cycle == 0 {
        return Ok(params);
    }
    let use_unlabeled = config.loss.unsup_weight > 0.0 && !pool.unlabeled.is_empty();
    let cycle = cycle as u64;
    let mut batch_rng = rng_for(config.seed, Domain::LabeledBatches, cycle);
    let mut unlabeled_rng = rng_for(config.seed, Domain::UnlabeledBatches, cycle);
    let mut aug_rng = rng_for(config.seed, Domain::TrainAugment, cycle);
    let mut state = SgdState::new(&params);
    let mut order: Vec<(usize, usize)> = pool.labeled.iter().map(|l| (l.idx, l.label)).collect();
    let mut cursor = order.len();
    let batch = config.labeled_batch.min(order.len());
    let steps = config.epochs_per_cycle * ds.len().div_ceil(config.labeled_batch);
    let mut labeled: Vec<LabeledSample<'_>> = Vec::with_capacity(batch);
    let mut unlabeled: Vec<AugmentedSample<'_>> = Vec::with_capacity(config.unlabeled_batch);

    for step in 0..steps {
        labeled.clear();
        while labeled.len() < batch {
            if cursor == order.len() {
                order.shuffle(&mut batch_rng);
                cursor = 0;
            }
            let (idx, label) = order[cursor];
            cursor += 1;
            labeled.push(LabeledSample {
                x: ds.row(idx),
                label,
            });
        }
        unlabeled.clear();
        if use_unlabeled {
            for _ in 0..config.unlabeled_batch {
                let idx = pool.unlabeled[unlabeled_rng.gen_range(0..pool.unlabeled.len())];
                let x = ds.row(idx);
                let augs = (0..config.loss.n_train_augs)
                    .map(|_| augment(x, &config.augment, &mut aug_rng))
                    .collect::<Result<Vec<_>>>()?;
                unlabeled.push(AugmentedSample { x, augs });
            }
        }
        let (_, grad) = total_loss_and_grad(&params, &labeled, &unlabeled, &config.loss)?;
        let lr = if config.cosine_decay {
            0.5 * config.lr * (1.0 + (std::f64::consts::PI * step as f64 / steps as f64).cos())
        } else {
            config.lr
        };
        sgd_step_in_place(&mut params, &grad, lr, config.momentum, &mut state)?;
    }
    Ok(params)
}

/// Fraction of `ds` classified correctly.
pub fn accuracy(params: &ModelParams, ds: &Dataset) -> Result<f64> {
    let correct = (0..ds.len())
        .into_par_iter()
        .map(|i| Ok((forward(params, ds.row(i))?.argmax() == ds.true_labels()[i]) as usize))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(correct as f64 / ds.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub cycle: usize,
    pub labeled_count: usize,
    pub test_accuracy: f64,
    /// Cross-entropy over the whole training set with oracle labels.
    pub target_loss: f64,
    /// `H[p(Y), p(Y_hat)]`.
    pub measure_h: f64,
    /// Batch chosen after this cycle's training; empty for the final record.
    pub selected: Vec<usize>,
    pub wallclock_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub records: Vec<CycleRecord>,
    pub final_params: ModelParams,
    pub final_pool: PoolState,
    /// The pool ran out before all cycles could select a full batch.
    pub truncated: bool,
}

fn evaluate(
    params: &ModelParams,
    train: &Dataset,
    test: &Dataset,
    prior: &[f64],
    cycle: usize,
    labeled_count: usize,
) -> Result<CycleRecord> {
    Ok(CycleRecord {
        cycle,
        labeled_count,
        test_accuracy: accuracy(params, test)?,
        target_loss: al_target_loss(params, train)?,
        measure_h: measure_cross_entropy(prior, &pred_marginal(params, train)?)?,
        selected: Vec::new(),
        wallclock_ms: 0,
    })
}

/// Runs the full loop: start set, `T` train/select/label cycles, and a
/// closing training pass on the final pool.
pub fn run_al(train: &Dataset, test: &Dataset, config: &ALConfig) -> Result<RunResult> {
    config.validate()?;
    if train.input_dim() != test.input_dim() || train.classes() != test.classes() {
        return Err(Error::invalid("train and test datasets disagree in shape"));
    }
    let mut pool = init_start_set(train, config.start_size, config.balanced_start, config.seed)?;
    let prior = config.prior.resolve(train.classes(), &pool);
    let mut params = config.init(train)?;
    let mut records = Vec::with_capacity(config.cycles + 1);
    let mut truncated = false;

    for (t, k) in config.batch_schedule().into_iter().enumerate() {
        if pool.unlabeled.len() < k {
            truncated = true;
            break;
        }
        let started = Instant::now();
        params = train_cycle(&params, &pool, train, config, t)?;
        let batch = select_batch(
            config.strategy,
            &params,
            train,
            &pool,
            k,
            &config.augment,
            derive_seed(config.seed, t as u64),
        )?;
        let mut record = evaluate(&params, train, test, &prior, t, pool.labeled_count())?;
        record.selected = batch.clone();
        if config.timing {
            record.wallclock_ms = started.elapsed().as_millis() as u64;
        }
        records.push(record);
        pool = apply_selection(&pool, &batch, train)?;
    }

    let started = Instant::now();
    let t = records.len();
    params = train_cycle(&params, &pool, train, config, t)?;
    let mut record = evaluate(&params, train, test, &prior, t, pool.labeled_count())?;
    if config.timing {
        record.wallclock_ms = started.elapsed().as_millis() as u64;
    }
    records.push(record);
    Ok(RunResult {
        records,
        final_params: params,
        final_pool: pool,
        truncated,
    })
}

/// Mean and population standard deviation across trials for one cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleStats {
    pub cycle: usize,
    pub trials: usize,
    pub labeled_mean: f64,
    pub acc_mean: f64,
    pub acc_std: f64,
    pub target_loss_mean: f64,
    pub target_loss_std: f64,
    pub measure_h_mean: f64,
    pub measure_h_std: f64,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Aggregates runs cycle by cycle over the cycles every run reached.
pub fn aggregate(runs: &[RunResult]) -> Vec<CycleStats> {
    let cycles = runs.iter().map(|r| r.records.len()).min().unwrap_or(0);
    (0..cycles)
        .map(|c| {
            let col = |f: fn(&CycleRecord) -> f64| {
                runs.iter().map(|r| f(&r.records[c])).collect::<Vec<f64>>()
            };
            let (labeled_mean, _) = mean_std(&col(|r| r.labeled_count as f64));
            let (acc_mean, acc_std) = mean_std(&col(|r| r.test_accuracy));
            let (target_loss_mean, target_loss_std) = mean_std(&col(|r| r.target_loss));
            let (measure_h_mean, measure_h_std) = mean_std(&col(|r| r.measure_h));
            CycleStats {
                cycle: c,
                trials: runs.len(),
                labeled_mean,
                acc_mean,
                acc_std,
                target_loss_mean,
                target_loss_std,
                measure_h_mean,
                measure_h_std,
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct TrialsResult {
    pub seeds: Vec<u64>,
    pub runs: Vec<RunResult>,
    pub summary: Vec<CycleStats>,
}

/// Runs `n_trials` independent loops with seeds `seed, seed + 1, ...` and
/// aggregates them per cycle. Trials may run in parallel; results keep seed order.
pub fn run_trials(
    train: &Dataset,
    test: &Dataset,
    config: &ALConfig,
    n_trials: usize,
) -> Result<TrialsResult> {
    if n_trials == 0 {
        return Err(Error::invalid("n_trials must be >= 1"));
    }
    let seeds: Vec<u64> = (0..n_trials as u64)
        .map(|i| config.seed.wrapping_add(i))
        .collect();
    let runs = seeds
        .par_iter()
        .map(|&seed| {
            let cfg = ALConfig {
                seed,
                ..config.clone()
            };
            run_al(train, test, &cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = aggregate(&runs);
    Ok(TrialsResult {
        seeds,
        runs,
        summary,
    })
}

/// Rows `trial,cycle,labeled,acc,target_loss,measure_H,ms`.
pub fn records_csv(runs: &[RunResult]) -> String {
    let mut out = String::from("trial,cycle,labeled,acc,target_loss,measure_H,ms\n");
    for (trial, run) in runs.iter().enumerate() {
        for r in &run.records {
            let _ = writeln!(
                out,
                "{trial},{},{},{},{},{},{}",
                r.cycle,
                r.labeled_count,
                fmt_f64(r.test_accuracy),
                fmt_f64(r.target_loss),
                fmt_f64(r.measure_h),
                r.wallclock_ms
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gen_two_moons;

    fn small() -> (Dataset, Dataset, ALConfig) {
        let (train, test) = gen_two_moons(120, 0.1, 1).unwrap().split(80, 1).unwrap();
        let cfg = ALConfig {
            start_size: 4,
            batch_size: 4,
            cycles: 2,
            epochs_per_cycle: 20,
            hidden_dim: 8,
            unlabeled_batch: 16,
            ..ALConfig::default()
        };
        (train, test, cfg)
    }

    #[test]
    fn schedule_with_doubling() {
        let cfg = ALConfig {
            start_size: 100,
            batch_size: 150,
            doubling: true,
            cycles: 4,
            ..ALConfig::default()
        };
        assert_eq!(cfg.batch_schedule(), vec![150, 250, 500, 1000]);
        assert_eq!(cfg.total_budget(), 2000);
        let plain = ALConfig {
            doubling: false,
            ..cfg
        };
        assert_eq!(plain.batch_schedule(), vec![150; 4]);
    }

    #[test]
    fn zero_epochs_returns_input() {
        let (train, _, mut cfg) = small();
        cfg.epochs_per_cycle = 0;
        let pool = init_start_set(&train, 4, true, 0).unwrap();
        let p = cfg.init(&train).unwrap();
        assert_eq!(train_cycle(&p, &pool, &train, &cfg, 0).unwrap(), p);
        let empty = PoolState::from_start_set(&train, &[]).unwrap();
        assert!(train_cycle(&p, &empty, &train, &cfg, 0).is_err());
    }

    #[test]
    fn run_shape_and_determinism() {
        let (train, test, cfg) = small();
        let a = run_al(&train, &test, &cfg).unwrap();
        assert_eq!(a.records.len(), 3);
        assert_eq!(
            a.records
                .iter()
                .map(|r| r.labeled_count)
                .collect::<Vec<_>>(),
            vec![4, 8, 12]
        );
        assert!(!a.truncated);
        a.final_pool.check(&train).unwrap();
        let b = run_al(&train, &test, &cfg).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.final_params, b.final_params);
    }

    #[test]
    fn pool_exhaustion_truncates() {
        let (train, test, mut cfg) = small();
        cfg.batch_size = 30;
        cfg.cycles = 5;
        let r = run_al(&train, &test, &cfg).unwrap();
        assert!(r.truncated);
        assert_eq!(r.records.last().unwrap().labeled_count, 64);
        assert_eq!(r.records.len(), 3);
    }

    #[test]
    fn violations_are_all_listed() {
        let cfg = ALConfig {
            start_size: 0,
            batch_size: 0,
            lr: -1.0,
            ..ALConfig::default()
        };
        assert_eq!(cfg.violations().len(), 3);
        let cfg = ALConfig {
            start_size: 11,
            ..ALConfig::default()
        };
        let v = cfg.violations_for(40, 2);
        assert_eq!(v.len(), 2, "{v:?}");
    }

    #[test]
    fn single_trial_has_zero_spread() {
        let (train, test, cfg) = small();
        let r = run_trials(&train, &test, &cfg, 1).unwrap();
        assert!(r
            .summary
            .iter()
            .all(|s| s.acc_std == 0.0 && s.measure_h_std == 0.0));
        let csv = records_csv(&r.runs);
        assert!(csv.starts_with("trial,cycle,labeled,acc,target_loss,measure_H,ms\n"));
        assert_eq!(csv.lines().count(), 4);
    }
}
