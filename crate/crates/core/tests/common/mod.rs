#![allow(dead_code)]

pub mod invariants;

use std::path::PathBuf;

use alforge::al::ALConfig;
use alforge::augment::AugmentationSpec;
use alforge::data::Dataset;
use alforge::nn::{sgd_step_in_place, total_loss_and_grad, LabeledSample, ModelParams, SgdState};
use alforge::pool::PoolState;
use alforge::rng::{rng_for, Domain};
use rand::seq::SliceRandom;

/// A small, fast configuration for loop-level tests.
pub fn tiny_config(seed: u64) -> ALConfig {
    ALConfig {
        seed,
        start_size: 4,
        batch_size: 3,
        cycles: 2,
        epochs_per_cycle: 2,
        labeled_batch: 8,
        unlabeled_batch: 8,
        hidden_dim: 6,
        augment: AugmentationSpec::jitter(0.3, 3),
        ..ALConfig::default()
    }
}

/// Plain supervised mini-batch SGD over the revealed labels, written
/// without any consistency machinery. Mirrors the loop's batching so that a
/// zero consistency weight must reproduce it bit for bit.
pub fn reference_supervised_cycle(
    params: &ModelParams,
    pool: &PoolState,
    ds: &Dataset,
    config: &ALConfig,
    cycle: usize,
) -> ModelParams {
    let mut params = params.clone();
    let mut rng = rng_for(config.seed, Domain::LabeledBatches, cycle as u64);
    let mut state = SgdState::new(&params);
    let mut order: Vec<(usize, usize)> = pool.labeled.iter().map(|l| (l.idx, l.label)).collect();
    let batch = config.labeled_batch.min(order.len());
    let steps = config.epochs_per_cycle * ds.len().div_ceil(config.labeled_batch);
    let mut cursor = order.len();
    let mut spec = config.loss;
    spec.unsup_weight = 0.0;
    for step in 0..steps {
        let mut labeled = Vec::with_capacity(batch);
        while labeled.len() < batch {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let (idx, label) = order[cursor];
            cursor += 1;
            labeled.push(LabeledSample {
                x: ds.row(idx),
                label,
            });
        }
        let (_, grad) = total_loss_and_grad(&params, &labeled, &[], &spec).unwrap();
        let lr = if config.cosine_decay {
            0.5 * config.lr * (1.0 + (std::f64::consts::PI * step as f64 / steps as f64).cos())
        } else {
            config.lr
        };
        sgd_step_in_place(&mut params, &grad, lr, config.momentum, &mut state).unwrap();
    }
    params
}

/// A fresh, empty scratch directory under the system temp dir.
pub fn scratch_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("alforge-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
