//! Acquisition strategies.
//!
//! The consistency score of a sample is the sum over classes of the
//! population variance of the predicted class probability across the clean
//! input and `N` augmented views. Because the batch objective is the sum of
//! per-sample scores, the best size-`K` batch is simply the top `K`.
//!
//! Selection code sees features and revealed labels only; ground truth of
//! unlabeled samples is never read here.

use std::cmp::Ordering;
use std::fmt::Write as _;

use rand::seq::index;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::{augment, AugmentationSpec};
use crate::data::{fmt_f64, Dataset};
use crate::error::{Error, Result};
use crate::nn::{entropy, forward, ModelParams};
use crate::pool::PoolState;
use crate::rng::{rng_for, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Uniform,
    Entropy,
    #[serde(rename = "kcenter")]
    KCenter,
    Consistency,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Uniform,
        Strategy::Entropy,
        Strategy::KCenter,
        Strategy::Consistency,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Uniform => "uniform",
            Strategy::Entropy => "entropy",
            Strategy::KCenter => "kcenter",
            Strategy::Consistency => "consistency",
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Strategy::Uniform),
            "entropy" => Ok(Strategy::Entropy),
            "kcenter" | "k-center" | "k_center" => Ok(Strategy::KCenter),
            "consistency" => Ok(Strategy::Consistency),
            other => Err(Error::invalid(format!("unknown strategy `{other}`"))),
        }
    }
}

/// Per-sample acquisition scores over exactly the current unlabeled set,
/// kept in pool order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub strategy: Strategy,
    pub seed: u64,
    pub scores: Vec<(usize, f64)>,
}

/// Descending score, ascending index on ties.
fn rank_order(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

impl ScoreTable {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn get(&self, idx: usize) -> Option<f64> {
        self.scores.iter().find(|(i, _)| *i == idx).map(|(_, s)| *s)
    }

    /// Entries from best to worst.
    pub fn ranked(&self) -> Vec<(usize, f64)> {
        let mut v = self.scores.clone();
        v.sort_by(rank_order);
        v
    }

    /// Rows `idx,score,rank` in rank order, rank starting at 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("idx,score,rank\n");
        for (rank, (idx, score)) in self.ranked().into_iter().enumerate() {
            let _ = writeln!(out, "{idx},{},{}", fmt_f64(score), rank + 1);
        }
        out
    }
}

fn require_nonempty(unlabeled: &[usize]) -> Result<()> {
    if unlabeled.is_empty() {
        Err(Error::Empty("unlabeled pool"))
    } else {
        Ok(())
    }
}

fn check_indices(ds: &Dataset, indices: &[usize]) -> Result<()> {
    match indices.iter().find(|&&i| i >= ds.len()) {
        Some(&idx) => Err(Error::IndexOutOfRange { idx, len: ds.len() }),
        None => Ok(()),
    }
}

/// Predictive entropy of the clean prediction.
pub fn score_entropy(
    params: &ModelParams,
    ds: &Dataset,
    unlabeled: &[usize],
) -> Result<ScoreTable> {
    require_nonempty(unlabeled)?;
    check_indices(ds, unlabeled)?;
    let scores = unlabeled
        .par_iter()
        .map(|&i| Ok((i, entropy(&forward(params, ds.row(i))?.probs))))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScoreTable {
        strategy: Strategy::Entropy,
        seed: 0,
        scores,
    })
}

/// The `N` augmented views scored for sample `idx`. Each sample owns an
/// independent random stream keyed by `(seed, idx)`.
pub fn eval_augmentations(
    x: &[f64],
    idx: usize,
    spec: &AugmentationSpec,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let mut rng = rng_for(seed, Domain::ScoreAugment, idx as u64);
    (0..spec.n_eval_augs)
        .map(|_| augment(x, spec, &mut rng))
        .collect()
}

/// Sum over classes of the population variance of `p_l(x), p_l(x_1), ..., p_l(x_N)`.
pub fn consistency_score(params: &ModelParams, x: &[f64], augs: &[Vec<f64>]) -> Result<f64> {
    let j = params.classes();
    // Welford accumulation per class over the clean + augmented predictions.
    let mut mean = vec![0.0; j];
    let mut m2 = vec![0.0; j];
    let mut count = 0.0;
    for view in std::iter::once(x).chain(augs.iter().map(Vec::as_slice)) {
        let probs = forward(params, view)?.probs;
        count += 1.0;
        for ((m, s), p) in mean.iter_mut().zip(m2.iter_mut()).zip(probs) {
            let delta = p - *m;
            *m += delta / count;
            *s += delta * (p - *m);
        }
    }
    Ok(m2.iter().map(|s| s.max(0.0) / count).sum())
}

pub fn score_consistency(
    params: &ModelParams,
    ds: &Dataset,
    unlabeled: &[usize],
    spec: &AugmentationSpec,
    seed: u64,
) -> Result<ScoreTable> {
    require_nonempty(unlabeled)?;
    check_indices(ds, unlabeled)?;
    spec.validate()?;
    let scores = unlabeled
        .par_iter()
        .map(|&i| {
            let x = ds.row(i);
            let augs = eval_augmentations(x, i, spec, seed)?;
            Ok((i, consistency_score(params, x, &augs)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScoreTable {
        strategy: Strategy::Consistency,
        seed,
        scores,
    })
}

/// Random scores; their ranking is a uniformly random permutation.
pub fn score_uniform(unlabeled: &[usize], seed: u64) -> Result<ScoreTable> {
    require_nonempty(unlabeled)?;
    let mut rng = rng_for(seed, Domain::Uniform, 1);
    Ok(ScoreTable {
        strategy: Strategy::Uniform,
        seed,
        scores: unlabeled.iter().map(|&i| (i, rng.gen::<f64>())).collect(),
    })
}

/// The `k` best entries: highest score first, smaller index on ties.
pub fn select_topk(scores: &ScoreTable, k: usize) -> Result<Vec<usize>> {
    if k > scores.len() {
        return Err(Error::invalid(format!(
            "batch size {k} exceeds pool of {}",
            scores.len()
        )));
    }
    let mut v = scores.scores.clone();
    if k < v.len() && k > 0 {
        v.select_nth_unstable_by(k - 1, rank_order);
        v.truncate(k);
    }
    v.sort_by(rank_order);
    v.truncate(k);
    Ok(v.into_iter().map(|(i, _)| i).collect())
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// A farthest-first pick and the distance at which it was chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreedyPick {
    pub idx: usize,
    pub distance: f64,
}

/// Greedy farthest-first traversal over `points`.
///
/// Starting from the covered set `anchors`, repeatedly picks the candidate
/// whose Euclidean distance to its nearest covered point is largest
/// (smaller index on ties) and adds it to the covered set.
pub fn kcenter_greedy(
    points: &[Vec<f64>],
    anchors: &[usize],
    candidates: &[usize],
    k: usize,
) -> Result<Vec<GreedyPick>> {
    if anchors.is_empty() {
        return Err(Error::Empty("anchor set"));
    }
    if k > candidates.len() {
        return Err(Error::invalid(format!(
            "batch size {k} exceeds pool of {}",
            candidates.len()
        )));
    }
    let mut best: Vec<f64> = candidates
        .iter()
        .map(|&c| {
            anchors
                .iter()
                .map(|&a| sq_dist(&points[c], &points[a]))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut taken = vec![false; candidates.len()];
    let mut picks = Vec::with_capacity(k);
    for _ in 0..k {
        let mut arg: Option<usize> = None;
        for (slot, &d) in best.iter().enumerate() {
            if taken[slot] {
                continue;
            }
            arg = match arg {
                None => Some(slot),
                Some(b) if d > best[b] || (d == best[b] && candidates[slot] < candidates[b]) => {
                    Some(slot)
                }
                keep => keep,
            };
        }
        let slot = arg.expect("k <= candidates");
        taken[slot] = true;
        let chosen = candidates[slot];
        picks.push(GreedyPick {
            idx: chosen,
            distance: best[slot].sqrt(),
        });
        for (s, &c) in candidates.iter().enumerate() {
            if !taken[s] {
                best[s] = best[s].min(sq_dist(&points[c], &points[chosen]));
            }
        }
    }
    Ok(picks)
}

/// Hidden-layer embeddings of every sample in `ds`.
pub fn embeddings(params: &ModelParams, ds: &Dataset) -> Result<Vec<Vec<f64>>> {
    (0..ds.len())
        .into_par_iter()
        .map(|i| Ok(forward(params, ds.row(i))?.hidden))
        .collect()
}

/// k-center batch in the model's hidden-feature space, anchored on the labeled pool.
pub fn select_kcenter(
    params: &ModelParams,
    ds: &Dataset,
    pool: &PoolState,
    k: usize,
) -> Result<Vec<usize>> {
    if pool.labeled.is_empty() {
        return Err(Error::Empty("labeled pool (k-center needs anchors)"));
    }
    let emb = embeddings(params, ds)?;
    let picks = kcenter_greedy(&emb, &pool.labeled_indices(), &pool.unlabeled, k)?;
    Ok(picks.into_iter().map(|p| p.idx).collect())
}

/// Uniform sample without replacement from the unlabeled pool.
pub fn select_uniform(pool: &PoolState, k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = pool.unlabeled.len();
    if k > n {
        return Err(Error::invalid(format!(
            "batch size {k} exceeds pool of {n}"
        )));
    }
    let mut rng = rng_for(seed, Domain::Uniform, 0);
    Ok(index::sample(&mut rng, n, k)
        .into_iter()
        .map(|i| pool.unlabeled[i])
        .collect())
}

/// Full ranking of the unlabeled pool for a strategy, used by diagnostics.
/// k-center has no per-sample score, so its entries carry the reverse greedy
/// order (`n - position`), making the ranking equal the traversal order.
pub fn score_pool(
    strategy: Strategy,
    params: &ModelParams,
    ds: &Dataset,
    pool: &PoolState,
    spec: &AugmentationSpec,
    seed: u64,
) -> Result<ScoreTable> {
    match strategy {
        Strategy::Uniform => score_uniform(&pool.unlabeled, seed),
        Strategy::Entropy => score_entropy(params, ds, &pool.unlabeled),
        Strategy::Consistency => score_consistency(params, ds, &pool.unlabeled, spec, seed),
        Strategy::KCenter => {
            require_nonempty(&pool.unlabeled)?;
            let emb = embeddings(params, ds)?;
            let n = pool.unlabeled.len();
            let picks = kcenter_greedy(&emb, &pool.labeled_indices(), &pool.unlabeled, n)?;
            let mut scores: Vec<(usize, f64)> = picks
                .iter()
                .enumerate()
                .map(|(pos, p)| (p.idx, (n - pos) as f64))
                .collect();
            scores.sort_by_key(|(i, _)| *i);
            let order: std::collections::HashMap<usize, f64> = scores.into_iter().collect();
            Ok(ScoreTable {
                strategy,
                seed,
                scores: pool.unlabeled.iter().map(|i| (*i, order[i])).collect(),
            })
        }
    }
}

/// Picks the next batch of `k` samples with the given strategy.
pub fn select_batch(
    strategy: Strategy,
    params: &ModelParams,
    ds: &Dataset,
    pool: &PoolState,
    k: usize,
    spec: &AugmentationSpec,
    seed: u64,
) -> Result<Vec<usize>> {
    match strategy {
        Strategy::Uniform => select_uniform(pool, k, seed),
        Strategy::KCenter => select_kcenter(params, ds, pool, k),
        Strategy::Entropy => select_topk(&score_entropy(params, ds, &pool.unlabeled)?, k),
        Strategy::Consistency => select_topk(
            &score_consistency(params, ds, &pool.unlabeled, spec, seed)?,
            k,
        ),
    }
}
