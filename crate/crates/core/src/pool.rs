//! Labeled / unlabeled bookkeeping for the active learning loop.

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{oracle_label, Dataset};
use crate::error::{Error, Result};
use crate::rng::{rng_for, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledIndex {
    pub idx: usize,
    pub label: usize,
}

/// Disjoint labeled and unlabeled index sets over one training dataset.
///
/// Both sets keep insertion order; the unlabeled set starts in ascending
/// index order and only ever loses elements.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolState {
    pub cycle: usize,
    pub labeled: Vec<LabeledIndex>,
    pub unlabeled: Vec<usize>,
}

impl PoolState {
    /// Labels `start` (in the given order) and leaves the rest unlabeled.
    pub fn from_start_set(ds: &Dataset, start: &[usize]) -> Result<PoolState> {
        let mut is_labeled = vec![false; ds.len()];
        let mut labeled = Vec::with_capacity(start.len());
        for &idx in start {
            let label = oracle_label(ds, idx)?;
            if std::mem::replace(&mut is_labeled[idx], true) {
                return Err(Error::invalid(format!("duplicate start index {idx}")));
            }
            labeled.push(LabeledIndex { idx, label });
        }
        let unlabeled = (0..ds.len()).filter(|&i| !is_labeled[i]).collect();
        Ok(PoolState {
            cycle: 0,
            labeled,
            unlabeled,
        })
    }

    pub fn labeled_count(&self) -> usize {
        self.labeled.len()
    }

    pub fn labeled_indices(&self) -> Vec<usize> {
        self.labeled.iter().map(|l| l.idx).collect()
    }

    /// Revealed labels only; usable as a class-prior estimate.
    pub fn label_histogram(&self, classes: usize) -> Vec<usize> {
        let mut h = vec![0; classes];
        for l in &self.labeled {
            h[l.label] += 1;
        }
        h
    }

    /// Checks disjointness, coverage of `0..n` and oracle fidelity.
    pub fn check(&self, ds: &Dataset) -> Result<()> {
        let mut seen = vec![false; ds.len()];
        for &idx in self.labeled.iter().map(|l| &l.idx).chain(&self.unlabeled) {
            if idx >= ds.len() {
                return Err(Error::IndexOutOfRange { idx, len: ds.len() });
            }
            if std::mem::replace(&mut seen[idx], true) {
                return Err(Error::invalid(format!(
                    "index {idx} appears twice in the pool"
                )));
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::invalid(format!(
                "index {missing} missing from the pool"
            )));
        }
        for l in &self.labeled {
            if oracle_label(ds, l.idx)? != l.label {
                return Err(Error::invalid(format!(
                    "label of {} disagrees with the oracle",
                    l.idx
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<PoolState> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<PoolState> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        PoolState::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Per-class shuffled index lists for `ds`, driven by `seed`.
fn shuffled_by_class(ds: &Dataset, seed: u64) -> Vec<Vec<usize>> {
    let mut by_class = vec![Vec::new(); ds.classes()];
    for (i, &l) in ds.true_labels().iter().enumerate() {
        by_class[l].push(i);
    }
    for (c, list) in by_class.iter_mut().enumerate() {
        list.shuffle(&mut rng_for(seed, Domain::StartSet, 1 + c as u64));
    }
    by_class
}

/// Initial labeled set `B_0`: a uniform draw of `k0` indices, or exactly
/// `k0 / J` per class when `balanced`.
pub fn init_start_set(ds: &Dataset, k0: usize, balanced: bool, seed: u64) -> Result<PoolState> {
    if k0 > ds.len() {
        return Err(Error::invalid(format!(
            "start size {k0} exceeds dataset size {}",
            ds.len()
        )));
    }
    let start: Vec<usize> = if balanced {
        let j = ds.classes();
        if !k0.is_multiple_of(j) {
            return Err(Error::invalid(format!(
                "balanced start size {k0} is not divisible by {j} classes"
            )));
        }
        let per = k0 / j;
        let by_class = shuffled_by_class(ds, seed);
        if let Some((c, list)) = by_class.iter().enumerate().find(|(_, l)| l.len() < per) {
            return Err(Error::invalid(format!(
                "class {c} has {} samples, fewer than {per} requested",
                list.len()
            )));
        }
        // Round-robin over classes so the labeled order interleaves classes.
        (0..per)
            .flat_map(|r| by_class.iter().map(move |l| l[r]))
            .collect()
    } else {
        let mut all: Vec<usize> = (0..ds.len()).collect();
        all.shuffle(&mut rng_for(seed, Domain::StartSet, 0));
        all.truncate(k0);
        all
    };
    PoolState::from_start_set(ds, &start)
}

/// A class-interleaved ordering of all indices: every prefix is as class
/// balanced as the class sizes allow. Prefixes give nested start sets.
pub fn nested_balanced_order(ds: &Dataset, seed: u64) -> Vec<usize> {
    let by_class = shuffled_by_class(ds, seed);
    let longest = by_class.iter().map(Vec::len).max().unwrap_or(0);
    (0..longest)
        .flat_map(|r| by_class.iter().filter_map(move |l| l.get(r).copied()))
        .collect()
}

/// Moves `batch` from the unlabeled to the labeled set using oracle labels.
pub fn apply_selection(pool: &PoolState, batch: &[usize], ds: &Dataset) -> Result<PoolState> {
    let mut in_unlabeled = vec![false; ds.len()];
    for &i in &pool.unlabeled {
        if i >= ds.len() {
            return Err(Error::IndexOutOfRange {
                idx: i,
                len: ds.len(),
            });
        }
        in_unlabeled[i] = true;
    }
    let mut chosen = vec![false; ds.len()];
    let mut labeled = pool.labeled.clone();
    for &idx in batch {
        if idx >= ds.len() {
            return Err(Error::IndexOutOfRange { idx, len: ds.len() });
        }
        if !in_unlabeled[idx] || chosen[idx] {
            return Err(Error::NotUnlabeled(idx));
        }
        chosen[idx] = true;
        labeled.push(LabeledIndex {
            idx,
            label: oracle_label(ds, idx)?,
        });
    }
    Ok(PoolState {
        cycle: pool.cycle + 1,
        labeled,
        unlabeled: pool
            .unlabeled
            .iter()
            .copied()
            .filter(|&i| !chosen[i])
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gen_two_moons;

    #[test]
    fn start_set_variants() {
        let ds = gen_two_moons(40, 0.1, 1).unwrap();
        let all = init_start_set(&ds, 40, false, 3).unwrap();
        assert!(all.unlabeled.is_empty());
        let bal = init_start_set(&ds, 10, true, 3).unwrap();
        assert_eq!(bal.label_histogram(2), vec![5, 5]);
        assert_eq!(bal, init_start_set(&ds, 10, true, 3).unwrap());
        bal.check(&ds).unwrap();
        assert!(init_start_set(&ds, 9, true, 3).is_err());
        assert!(init_start_set(&ds, 41, false, 3).is_err());
    }

    #[test]
    fn selection_moves_indices() {
        let ds = gen_two_moons(20, 0.1, 1).unwrap();
        let pool = init_start_set(&ds, 4, false, 0).unwrap();
        let same = apply_selection(&pool, &[], &ds).unwrap();
        assert_eq!(
            (same.cycle, &same.labeled, &same.unlabeled),
            (1, &pool.labeled, &pool.unlabeled)
        );

        let batch = vec![pool.unlabeled[3], pool.unlabeled[0]];
        let next = apply_selection(&pool, &batch, &ds).unwrap();
        assert_eq!(next.labeled_count(), 6);
        next.check(&ds).unwrap();

        let rest = next.unlabeled.clone();
        let done = apply_selection(&next, &rest, &ds).unwrap();
        assert!(done.unlabeled.is_empty());

        let labeled = pool.labeled[0].idx;
        assert!(matches!(
            apply_selection(&pool, &[labeled], &ds),
            Err(Error::NotUnlabeled(_))
        ));
        assert!(apply_selection(&pool, &[99], &ds).is_err());
        let u = pool.unlabeled[0];
        assert!(apply_selection(&pool, &[u, u], &ds).is_err());
    }

    #[test]
    fn nested_order_prefixes_are_balanced() {
        let ds = gen_two_moons(30, 0.1, 2).unwrap();
        let order = nested_balanced_order(&ds, 5);
        assert_eq!(order.len(), 30);
        for k in [2, 4, 10, 20] {
            let pool = PoolState::from_start_set(&ds, &order[..k]).unwrap();
            assert_eq!(pool.label_histogram(2), vec![k / 2, k / 2]);
        }
    }

    #[test]
    fn json_snapshot_layout() {
        let ds = gen_two_moons(6, 0.1, 2).unwrap();
        let pool = PoolState::from_start_set(&ds, &[4]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&pool.to_json().unwrap()).unwrap();
        assert_eq!(v["cycle"], 0);
        assert_eq!(v["labeled"][0]["idx"], 4);
        assert_eq!(v["labeled"][0]["label"], 1);
        assert_eq!(v["unlabeled"], serde_json::json!([0, 1, 2, 3, 5]));
        assert_eq!(
            PoolState::from_json(&pool.to_json().unwrap()).unwrap(),
            pool
        );
    }
}
