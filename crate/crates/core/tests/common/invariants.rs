//! Module-level invariants as randomized properties. Each entry runs its own
//! deterministic proptest runner so the same cases are drawn on every run.

use std::collections::HashSet;

use alforge::al::{accuracy, run_al, train_cycle, ALConfig};
use alforge::augment::{augment, AugmentationSpec};
use alforge::coldstart::{al_target_loss, measure_cross_entropy, start_size_rule, MeasureRecord};
use alforge::data::{gen_blobs, gen_grid_patterns, gen_two_moons};
use alforge::diagnostics::{
    mean_pairwise_distance, overconfident_miscount, pca_project, rank_group_entropy,
};
use alforge::io::{decode_model, encode_model};
use alforge::nn::{
    consistency_loss, entropy, forward, init_params, softmax, supervised_loss, Activation,
    Distance, LabeledSample, LossSpec, ModelParams,
};
use alforge::pool::{apply_selection, init_start_set, PoolState};
use alforge::rng::derive_seed;
use alforge::selection::{
    consistency_score, score_consistency, select_batch, select_topk, select_uniform, ScoreTable,
    Strategy,
};
use alforge::verify::{check_gradients, check_prop1};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRng, TestRunner};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{reference_supervised_cycle, tiny_config};

pub type Check = fn(u32) -> Result<(), String>;

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let rng = TestRng::deterministic_rng(config.rng_algorithm);
    TestRunner::new_with_rng(config, rng)
}

fn check<S: proptest::strategy::Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    runner(cases)
        .run(&strategy, test)
        .map_err(|e| e.to_string())
}

fn random_params(seed: u64, d: usize, h: usize, j: usize, scale: f64) -> ModelParams {
    let act = if seed.is_multiple_of(2) {
        Activation::Tanh
    } else {
        Activation::Relu
    };
    let mut p = init_params(seed, d, h, j, scale, act).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb1a5);
    p.b1.iter_mut()
        .chain(p.b2.iter_mut())
        .for_each(|b| *b = rng.gen_range(-1.0..1.0));
    p
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

fn random_distribution(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w = random_vec(rng, n, 0.01, 1.0);
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

pub fn softmax_is_a_distribution(cases: u32) -> Result<(), String> {
    check(
        cases,
        prop::collection::vec(-1e3f64..1e3, 1..10),
        |logits| {
            let p = softmax(&logits);
            prop_assert!(p.iter().all(|&v| v >= 0.0 && v.is_finite()));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            Ok(())
        },
    )
}

pub fn consistency_loss_is_nonnegative(cases: u32) -> Result<(), String> {
    let s = (
        any::<u64>(),
        1usize..4,
        1usize..6,
        2usize..5,
        1usize..5,
        0.0f64..1.0,
        any::<bool>(),
    );
    check(cases, s, |(seed, d, h, j, n, sigma, kl)| {
        let p = random_params(seed, d, h, j, 1.5);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_vec(&mut rng, d, -2.0, 2.0);
        let augs: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                x.iter()
                    .map(|v| v + sigma * rng.gen_range(-1.0..1.0))
                    .collect()
            })
            .collect();
        let spec = LossSpec {
            distance: if kl {
                Distance::KlDivergence
            } else {
                Distance::SquaredL2
            },
            ..LossSpec::default()
        };
        let loss = consistency_loss(&p, &x, &augs, &spec).unwrap();
        prop_assert!(loss >= 0.0);
        prop_assert_eq!(
            consistency_loss(&p, &x, &vec![x.clone(); n], &spec).unwrap(),
            0.0
        );
        if loss == 0.0 {
            let clean = forward(&p, &x).unwrap().probs;
            for a in &augs {
                let q = forward(&p, a).unwrap().probs;
                prop_assert!(clean.iter().zip(&q).all(|(u, v)| (u - v).abs() < 1e-6));
            }
        }
        Ok(())
    })
}

pub fn supervised_loss_is_permutation_invariant(cases: u32) -> Result<(), String> {
    check(cases, (any::<u64>(), 1usize..10), |(seed, n)| {
        let p = random_params(seed, 3, 5, 3, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<Vec<f64>> = (0..n).map(|_| random_vec(&mut rng, 3, -2.0, 2.0)).collect();
        let mut batch: Vec<LabeledSample> = xs
            .iter()
            .map(|x| LabeledSample {
                x,
                label: rng.gen_range(0..3),
            })
            .collect();
        let a = supervised_loss(&p, &batch).unwrap();
        batch.shuffle(&mut rng);
        let b = supervised_loss(&p, &batch).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        Ok(())
    })
}

pub fn gradients_match_finite_differences(cases: u32) -> Result<(), String> {
    check(cases, any::<u64>(), |seed| {
        let r = check_gradients(seed, 20, false);
        prop_assert!(
            r.passed,
            "max error {} on {:?}",
            r.max_error,
            r.failing_instance
        );
        Ok(())
    })
}

pub fn zero_weight_training_is_supervised(cases: u32) -> Result<(), String> {
    check(cases, (any::<u64>(), any::<bool>()), |(seed, cosine)| {
        let ds = gen_two_moons(48, 0.1, seed).unwrap();
        let mut cfg = ALConfig {
            cosine_decay: cosine,
            ..tiny_config(seed)
        };
        cfg.loss.unsup_weight = 0.0;
        let pool = init_start_set(&ds, 6, true, seed).unwrap();
        let init = init_params(seed, 2, cfg.hidden_dim, 2, cfg.init_scale, cfg.activation).unwrap();
        let got = train_cycle(&init, &pool, &ds, &cfg, 1).unwrap();
        prop_assert_eq!(
            &got,
            &reference_supervised_cycle(&init, &pool, &ds, &cfg, 1)
        );
        // Augmentation and unlabeled settings cannot matter once the weight is zero.
        cfg.augment = AugmentationSpec::jitter(0.9, 1);
        cfg.unlabeled_batch = 3;
        cfg.loss.n_train_augs = 4;
        prop_assert_eq!(&got, &train_cycle(&init, &pool, &ds, &cfg, 1).unwrap());
        Ok(())
    })
}

fn assert_partition(pool: &PoolState, n: usize, truth: &[usize]) -> Result<(), TestCaseError> {
    let labeled: HashSet<usize> = pool.labeled.iter().map(|l| l.idx).collect();
    let unlabeled: HashSet<usize> = pool.unlabeled.iter().copied().collect();
    prop_assert_eq!(labeled.len(), pool.labeled.len());
    prop_assert_eq!(unlabeled.len(), pool.unlabeled.len());
    prop_assert!(labeled.is_disjoint(&unlabeled));
    prop_assert_eq!(labeled.len() + unlabeled.len(), n);
    prop_assert!(pool.labeled.iter().all(|l| l.label == truth[l.idx]));
    Ok(())
}

pub fn pool_stays_a_partition(cases: u32) -> Result<(), String> {
    let s = (
        any::<u64>(),
        10usize..80,
        prop::collection::vec(1usize..6, 0..8),
    );
    check(cases, s, |(seed, n, batches)| {
        let ds = gen_blobs(n, 2, seed, 1.0, seed).unwrap();
        let mut pool = init_start_set(&ds, 2, true, seed).unwrap();
        assert_partition(&pool, n, ds.true_labels())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (t, k) in batches.into_iter().enumerate() {
            if k > pool.unlabeled.len() {
                break;
            }
            let batch: Vec<usize> = pool
                .unlabeled
                .choose_multiple(&mut rng, k)
                .copied()
                .collect();
            pool = apply_selection(&pool, &batch, &ds).unwrap();
            prop_assert_eq!(pool.cycle, t + 1);
            assert_partition(&pool, n, ds.true_labels())?;
        }
        Ok(())
    })
}

pub fn generators_are_deterministic(cases: u32) -> Result<(), String> {
    check(
        cases,
        (any::<u64>(), 1usize..60, 0.0f64..0.5),
        |(seed, half, noise)| {
            let n = 2 * half;
            prop_assert_eq!(
                gen_two_moons(n, noise, seed).unwrap(),
                gen_two_moons(n, noise, seed).unwrap()
            );
            prop_assert_eq!(
                gen_blobs(n, 3, seed, 1.0, seed).unwrap(),
                gen_blobs(n, 3, seed, 1.0, seed).unwrap()
            );
            prop_assert_eq!(
                gen_grid_patterns(n, 4, 6, noise, seed).unwrap(),
                gen_grid_patterns(n, 4, 6, noise, seed).unwrap()
            );
            Ok(())
        },
    )
}

pub fn degenerate_augmentation_is_identity(cases: u32) -> Result<(), String> {
    check(cases, (any::<u64>(), 2usize..7), |(seed, g)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_vec(&mut rng, g * g, -1.0, 1.0);
        prop_assert_eq!(
            &augment(&x, &AugmentationSpec::jitter(0.0, 1), &mut rng).unwrap(),
            &x
        );
        prop_assert_eq!(
            &augment(&x, &AugmentationSpec::shift_flip(0, false, 1), &mut rng).unwrap(),
            &x
        );
        Ok(())
    })
}

pub fn inconsistency_is_bounded(cases: u32) -> Result<(), String> {
    let s = (
        any::<u64>(),
        1usize..5,
        1usize..8,
        2usize..7,
        1usize..12,
        0.1f64..8.0,
    );
    check(cases, s, |(seed, d, h, j, n, scale)| {
        let p = random_params(seed, d, h, j, scale);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_vec(&mut rng, d, -3.0, 3.0);
        let augs: Vec<Vec<f64>> = (0..n).map(|_| random_vec(&mut rng, d, -3.0, 3.0)).collect();
        let e = consistency_score(&p, &x, &augs).unwrap();
        prop_assert!(
            e >= 0.0 && e <= j as f64 / 4.0 + 1e-12,
            "score {} for J = {}",
            e,
            j
        );
        let mut flat = p.clone();
        flat.w1
            .iter_mut()
            .chain(flat.w2.iter_mut())
            .for_each(|w| *w = 0.0);
        prop_assert_eq!(consistency_score(&flat, &x, &augs).unwrap(), 0.0);
        Ok(())
    })
}

pub fn topk_ignores_monotone_transforms(cases: u32) -> Result<(), String> {
    check(
        cases,
        (prop::collection::vec(-5.0f64..5.0, 1..30), 1usize..8),
        |(scores, k)| {
            let k = k.min(scores.len());
            let table = |f: &dyn Fn(f64) -> f64| ScoreTable {
                strategy: Strategy::Consistency,
                seed: 0,
                scores: scores
                    .iter()
                    .enumerate()
                    .map(|(i, &s)| (3 * i + 1, f(s)))
                    .collect(),
            };
            let base = select_topk(&table(&|s| s), k).unwrap();
            let transforms: [&dyn Fn(f64) -> f64; 3] =
                [&|s| 3.0 * s + 1.0, &|s| s.atan(), &|s| s.exp()];
            for f in transforms {
                let t = table(f);
                let distinct: HashSet<u64> = t.scores.iter().map(|(_, v)| v.to_bits()).collect();
                if distinct.len() == scores.len() {
                    prop_assert_eq!(&select_topk(&t, k).unwrap(), &base);
                }
            }
            Ok(())
        },
    )
}

pub fn strategies_return_k_distinct_unlabeled(cases: u32) -> Result<(), String> {
    check(cases, (any::<u64>(), 1usize..6), |(seed, k)| {
        let ds = gen_two_moons(40, 0.1, seed).unwrap();
        let pool = init_start_set(&ds, 4, true, seed).unwrap();
        let p = random_params(seed, 2, 5, 2, 1.0);
        let spec = AugmentationSpec::jitter(0.3, 3);
        let unlabeled: HashSet<usize> = pool.unlabeled.iter().copied().collect();
        for s in Strategy::ALL {
            let batch = select_batch(s, &p, &ds, &pool, k, &spec, seed).unwrap();
            let unique: HashSet<usize> = batch.iter().copied().collect();
            prop_assert_eq!(batch.len(), k);
            prop_assert_eq!(unique.len(), k);
            prop_assert!(unique.is_subset(&unlabeled));
        }
        Ok(())
    })
}

pub fn identity_augmentation_scores_zero(cases: u32) -> Result<(), String> {
    check(cases, any::<u64>(), |seed| {
        let ds = gen_two_moons(30, 0.1, seed).unwrap();
        let p = random_params(seed, 2, 6, 2, 2.0);
        let all: Vec<usize> = (0..ds.len()).collect();
        let t = score_consistency(&p, &ds, &all, &AugmentationSpec::jitter(0.0, 1), seed).unwrap();
        prop_assert!(t.scores.iter().all(|&(_, s)| s == 0.0));
        Ok(())
    })
}

pub fn loop_is_deterministic_and_budgeted(cases: u32) -> Result<(), String> {
    let s = (any::<u64>(), any::<bool>(), 1usize..4, 1usize..4, 0usize..4);
    check(cases, s, |(seed, doubling, k, cycles, strat)| {
        let full = gen_two_moons(90, 0.1, seed).unwrap();
        let (train, test) = full.split(60, seed).unwrap();
        let cfg = ALConfig {
            doubling,
            batch_size: k,
            cycles,
            epochs_per_cycle: 1,
            strategy: Strategy::ALL[strat],
            ..tiny_config(seed)
        };
        let a = run_al(&train, &test, &cfg).unwrap();
        let b = run_al(&train, &test, &cfg).unwrap();
        prop_assert_eq!(&a.records, &b.records);
        prop_assert_eq!(&a.final_params, &b.final_params);
        let schedule = cfg.batch_schedule();
        let mut expected = cfg.start_size;
        let mut seen: HashSet<usize> = init_start_set(&train, cfg.start_size, true, seed)
            .unwrap()
            .labeled_indices()
            .into_iter()
            .collect();
        for (t, r) in a.records.iter().enumerate() {
            prop_assert_eq!(r.labeled_count, expected);
            if t < schedule.len() {
                prop_assert_eq!(r.selected.len(), schedule[t]);
                for &i in &r.selected {
                    prop_assert!(seen.insert(i), "index {} selected twice", i);
                }
                expected += schedule[t];
            }
        }
        prop_assert_eq!(a.final_pool.labeled_count(), cfg.total_budget());
        Ok(())
    })
}

pub fn passive_supervised_loop_matches_reference(cases: u32) -> Result<(), String> {
    check(cases, any::<u64>(), |seed| {
        let full = gen_two_moons(90, 0.1, seed).unwrap();
        let (train, test) = full.split(60, seed).unwrap();
        let mut cfg = ALConfig {
            strategy: Strategy::Uniform,
            ..tiny_config(seed)
        };
        cfg.loss.unsup_weight = 0.0;
        let run = run_al(&train, &test, &cfg).unwrap();

        let mut pool = init_start_set(&train, cfg.start_size, true, seed).unwrap();
        let mut params =
            init_params(seed, 2, cfg.hidden_dim, 2, cfg.init_scale, cfg.activation).unwrap();
        for (t, k) in cfg.batch_schedule().into_iter().enumerate() {
            params = reference_supervised_cycle(&params, &pool, &train, &cfg, t);
            prop_assert_eq!(
                accuracy(&params, &test).unwrap(),
                run.records[t].test_accuracy
            );
            let batch = select_uniform(&pool, k, derive_seed(seed, t as u64)).unwrap();
            prop_assert_eq!(&batch, &run.records[t].selected);
            pool = apply_selection(&pool, &batch, &train).unwrap();
        }
        params = reference_supervised_cycle(&params, &pool, &train, &cfg, cfg.cycles);
        prop_assert_eq!(&params, &run.final_params);
        Ok(())
    })
}

pub fn gibbs_inequality(cases: u32) -> Result<(), String> {
    check(cases, (any::<u64>(), 1usize..10), |(seed, n)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_distribution(&mut rng, n);
        let q = random_distribution(&mut rng, n);
        let self_h = measure_cross_entropy(&p, &p).unwrap();
        prop_assert!(measure_cross_entropy(&p, &q).unwrap() >= self_h - 1e-12);
        Ok(())
    })
}

pub fn target_loss_bracket(cases: u32) -> Result<(), String> {
    check(cases, any::<u64>(), |seed| {
        let r = check_prop1(seed, 100);
        prop_assert!(
            r.passed,
            "violation {} on {:?}",
            r.max_error,
            r.failing_instance
        );
        Ok(())
    })
}

pub fn zero_model_target_loss_is_ln_j(cases: u32) -> Result<(), String> {
    check(
        cases,
        (any::<u64>(), 2usize..7, 1usize..20),
        |(seed, j, per_class)| {
            let ds = gen_blobs(j * per_class, j, seed, 1.0, seed).unwrap();
            let p = ModelParams::zeros(2, 4, j, Activation::Tanh);
            let l = al_target_loss(&p, &ds).unwrap();
            prop_assert!((l - (j as f64).ln()).abs() <= 1e-12, "{} vs ln {}", l, j);
            Ok(())
        },
    )
}

pub fn start_size_rule_is_monotone_in_epsilon(cases: u32) -> Result<(), String> {
    let s = (
        prop::collection::vec(0.0f64..2.0, 2..8),
        0.0f64..0.5,
        0.0f64..0.5,
    );
    check(cases, s, |(hs, e1, e2)| {
        let records: Vec<MeasureRecord> = hs
            .iter()
            .enumerate()
            .map(|(i, &h)| MeasureRecord {
                labeled_count: 4 * (i + 1),
                seed: 0,
                measure_h: h,
                target_loss: 0.0,
                assumed_prior: vec![0.5, 0.5],
            })
            .collect();
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let a = start_size_rule(&records, lo).unwrap();
        let b = start_size_rule(&records, hi).unwrap();
        prop_assert!(b.size <= a.size);
        Ok(())
    })
}

fn random_table(rng: &mut ChaCha8Rng, n: usize) -> ScoreTable {
    ScoreTable {
        strategy: Strategy::Entropy,
        seed: 0,
        scores: (0..n).map(|i| (i, rng.gen_range(0.0..1.0))).collect(),
    }
}

pub fn overconfidence_counts_decrease(cases: u32) -> Result<(), String> {
    check(
        cases,
        (
            any::<u64>(),
            0.01f64..1.0,
            prop::collection::vec(0.01f64..1.0, 1..8),
        ),
        |(seed, frac, mut th)| {
            let ds = gen_two_moons(60, 0.2, seed).unwrap();
            let p = random_params(seed, 2, 6, 2, 3.0);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            th.sort_by(f64::total_cmp);
            let counts =
                overconfident_miscount(&p, &ds, &random_table(&mut rng, ds.len()), frac, &th)
                    .unwrap();
            prop_assert!(counts.windows(2).all(|w| w[1].1 <= w[0].1));
            Ok(())
        },
    )
}

pub fn group_entropy_aggregates(cases: u32) -> Result<(), String> {
    check(
        cases,
        (any::<u64>(), 1usize..250, 1usize..120),
        |(seed, n, groups)| {
            let ds = gen_blobs(n, 3, seed, 1.5, seed).unwrap();
            let p = random_params(seed, 2, 5, 3, 1.0);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = rank_group_entropy(&p, &ds, &random_table(&mut rng, n), groups).unwrap();
            let weighted: f64 = g
                .iter()
                .map(|g| g.size as f64 * g.mean_entropy)
                .sum::<f64>()
                / n as f64;
            let direct: f64 = ds
                .rows()
                .map(|x| entropy(&forward(&p, x).unwrap().probs))
                .sum::<f64>()
                / n as f64;
            prop_assert!((weighted - direct).abs() <= 1e-9);
            prop_assert_eq!(g.len(), groups.min(n));
            Ok(())
        },
    )
}

/// Applies a product of random Givens rotations to every point.
fn rotate(points: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let d = points[0].len();
    let mut out = points.to_vec();
    for _ in 0..3 * d {
        let (a, b) = (rng.gen_range(0..d), rng.gen_range(0..d));
        if a == b {
            continue;
        }
        let t: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        for p in &mut out {
            let (x, y) = (p[a], p[b]);
            p[a] = t.cos() * x - t.sin() * y;
            p[b] = t.sin() * x + t.cos() * y;
        }
    }
    out
}

pub fn diversity_is_rotation_invariant(cases: u32) -> Result<(), String> {
    check(
        cases,
        (any::<u64>(), 2usize..12, 2usize..6),
        |(seed, n, d)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<Vec<f64>> = (0..n).map(|_| random_vec(&mut rng, d, -3.0, 3.0)).collect();
            let a = mean_pairwise_distance(&pts).unwrap();
            let b = mean_pairwise_distance(&rotate(&pts, &mut rng)).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
            Ok(())
        },
    )
}

pub fn pca_is_ordered_and_uncorrelated(cases: u32) -> Result<(), String> {
    check(
        cases,
        (any::<u64>(), 3usize..40, 2usize..7),
        |(seed, n, d)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mix: Vec<Vec<f64>> = (0..d).map(|_| random_vec(&mut rng, d, -2.0, 2.0)).collect();
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    let z = random_vec(&mut rng, d, -1.0, 1.0);
                    (0..d)
                        .map(|i| (0..d).map(|k| mix[i][k] * z[k]).sum())
                        .collect()
                })
                .collect();
            let p = pca_project(&rows).unwrap();
            prop_assert!(p.variances[0] >= p.variances[1]);
            let m = |c: usize| p.coords.iter().map(|v| v[c]).sum::<f64>() / n as f64;
            let (m0, m1) = (m(0), m(1));
            let cov = p
                .coords
                .iter()
                .map(|v| (v[0] - m0) * (v[1] - m1))
                .sum::<f64>()
                / n as f64;
            let var = |c: usize, mc: f64| {
                p.coords.iter().map(|v| (v[c] - mc).powi(2)).sum::<f64>() / n as f64
            };
            let scale = p.variances[0].max(1.0);
            prop_assert!(cov.abs() <= 1e-6 * scale, "cov {}", cov);
            prop_assert!(var(0, m0) + 1e-6 * scale >= var(1, m1));
            Ok(())
        },
    )
}

pub fn snapshots_round_trip(cases: u32) -> Result<(), String> {
    check(
        cases,
        (any::<u64>(), 1usize..6, 1usize..10, 2usize..6),
        |(seed, d, h, j)| {
            let p = random_params(seed, d, h, j, 2.0);
            let q = decode_model(&encode_model(&p)).unwrap();
            prop_assert_eq!(&p, &q);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random_vec(&mut rng, d, -3.0, 3.0);
            let (a, b) = (forward(&p, &x).unwrap(), forward(&q, &x).unwrap());
            prop_assert!(a
                .probs
                .iter()
                .zip(&b.probs)
                .all(|(u, v)| u.to_bits() == v.to_bits()));
            Ok(())
        },
    )
}

/// Every invariant with the case count used by the suite.
pub const ALL: &[(&str, Check, u32)] = &[
    ("softmax_is_a_distribution", softmax_is_a_distribution, 256),
    (
        "consistency_loss_is_nonnegative",
        consistency_loss_is_nonnegative,
        256,
    ),
    (
        "supervised_loss_is_permutation_invariant",
        supervised_loss_is_permutation_invariant,
        128,
    ),
    (
        "gradients_match_finite_differences",
        gradients_match_finite_differences,
        5,
    ),
    (
        "zero_weight_training_is_supervised",
        zero_weight_training_is_supervised,
        12,
    ),
    ("pool_stays_a_partition", pool_stays_a_partition, 128),
    (
        "generators_are_deterministic",
        generators_are_deterministic,
        64,
    ),
    (
        "degenerate_augmentation_is_identity",
        degenerate_augmentation_is_identity,
        128,
    ),
    ("inconsistency_is_bounded", inconsistency_is_bounded, 512),
    (
        "topk_ignores_monotone_transforms",
        topk_ignores_monotone_transforms,
        256,
    ),
    (
        "strategies_return_k_distinct_unlabeled",
        strategies_return_k_distinct_unlabeled,
        32,
    ),
    (
        "identity_augmentation_scores_zero",
        identity_augmentation_scores_zero,
        32,
    ),
    (
        "loop_is_deterministic_and_budgeted",
        loop_is_deterministic_and_budgeted,
        16,
    ),
    (
        "passive_supervised_loop_matches_reference",
        passive_supervised_loop_matches_reference,
        8,
    ),
    ("gibbs_inequality", gibbs_inequality, 512),
    ("target_loss_bracket", target_loss_bracket, 4),
    (
        "zero_model_target_loss_is_ln_j",
        zero_model_target_loss_is_ln_j,
        64,
    ),
    (
        "start_size_rule_is_monotone_in_epsilon",
        start_size_rule_is_monotone_in_epsilon,
        256,
    ),
    (
        "overconfidence_counts_decrease",
        overconfidence_counts_decrease,
        64,
    ),
    ("group_entropy_aggregates", group_entropy_aggregates, 64),
    (
        "diversity_is_rotation_invariant",
        diversity_is_rotation_invariant,
        256,
    ),
    (
        "pca_is_ordered_and_uncorrelated",
        pca_is_ordered_and_uncorrelated,
        128,
    ),
    ("snapshots_round_trip", snapshots_round_trip, 128),
];
