//! Built-in oracle suite. Each check draws random instances and compares the
//! library against an independent computation: central finite differences
//! for gradients, a two-pass variance for the consistency score, subset
//! enumeration for top-K selection and k-center, and direct enumeration of
//! the target-loss bracket.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use serde_json::{json, Value};

use crate::coldstart::{verify_prop1, DiscreteJoint};
use crate::error::Result;
use crate::nn::{
    forward, init_params, total_loss_and_grad, Activation, AugmentedSample, Distance,
    LabeledSample, LossSpec, ModelParams, PROB_FLOOR,
};
use crate::rng::{derive_seed, rng_for, Domain, Rng};
use crate::selection::{consistency_score, kcenter_greedy, select_topk, ScoreTable, Strategy};

pub const GRADIENT_TOL: f64 = 1e-4;
pub const VARIANCE_TOL: f64 = 1e-12;
pub const TOPK_TOL: f64 = 1e-12;
pub const BRACKET_TOL: f64 = 1e-12;
/// Greedy radius may exceed twice the optimum by this much (rounding only).
pub const KCENTER_TOL: f64 = 1e-12;

/// Floor on the denominator of the relative gradient error, so that
/// coordinates whose true gradient is ~0 are judged by absolute error.
pub const GRADIENT_REL_FLOOR: f64 = 1e-6;
const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub instances: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// The first failing instance, serialized for replay.
    pub failing_instance: Option<Value>,
}

impl CheckResult {
    fn new(name: &'static str, tolerance: f64) -> Self {
        CheckResult {
            name,
            instances: 0,
            max_error: 0.0,
            tolerance,
            passed: true,
            failing_instance: None,
        }
    }

    fn record(&mut self, err: f64, instance: impl FnOnce() -> Value) {
        self.instances += 1;
        if err.is_nan() || err > self.max_error {
            self.max_error = if err.is_nan() { f64::INFINITY } else { err };
        }
        if (err.is_nan() || err > self.tolerance) && self.failing_instance.is_none() {
            self.passed = false;
            self.failing_instance = Some(instance());
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Negative control: perturbs every analytic gradient before comparison.
    pub corrupt_gradient: bool,
}

fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn normals(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| normal(rng)).collect()
}

fn random_distribution(rng: &mut Rng, n: usize, allow_zeros: bool) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n)
        .map(|_| {
            if allow_zeros && rng.gen_bool(0.2) {
                0.0
            } else {
                (1.5 * normal(rng)).exp()
            }
        })
        .collect();
    if w.iter().all(|&v| v == 0.0) {
        w[rng.gen_range(0..n)] = 1.0;
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

fn params_json(p: &ModelParams) -> Value {
    json!({
        "dims": [p.input_dim(), p.hidden_dim(), p.classes()],
        "activation": p.activation.name(),
        "w1": p.w1, "b1": p.b1, "w2": p.w2, "b2": p.b2,
    })
}

struct GradInstance {
    params: ModelParams,
    labeled: Vec<(Vec<f64>, usize)>,
    unlabeled: Vec<(Vec<f64>, Vec<Vec<f64>>)>,
    spec: LossSpec,
}

impl GradInstance {
    fn inputs(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.labeled.iter().map(|(x, _)| x).chain(
            self.unlabeled
                .iter()
                .flat_map(|(x, a)| std::iter::once(x).chain(a)),
        )
    }

    fn to_json(&self) -> Value {
        json!({
            "params": params_json(&self.params),
            "labeled": self.labeled,
            "unlabeled": self.unlabeled,
            "distance": self.spec.distance.name(),
            "unsup_weight": self.spec.unsup_weight,
        })
    }
}

fn random_grad_instance(rng: &mut Rng) -> GradInstance {
    loop {
        let d = rng.gen_range(1..=4);
        let h = rng.gen_range(1..=6);
        let j = rng.gen_range(2..=4);
        let activation = if rng.gen_bool(0.5) {
            Activation::Tanh
        } else {
            Activation::Relu
        };
        let mut params = init_params(rng.gen(), d, h, j, 1.0, activation).expect("valid dims");
        params.iter_mut().for_each(|v| *v += 0.3 * normal(rng));
        let labeled = (0..rng.gen_range(1..=4))
            .map(|_| (normals(rng, d), rng.gen_range(0..j)))
            .collect();
        let n_augs = rng.gen_range(1..=3);
        let unlabeled = (0..rng.gen_range(0..=3))
            .map(|_| {
                let x = normals(rng, d);
                let augs = (0..n_augs)
                    .map(|_| x.iter().map(|v| v + 0.3 * normal(rng)).collect())
                    .collect();
                (x, augs)
            })
            .collect();
        let spec = LossSpec {
            distance: if rng.gen_bool(0.5) {
                Distance::SquaredL2
            } else {
                Distance::KlDivergence
            },
            unsup_weight: if rng.gen_bool(0.2) {
                0.0
            } else {
                rng.gen_range(0.1..2.0)
            },
            n_train_augs: n_augs,
        };
        let inst = GradInstance {
            params,
            labeled,
            unlabeled,
            spec,
        };
        // Finite differences are meaningless across a ReLU kink.
        let near_kink = activation == Activation::Relu
            && inst.inputs().any(|x| {
                let p = &inst.params;
                (0..h).any(|k| {
                    let z: f64 = p.b1[k] + (0..d).map(|i| p.w1[k * d + i] * x[i]).sum::<f64>();
                    z.abs() < 10.0 * FD_STEP * (1.0 + x.iter().map(|v| v.abs()).sum::<f64>())
                })
            });
        if !near_kink {
            return inst;
        }
    }
}

/// The composite loss at `params` with the clean-branch targets frozen at `targets`.
fn frozen_target_loss(inst: &GradInstance, params: &ModelParams, targets: &[Vec<f64>]) -> f64 {
    let mut sup = 0.0;
    for (x, y) in &inst.labeled {
        let p = forward(params, x).expect("valid instance").probs;
        sup -= p[*y].max(PROB_FLOOR).ln();
    }
    let mut loss = sup / inst.labeled.len() as f64;
    if inst.spec.unsup_weight > 0.0 && !inst.unlabeled.is_empty() {
        let mut unsup = 0.0;
        for ((_, augs), target) in inst.unlabeled.iter().zip(targets) {
            let per: f64 = augs
                .iter()
                .map(|a| {
                    inst.spec
                        .distance
                        .eval(target, &forward(params, a).expect("valid instance").probs)
                })
                .sum();
            unsup += per / augs.len() as f64;
        }
        loss += inst.spec.unsup_weight * unsup / inst.unlabeled.len() as f64;
    }
    loss
}

/// Max relative error between analytic and central-difference gradients on one instance.
fn gradient_error(inst: &GradInstance, corrupt: bool) -> Result<f64> {
    let labeled: Vec<LabeledSample> = inst
        .labeled
        .iter()
        .map(|(x, y)| LabeledSample { x, label: *y })
        .collect();
    let unlabeled: Vec<AugmentedSample> = inst
        .unlabeled
        .iter()
        .map(|(x, augs)| AugmentedSample {
            x,
            augs: augs.clone(),
        })
        .collect();
    let (_, mut grad) = total_loss_and_grad(&inst.params, &labeled, &unlabeled, &inst.spec)?;
    if corrupt {
        grad.iter_mut().for_each(|g| *g = *g * 1.01 + 1e-3);
    }
    let targets: Vec<Vec<f64>> = inst
        .unlabeled
        .iter()
        .map(|(x, _)| forward(&inst.params, x).map(|p| p.probs))
        .collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    let mut probe = inst.params.clone();
    for i in 0..inst.params.num_params() {
        let base = inst.params.coord(i);
        probe.set_coord(i, base + FD_STEP);
        let up = frozen_target_loss(inst, &probe, &targets);
        probe.set_coord(i, base - FD_STEP);
        let down = frozen_target_loss(inst, &probe, &targets);
        probe.set_coord(i, base);
        let numeric = (up - down) / (2.0 * FD_STEP);
        let analytic = grad.coord(i);
        let denom = analytic.abs().max(numeric.abs()).max(GRADIENT_REL_FLOOR);
        worst = worst.max((analytic - numeric).abs() / denom);
    }
    Ok(worst)
}

pub fn check_gradients(seed: u64, instances: usize, corrupt: bool) -> CheckResult {
    let mut out = CheckResult::new("gradient_fd", GRADIENT_TOL);
    let mut rng = rng_for(seed, Domain::Verify, 1);
    for _ in 0..instances {
        let inst = random_grad_instance(&mut rng);
        let err = gradient_error(&inst, corrupt).unwrap_or(f64::INFINITY);
        out.record(err, || inst.to_json());
    }
    out
}

/// Sum over classes of the population variance of the clean and augmented
/// predictions, computed with the two-pass formula.
pub fn two_pass_inconsistency(probs: &[Vec<f64>]) -> f64 {
    let m = probs.len() as f64;
    let classes = probs[0].len();
    (0..classes)
        .map(|c| {
            let mean = probs.iter().map(|p| p[c]).sum::<f64>() / m;
            probs.iter().map(|p| (p[c] - mean).powi(2)).sum::<f64>() / m
        })
        .sum()
}

pub fn check_consistency_scores(seed: u64, instances: usize) -> CheckResult {
    let mut out = CheckResult::new("consistency_two_pass", VARIANCE_TOL);
    let mut rng = rng_for(seed, Domain::Verify, 2);
    for _ in 0..instances {
        let d = rng.gen_range(1..=5);
        let h = rng.gen_range(1..=8);
        let j = rng.gen_range(2..=6);
        let activation = if rng.gen_bool(0.5) {
            Activation::Tanh
        } else {
            Activation::Relu
        };
        let scale = rng.gen_range(0.2..3.0);
        let params = init_params(rng.gen(), d, h, j, scale, activation).expect("valid dims");
        let x = normals(&mut rng, d);
        let augs: Vec<Vec<f64>> = (0..rng.gen_range(1..=12))
            .map(|_| x.iter().map(|v| v + 0.5 * normal(&mut rng)).collect())
            .collect();
        let got = consistency_score(&params, &x, &augs);
        let probs: Vec<Vec<f64>> = std::iter::once(&x)
            .chain(&augs)
            .map(|v| forward(&params, v).expect("valid").probs)
            .collect();
        let want = two_pass_inconsistency(&probs);
        let err = got.map_or(f64::INFINITY, |g| (g - want).abs());
        out.record(
            err,
            || json!({"params": params_json(&params), "x": x, "augs": augs, "expected": want}),
        );
    }
    out
}

/// Best subset sum over all size-`k` subsets, and how many subsets attain it.
fn best_subset(scores: &[f64], k: usize) -> (f64, Vec<usize>, usize) {
    let n = scores.len();
    let mut best = f64::NEG_INFINITY;
    let mut arg = Vec::new();
    let mut ties = 0;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let members: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let s: f64 = members.iter().map(|&i| scores[i]).sum();
        if s > best + 1e-12 {
            best = s;
            arg = members;
            ties = 1;
        } else if (s - best).abs() <= 1e-12 {
            ties += 1;
        }
    }
    (best, arg, ties)
}

pub fn check_topk(seed: u64, instances: usize) -> CheckResult {
    let mut out = CheckResult::new("topk_enumeration", TOPK_TOL);
    let mut rng = rng_for(seed, Domain::Verify, 3);
    for _ in 0..instances {
        let n = rng.gen_range(1..=12);
        let k = rng.gen_range(1..=4.min(n));
        let coarse = rng.gen_bool(0.3);
        let mut ids: Vec<usize> = (0..40).collect();
        ids.shuffle(&mut rng);
        let scores: Vec<f64> = (0..n)
            .map(|_| {
                let s: f64 = rng.gen_range(0.0..1.0);
                if coarse {
                    (s * 4.0).round() / 4.0
                } else {
                    s
                }
            })
            .collect();
        let table = ScoreTable {
            strategy: Strategy::Consistency,
            seed,
            scores: ids[..n]
                .iter()
                .copied()
                .zip(scores.iter().copied())
                .collect(),
        };
        let (best, arg, ties) = best_subset(&scores, k);
        let err = match select_topk(&table, k) {
            Ok(chosen) => {
                let got: f64 = chosen
                    .iter()
                    .map(|i| table.get(*i).unwrap_or(f64::NAN))
                    .sum();
                let mut want: Vec<usize> = arg.iter().map(|&p| ids[p]).collect();
                let mut have = chosen.clone();
                want.sort_unstable();
                have.sort_unstable();
                let distinct = chosen.len() == k && have.windows(2).all(|w| w[0] != w[1]);
                if !distinct || (ties == 1 && want != have) {
                    f64::INFINITY
                } else {
                    (got - best).abs()
                }
            }
            Err(_) => f64::INFINITY,
        };
        out.record(
            err,
            || json!({"scores": table.scores, "k": k, "best": best}),
        );
    }
    out
}

/// `R_H` computed straight from its definition, `-sum_x p(x) sum_y p(y|x) ln q(y|x)`.
fn direct_risk(joint: &DiscreteJoint, classifier: &[Vec<f64>]) -> f64 {
    let mut r = 0.0;
    for (x, &px) in joint.p_x.iter().enumerate() {
        for (y, &p) in joint.p_y_given_x[x].iter().enumerate() {
            if px * p > 0.0 {
                r -= px * p * classifier[x][y].ln();
            }
        }
    }
    r
}

pub fn check_prop1(seed: u64, instances: usize) -> CheckResult {
    let mut out = CheckResult::new("target_loss_bracket", BRACKET_TOL);
    let mut rng = rng_for(seed, Domain::Verify, 4);
    for _ in 0..instances {
        let nx = rng.gen_range(1..=8);
        let ny = rng.gen_range(1..=8);
        let joint = DiscreteJoint {
            p_x: random_distribution(&mut rng, nx, true),
            p_y_given_x: (0..nx)
                .map(|_| random_distribution(&mut rng, ny, true))
                .collect(),
        };
        let classifier: Vec<Vec<f64>> = (0..nx)
            .map(|_| random_distribution(&mut rng, ny, false))
            .collect();
        let err = match verify_prop1(&joint, &classifier) {
            Ok(b) => {
                let risk = direct_risk(&joint, &classifier);
                let scale = 1.0 + risk.abs();
                let below = (b.lower - risk).max(0.0);
                let above = (risk - b.upper).max(0.0);
                below.max(above).max((b.risk - risk).abs()) / scale
            }
            Err(_) => f64::INFINITY,
        };
        out.record(err, || json!({"joint": joint, "classifier": classifier}));
    }
    out
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(u, v)| (u - v) * (u - v))
        .sum::<f64>()
        .sqrt()
}

fn covering_radius(points: &[Vec<f64>], centers: &[usize]) -> f64 {
    points
        .iter()
        .map(|p| {
            centers
                .iter()
                .map(|&c| dist(p, &points[c]))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Smallest covering radius over every choice of `k` candidates added to `anchors`.
fn optimal_radius(points: &[Vec<f64>], anchors: &[usize], candidates: &[usize], k: usize) -> f64 {
    let n = candidates.len();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let mut centers = anchors.to_vec();
        centers.extend((0..n).filter(|i| mask >> i & 1 == 1).map(|i| candidates[i]));
        best = best.min(covering_radius(points, &centers));
    }
    best
}

pub fn check_kcenter(seed: u64, instances: usize) -> CheckResult {
    let mut out = CheckResult::new("kcenter_2approx", KCENTER_TOL);
    let mut rng = rng_for(seed, Domain::Verify, 5);
    for _ in 0..instances {
        let n = rng.gen_range(2..=10);
        let dim = rng.gen_range(1..=3);
        let points: Vec<Vec<f64>> = (0..n).map(|_| normals(&mut rng, dim)).collect();
        let n_anchor = rng.gen_range(1..n);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let (anchors, candidates) = order.split_at(n_anchor);
        let k = rng.gen_range(1..=3.min(candidates.len()));
        let err = match kcenter_greedy(&points, anchors, candidates, k) {
            Ok(picks) => {
                let mut centers = anchors.to_vec();
                centers.extend(picks.iter().map(|p| p.idx));
                let greedy = covering_radius(&points, &centers);
                let opt = optimal_radius(&points, anchors, candidates, k);
                (greedy - 2.0 * opt).max(0.0)
            }
            Err(_) => f64::INFINITY,
        };
        out.record(
            err,
            || json!({"points": points, "anchors": anchors, "candidates": candidates, "k": k}),
        );
    }
    out
}

/// Instance counts used by [`run_all`].
pub const DEFAULT_INSTANCES: [(&str, usize); 5] = [
    ("gradient_fd", 100),
    ("consistency_two_pass", 1000),
    ("topk_enumeration", 200),
    ("target_loss_bracket", 100),
    ("kcenter_2approx", 100),
];

pub fn run_all(opts: VerifyOptions) -> Vec<CheckResult> {
    let s = |salt| derive_seed(opts.seed, salt);
    vec![
        check_gradients(s(1), DEFAULT_INSTANCES[0].1, opts.corrupt_gradient),
        check_consistency_scores(s(2), DEFAULT_INSTANCES[1].1),
        check_topk(s(3), DEFAULT_INSTANCES[2].1),
        check_prop1(s(4), DEFAULT_INSTANCES[3].1),
        check_kcenter(s(5), DEFAULT_INSTANCES[4].1),
    ]
}

pub fn render_table(results: &[CheckResult]) -> String {
    let mut s = format!(
        "{:<22} {:>9} {:>12} {:>10}  status\n",
        "check", "instances", "max_error", "tolerance"
    );
    for r in results {
        s += &format!(
            "{:<22} {:>9} {:>12.3e} {:>10.0e}  {}\n",
            r.name,
            r.instances,
            r.max_error,
            r.tolerance,
            if r.passed { "pass" } else { "FAIL" }
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suites_pass() {
        for r in [
            check_gradients(1, 10, false),
            check_consistency_scores(1, 50),
            check_topk(1, 50),
            check_prop1(1, 50),
            check_kcenter(1, 30),
        ] {
            assert!(r.passed, "{} failed: {:?}", r.name, r.failing_instance);
        }
    }

    #[test]
    fn corrupted_gradient_is_caught() {
        let r = check_gradients(1, 5, true);
        assert!(!r.passed);
        assert!(r.failing_instance.is_some());
    }

    #[test]
    fn two_pass_variance_by_hand() {
        // Class 0 values 0.2, 0.6 -> variance 0.04; class 1 mirrors it.
        let v = two_pass_inconsistency(&[vec![0.2, 0.8], vec![0.6, 0.4]]);
        assert!((v - 0.08).abs() < 1e-15);
    }
}
