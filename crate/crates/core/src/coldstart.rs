//! Cold-start analysis.
//!
//! The quantity active learning ultimately cares about is the cross-entropy
//! of the model on the fully labeled training set (the *target loss*). It is
//! unobservable mid-run, but it is bracketed by the label-free measure
//! `H[p(Y), p(Y_hat)]`:
//!
//! ```text
//! H[p(Y), p(Y_hat)] - H[p(X)] <= R_H <= H[p(Y), p(Y_hat)] - H[p(X)] - log Z_hat
//! Z_hat = min_{x,y} p(X = x | Y_hat = y)
//! ```
//!
//! [`verify_prop1`] checks the bracket by exact enumeration on discrete
//! instances; on continuous data only the measure itself is tracked.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::al::{train_cycle, ALConfig};
use crate::data::{fmt_f64, Dataset};
use crate::error::{Error, Result};
use crate::nn::{forward, init_params, ModelParams, PROB_FLOOR};
use crate::pool::{nested_balanced_order, PoolState};

const DIST_TOL: f64 = 1e-9;

fn check_distribution(what: &str, p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::invalid(format!("{what}: empty distribution")));
    }
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::invalid(format!(
            "{what}: entries must be finite and >= 0"
        )));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > DIST_TOL {
        return Err(Error::invalid(format!("{what}: sums to {s}, not 1")));
    }
    Ok(())
}

/// Mean negative log-likelihood of the true labels over all of `ds`.
/// Evaluation only: it reads every ground-truth label.
pub fn al_target_loss(params: &ModelParams, ds: &Dataset) -> Result<f64> {
    let total: f64 = (0..ds.len())
        .into_par_iter()
        .map(|i| {
            let p = forward(params, ds.row(i))?.probs;
            Ok(-p[ds.true_labels()[i]].max(PROB_FLOOR).ln())
        })
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum();
    Ok(total / ds.len() as f64)
}

/// `p(Y_hat)`: the model's softmax output averaged over every sample. No
/// labels are used.
pub fn pred_marginal(params: &ModelParams, ds: &Dataset) -> Result<Vec<f64>> {
    let rows = (0..ds.len())
        .into_par_iter()
        .map(|i| Ok(forward(params, ds.row(i))?.probs))
        .collect::<Result<Vec<_>>>()?;
    let mut m = vec![0.0; params.classes()];
    for probs in rows {
        m.iter_mut().zip(probs).for_each(|(a, p)| *a += p);
    }
    let n = ds.len() as f64;
    m.iter_mut().for_each(|v| *v /= n);
    Ok(m)
}

/// `H[p, q] = -sum_l p_l log q_l`, with `q` clamped at [`PROB_FLOOR`].
pub fn measure_cross_entropy(prior: &[f64], marginal: &[f64]) -> Result<f64> {
    check_distribution("prior", prior)?;
    check_distribution("predicted marginal", marginal)?;
    if prior.len() != marginal.len() {
        return Err(Error::DimensionMismatch {
            what: "class distributions",
            expected: prior.len(),
            got: marginal.len(),
        });
    }
    Ok(-prior
        .iter()
        .zip(marginal)
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, q)| p * q.max(PROB_FLOOR).ln())
        .sum::<f64>())
}

/// Assumed label distribution `p(Y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    #[default]
    Uniform,
    /// Class frequencies of the revealed start-set labels.
    StartSet,
}

impl std::str::FromStr for PriorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(PriorKind::Uniform),
            "start_set" => Ok(PriorKind::StartSet),
            other => Err(Error::invalid(format!("unknown prior `{other}`"))),
        }
    }
}

impl PriorKind {
    pub fn name(self) -> &'static str {
        match self {
            PriorKind::Uniform => "uniform",
            PriorKind::StartSet => "start_set",
        }
    }

    pub fn resolve(self, classes: usize, start: &PoolState) -> Vec<f64> {
        match self {
            PriorKind::Uniform => vec![1.0 / classes as f64; classes],
            PriorKind::StartSet => {
                let counts = start.label_histogram(classes);
                let n: usize = counts.iter().sum();
                if n == 0 {
                    return vec![1.0 / classes as f64; classes];
                }
                counts.iter().map(|&c| c as f64 / n as f64).collect()
            }
        }
    }
}

/// A finite joint distribution `p(X, Y)` given as `p(X)` and rows `p(Y | X = x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteJoint {
    pub p_x: Vec<f64>,
    pub p_y_given_x: Vec<Vec<f64>>,
}

impl DiscreteJoint {
    pub fn p_y(&self) -> Vec<f64> {
        let classes = self.p_y_given_x.first().map_or(0, Vec::len);
        let mut py = vec![0.0; classes];
        for (px, row) in self.p_x.iter().zip(&self.p_y_given_x) {
            py.iter_mut().zip(row).for_each(|(a, p)| *a += px * p);
        }
        py
    }
}

/// Result of checking the target-loss bracket on one discrete instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub lower: f64,
    /// `R_H = E_X H[p(Y|X), p(Y_hat|X)]`.
    pub risk: f64,
    pub upper: f64,
    pub z_hat: f64,
    pub h_px: f64,
    /// `H[p(Y), p(Y_hat)]`.
    pub cross_entropy: f64,
}

impl BoundCheck {
    /// `lower <= risk <= upper` up to `slack` of floating-point rounding.
    pub fn holds(&self, slack: f64) -> bool {
        self.lower <= self.risk + slack && self.risk <= self.upper + slack
    }
}

/// Maximum support size accepted by [`verify_prop1`].
pub const MAX_SUPPORT: usize = 32;

/// Exact enumeration of the bracket quantities. `classifier[x]` is
/// `p(Y_hat | X = x)`.
pub fn verify_prop1(joint: &DiscreteJoint, classifier: &[Vec<f64>]) -> Result<BoundCheck> {
    let nx = joint.p_x.len();
    if nx == 0 || nx > MAX_SUPPORT {
        return Err(Error::invalid(format!(
            "X support must have 1..={MAX_SUPPORT} states, got {nx}"
        )));
    }
    check_distribution("p(X)", &joint.p_x)?;
    if joint.p_y_given_x.len() != nx || classifier.len() != nx {
        return Err(Error::DimensionMismatch {
            what: "conditional rows",
            expected: nx,
            got: joint.p_y_given_x.len().min(classifier.len()),
        });
    }
    let ny = joint.p_y_given_x[0].len();
    if ny == 0 || ny > MAX_SUPPORT {
        return Err(Error::invalid(format!(
            "Y support must have 1..={MAX_SUPPORT} states, got {ny}"
        )));
    }
    for (x, (row, qrow)) in joint.p_y_given_x.iter().zip(classifier).enumerate() {
        if row.len() != ny || qrow.len() != ny {
            return Err(Error::DimensionMismatch {
                what: "class support",
                expected: ny,
                got: row.len().min(qrow.len()),
            });
        }
        check_distribution(&format!("p(Y | X = {x})"), row)?;
        check_distribution(&format!("p(Y_hat | X = {x})"), qrow)?;
    }

    let p_y = joint.p_y();
    let mut q_y = vec![0.0; ny];
    for (px, qrow) in joint.p_x.iter().zip(classifier) {
        q_y.iter_mut().zip(qrow).for_each(|(a, q)| *a += px * q);
    }
    if let Some(y) = q_y.iter().position(|&q| q <= 0.0) {
        let x = joint.p_x.iter().position(|&p| p > 0.0).unwrap_or(0);
        return Err(Error::ZeroConditional { x, y });
    }

    // Z_hat via Bayes: p(X = x | Y_hat = y) = p(Y_hat = y | x) p(x) / p(Y_hat = y).
    let mut z_hat = f64::INFINITY;
    for (px, qrow) in joint.p_x.iter().zip(classifier) {
        for (q, qy) in qrow.iter().zip(&q_y) {
            z_hat = z_hat.min(q * px / qy);
        }
    }

    let xlogy = |p: f64, q: f64| if p == 0.0 { 0.0 } else { -p * q.ln() };
    let h_px: f64 = joint.p_x.iter().map(|&p| xlogy(p, p)).sum();
    let cross_entropy: f64 = p_y.iter().zip(&q_y).map(|(&p, &q)| xlogy(p, q)).sum();
    let risk: f64 = joint
        .p_x
        .iter()
        .zip(joint.p_y_given_x.iter().zip(classifier))
        .map(|(&px, (row, qrow))| {
            px * row
                .iter()
                .zip(qrow)
                .map(|(&p, &q)| xlogy(p, q))
                .sum::<f64>()
        })
        .sum();
    let lower = cross_entropy - h_px;
    Ok(BoundCheck {
        lower,
        risk,
        upper: lower - z_hat.ln(),
        z_hat,
        h_px,
        cross_entropy,
    })
}

/// One point of a start-size sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureRecord {
    pub labeled_count: usize,
    pub seed: u64,
    pub measure_h: f64,
    /// Evaluation only: computed with every training label.
    pub target_loss: f64,
    pub assumed_prior: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartSizeRecommendation {
    pub size: usize,
    pub converged: bool,
    /// `|H_i - H_{i-1}|` for each consecutive pair of measurements.
    pub deltas: Vec<f64>,
}

/// Smallest size whose change in `H` from the previous measurement is at
/// most `epsilon`; otherwise the largest size, flagged as not converged.
pub fn start_size_rule(records: &[MeasureRecord], epsilon: f64) -> Result<StartSizeRecommendation> {
    if records.len() < 2 {
        return Err(Error::invalid(
            "the start-size rule needs at least 2 measurements",
        ));
    }
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::invalid("epsilon must be >= 0"));
    }
    if records
        .windows(2)
        .any(|w| w[1].labeled_count <= w[0].labeled_count)
    {
        return Err(Error::invalid(
            "measurements must have strictly increasing labeled counts",
        ));
    }
    let deltas: Vec<f64> = records
        .windows(2)
        .map(|w| (w[1].measure_h - w[0].measure_h).abs())
        .collect();
    let hit = deltas.iter().position(|&d| d <= epsilon);
    Ok(match hit {
        Some(i) => StartSizeRecommendation {
            size: records[i + 1].labeled_count,
            converged: true,
            deltas,
        },
        None => StartSizeRecommendation {
            size: records.last().unwrap().labeled_count,
            converged: false,
            deltas,
        },
    })
}

/// Trains one model per start size on nested, class-balanced start sets and
/// records the measure next to the target loss.
///
/// Every size starts from the same initialization (`config.seed`); the start
/// set for a size is a prefix of one class-interleaved ordering, so larger
/// sets contain the smaller ones.
pub fn sweep_start_sizes(
    ds: &Dataset,
    sizes: &[usize],
    config: &ALConfig,
) -> Result<Vec<MeasureRecord>> {
    if sizes.is_empty() {
        return Err(Error::Empty("size list"));
    }
    if sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("sweep sizes must be strictly increasing"));
    }
    if sizes[0] == 0 || *sizes.last().unwrap() > ds.len() {
        return Err(Error::invalid(format!(
            "sweep sizes must lie in 1..={}",
            ds.len()
        )));
    }
    let order = nested_balanced_order(ds, config.seed);
    let init = init_params(
        config.seed,
        ds.input_dim(),
        config.hidden_dim,
        ds.classes(),
        config.init_scale,
        config.activation,
    )?;
    let mut cfg = config.clone();
    cfg.warm_start = true;
    sizes
        .par_iter()
        .map(|&size| {
            let pool = PoolState::from_start_set(ds, &order[..size])?;
            let params = train_cycle(&init, &pool, ds, &cfg, 0)?;
            let prior = config.prior.resolve(ds.classes(), &pool);
            Ok(MeasureRecord {
                labeled_count: size,
                seed: config.seed,
                measure_h: measure_cross_entropy(&prior, &pred_marginal(&params, ds)?)?,
                target_loss: al_target_loss(&params, ds)?,
                assumed_prior: prior,
            })
        })
        .collect()
}

/// Averages records over seeds, per size, in increasing size order.
pub fn mean_by_size(records: &[MeasureRecord]) -> Vec<MeasureRecord> {
    let mut sizes: Vec<usize> = records.iter().map(|r| r.labeled_count).collect();
    sizes.sort_unstable();
    sizes.dedup();
    sizes
        .into_iter()
        .map(|size| {
            let group: Vec<&MeasureRecord> =
                records.iter().filter(|r| r.labeled_count == size).collect();
            let n = group.len() as f64;
            MeasureRecord {
                labeled_count: size,
                seed: group[0].seed,
                measure_h: group.iter().map(|r| r.measure_h).sum::<f64>() / n,
                target_loss: group.iter().map(|r| r.target_loss).sum::<f64>() / n,
                assumed_prior: group[0].assumed_prior.clone(),
            }
        })
        .collect()
}

/// Pearson correlation; `None` when either input is constant or lengths differ.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt())
}

/// Rows `size,seed,measure_H,target_loss`.
pub fn sweep_csv(records: &[MeasureRecord]) -> String {
    let mut out = String::from("size,seed,measure_H,target_loss\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.labeled_count,
            r.seed,
            fmt_f64(r.measure_h),
            fmt_f64(r.target_loss)
        );
    }
    out
}
