//! Analyses of what a selection strategy picks: overconfident mistakes among
//! the top-ranked samples, entropy by rank group, diversity of the top set,
//! class balance of the picks against per-class error, and a 2-D PCA view.
//!
//! These functions read ground-truth labels; they evaluate selections and
//! are never consulted by the selection code itself.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{fmt_f64, Dataset};
use crate::error::{Error, Result};
use crate::nn::{entropy, forward, ModelParams};
use crate::selection::ScoreTable;

/// Thresholds used when none are given.
pub const DEFAULT_THRESHOLDS: [f64; 5] = [0.6, 0.7, 0.8, 0.9, 0.95];
/// Top fraction examined by default (the top 1%).
pub const DEFAULT_TOP_FRAC: f64 = 0.01;

/// Number of samples in the top `frac` of `len` ranked samples (at least one).
pub fn top_count(len: usize, frac: f64) -> usize {
    ((frac * len as f64).ceil() as usize).clamp(1, len.max(1))
}

fn check_frac(frac: f64) -> Result<()> {
    if frac > 0.0 && frac <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "fraction must lie in (0, 1], got {frac}"
        )))
    }
}

fn top_indices(ranked: &ScoreTable, frac: f64) -> Result<Vec<usize>> {
    check_frac(frac)?;
    if ranked.is_empty() {
        return Err(Error::Empty("score table"));
    }
    let n = top_count(ranked.len(), frac);
    Ok(ranked
        .ranked()
        .into_iter()
        .take(n)
        .map(|(i, _)| i)
        .collect())
}

/// For each threshold, how many of the top `frac` samples are misclassified
/// with a max class probability strictly above the threshold.
pub fn overconfident_miscount(
    params: &ModelParams,
    ds: &Dataset,
    ranked: &ScoreTable,
    frac: f64,
    thresholds: &[f64],
) -> Result<Vec<(f64, usize)>> {
    let top = top_indices(ranked, frac)?;
    let mut wrong_conf = Vec::new();
    for &i in &top {
        let pred = forward(params, ds.row(i))?;
        if pred.argmax() != ds.true_labels()[i] {
            wrong_conf.push(pred.max_prob());
        }
    }
    Ok(thresholds
        .iter()
        .map(|&t| (t, wrong_conf.iter().filter(|&&p| p > t).count()))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupEntropy {
    pub group: usize,
    pub size: usize,
    pub mean_entropy: f64,
}

/// Splits the ranking into `n_groups` contiguous groups (fewer if the pool is
/// smaller; leading groups absorb the remainder) and averages the predictive
/// entropy within each.
pub fn rank_group_entropy(
    params: &ModelParams,
    ds: &Dataset,
    ranked: &ScoreTable,
    n_groups: usize,
) -> Result<Vec<GroupEntropy>> {
    if ranked.is_empty() {
        return Err(Error::Empty("score table"));
    }
    if n_groups == 0 {
        return Err(Error::invalid("n_groups must be >= 1"));
    }
    let order = ranked.ranked();
    let groups = n_groups.min(order.len());
    let base = order.len() / groups;
    let extra = order.len() % groups;
    let mut out = Vec::with_capacity(groups);
    let mut start = 0;
    for g in 0..groups {
        let size = base + usize::from(g < extra);
        let mut sum = 0.0;
        for &(i, _) in &order[start..start + size] {
            sum += entropy(&forward(params, ds.row(i))?.probs);
        }
        out.push(GroupEntropy {
            group: g,
            size,
            mean_entropy: sum / size as f64,
        });
        start += size;
    }
    Ok(out)
}

/// Mean Euclidean distance over all unordered pairs of points.
pub fn mean_pairwise_distance(points: &[Vec<f64>]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::invalid("pairwise distance needs at least 2 points"));
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            sum += points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            pairs += 1;
        }
    }
    Ok(sum / pairs as f64)
}

/// Mean pairwise distance between hidden-layer embeddings of the top `frac`.
pub fn top_frac_diversity(
    params: &ModelParams,
    ds: &Dataset,
    ranked: &ScoreTable,
    frac: f64,
) -> Result<f64> {
    let top = top_indices(ranked, frac)?;
    let emb = top
        .iter()
        .map(|&i| Ok(forward(params, ds.row(i))?.hidden))
        .collect::<Result<Vec<_>>>()?;
    mean_pairwise_distance(&emb)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassComparison {
    /// Fraction of the selected samples belonging to each class.
    pub class_hist: Vec<f64>,
    /// Per-class test error rate.
    pub class_error: Vec<f64>,
    /// Spearman correlation of the two; `None` when either side is constant.
    pub rank_correlation: Option<f64>,
}

/// Ranks with ties sharing their average rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    crate::coldstart::pearson(&average_ranks(a), &average_ranks(b))
}

/// Class histogram of `selected` (training indices) against per-class error on `test`.
pub fn class_dist_vs_error(
    params: &ModelParams,
    test: &Dataset,
    selected: &[usize],
    train: &Dataset,
) -> Result<ClassComparison> {
    if selected.is_empty() {
        return Err(Error::Empty("selected set"));
    }
    let j = train.classes();
    let mut hist = vec![0.0; j];
    for &i in selected {
        let label = crate::data::oracle_label(train, i)?;
        hist[label] += 1.0;
    }
    hist.iter_mut().for_each(|h| *h /= selected.len() as f64);

    let mut wrong = vec![0usize; j];
    let mut total = vec![0usize; j];
    for (i, row) in test.rows().enumerate() {
        let y = test.true_labels()[i];
        total[y] += 1;
        if forward(params, row)?.argmax() != y {
            wrong[y] += 1;
        }
    }
    let class_error: Vec<f64> = wrong
        .iter()
        .zip(&total)
        .map(|(&w, &t)| if t == 0 { 0.0 } else { w as f64 / t as f64 })
        .collect();
    Ok(ClassComparison {
        rank_correlation: spearman(&hist, &class_error),
        class_hist: hist,
        class_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaProjection {
    pub coords: Vec<[f64; 2]>,
    /// Variance captured by each of the two components.
    pub variances: [f64; 2],
    pub components: [Vec<f64>; 2],
    /// Fewer than two non-negligible principal directions; second coordinate zeroed.
    pub rank_deficient: bool,
}

const POWER_TOL: f64 = 1e-9;
const POWER_MAX_ITERS: usize = 100_000;

fn mat_vec(c: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    c.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Flips `v` so that its first non-negligible entry is positive.
fn fix_sign(v: &mut [f64]) {
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Dominant eigenpair of a symmetric PSD matrix by power iteration. The
/// start vector is the column of largest norm, falling back to unit vectors.
fn power_iteration(c: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let d = c.len();
    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
    let best_col = (0..d)
        .max_by(|&a, &b| {
            let na: f64 = c.iter().map(|r| r[a] * r[a]).sum();
            let nb: f64 = c.iter().map(|r| r[b] * r[b]).sum();
            na.total_cmp(&nb).then(b.cmp(&a))
        })
        .unwrap_or(0);
    starts.push(c.iter().map(|r| r[best_col]).collect());
    starts.extend((0..d).map(|k| (0..d).map(|i| f64::from(u8::from(i == k))).collect()));

    for start in starts {
        let n0 = norm(&start);
        if n0 <= 1e-300 {
            continue;
        }
        let mut v: Vec<f64> = start.iter().map(|x| x / n0).collect();
        let mut converged = false;
        for _ in 0..POWER_MAX_ITERS {
            let w = mat_vec(c, &v);
            let nw = norm(&w);
            if nw <= 1e-300 {
                break;
            }
            let mut next: Vec<f64> = w.iter().map(|x| x / nw).collect();
            fix_sign(&mut next);
            let delta = next
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            v = next;
            if delta < POWER_TOL {
                converged = true;
                break;
            }
        }
        let lambda: f64 = v.iter().zip(mat_vec(c, &v)).map(|(a, b)| a * b).sum();
        if converged || lambda > 0.0 {
            fix_sign(&mut v);
            return (lambda.max(0.0), v);
        }
    }
    (0.0, vec![0.0; d])
}

/// Population covariance matrix of `rows`, plus the column means.
pub fn covariance(rows: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = rows.len() as f64;
    let d = rows.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; d];
    for r in rows {
        mean.iter_mut().zip(r).for_each(|(m, x)| *m += x / n);
    }
    let mut c = vec![vec![0.0; d]; d];
    for r in rows {
        let centered: Vec<f64> = r.iter().zip(&mean).map(|(x, m)| x - m).collect();
        for i in 0..d {
            for j in i..d {
                c[i][j] += centered[i] * centered[j] / n;
            }
        }
    }
    for i in 1..d {
        let lower: Vec<f64> = (0..i).map(|j| c[j][i]).collect();
        c[i][..i].copy_from_slice(&lower);
    }
    (c, mean)
}

/// Projects centered `features` onto their top two principal directions.
pub fn pca_project(features: &[Vec<f64>]) -> Result<PcaProjection> {
    let n = features.len();
    let d = features.first().map_or(0, Vec::len);
    if n < 2 || d < 2 {
        return Err(Error::invalid(format!(
            "PCA needs n >= 2 and d >= 2, got n={n}, d={d}"
        )));
    }
    if features.iter().any(|r| r.len() != d) {
        return Err(Error::invalid("ragged feature matrix"));
    }
    let (c, mean) = covariance(features);
    let (l1, v1) = power_iteration(&c);
    let deflated: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..d).map(|j| c[i][j] - l1 * v1[i] * v1[j]).collect())
        .collect();
    let (l2, mut v2) = power_iteration(&deflated);
    let trace: f64 = (0..d).map(|i| c[i][i]).sum();
    let negligible = 1e-12 * trace.max(f64::MIN_POSITIVE);
    let rank_deficient = l1 <= negligible || l2 <= negligible;
    if rank_deficient {
        v2 = vec![0.0; d];
    }
    let coords = features
        .iter()
        .map(|r| {
            let centered: Vec<f64> = r.iter().zip(&mean).map(|(x, m)| x - m).collect();
            let p = |v: &[f64]| centered.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
            [p(&v1), p(&v2)]
        })
        .collect();
    Ok(PcaProjection {
        coords,
        variances: [l1, if rank_deficient { 0.0 } else { l2 }],
        components: [v1, v2],
        rank_deficient,
    })
}

/// Shortest distance from a 2-D point to the model's decision boundary,
/// searched along `directions` evenly spaced rays up to `max_radius`
/// (coarse march, then bisection). Returns `max_radius` if no class change
/// is found.
pub fn decision_boundary_distance(
    params: &ModelParams,
    x: &[f64],
    max_radius: f64,
    directions: usize,
) -> Result<f64> {
    if x.len() != 2 {
        return Err(Error::DimensionMismatch {
            what: "boundary search input",
            expected: 2,
            got: x.len(),
        });
    }
    const MARCH: usize = 128;
    let class = forward(params, x)?.argmax();
    let mut best = max_radius;
    for k in 0..directions {
        let angle = std::f64::consts::TAU * k as f64 / directions as f64;
        let (dx, dy) = (angle.cos(), angle.sin());
        let at = |r: f64| [x[0] + r * dx, x[1] + r * dy];
        let mut inside = 0.0;
        for s in 1..=MARCH {
            if inside >= best {
                break;
            }
            let r = (max_radius * s as f64 / MARCH as f64).min(best);
            if forward(params, &at(r))?.argmax() != class {
                let (mut lo, mut hi) = (inside, r);
                for _ in 0..50 {
                    let mid = 0.5 * (lo + hi);
                    if forward(params, &at(mid))?.argmax() != class {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                best = best.min(hi);
                break;
            }
            inside = r;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub strategy: String,
    pub top_frac: f64,
    pub overconf_counts: Vec<(f64, usize)>,
    pub group_entropy: Vec<GroupEntropy>,
    pub top_frac_avg_dist: f64,
    pub class_hist: Vec<f64>,
    pub class_error: Vec<f64>,
    pub rank_correlation: Option<f64>,
    pub pca: PcaProjection,
    /// Training indices of the points shown in the PCA view.
    pub pca_indices: Vec<usize>,
    pub pca_selected: Vec<bool>,
    pub pca_classes: Vec<usize>,
}

/// File names written by [`DiagnosticsReport::write`], besides `index.json`.
pub const DIAGNOSTIC_FILES: [&str; 5] = [
    "overconfident.csv",
    "group_entropy.csv",
    "diversity.csv",
    "class_distribution.csv",
    "pca.csv",
];

/// Number of rank groups used for the entropy-by-rank curve.
pub const RANK_GROUPS: usize = 100;

/// Runs every analysis for one ranked pool. `selected` is the batch whose
/// class balance is compared with per-class error and highlighted in PCA.
#[allow(clippy::too_many_arguments)]
pub fn build_report(
    params: &ModelParams,
    train: &Dataset,
    test: &Dataset,
    ranked: &ScoreTable,
    selected: &[usize],
    top_frac: f64,
    thresholds: &[f64],
) -> Result<DiagnosticsReport> {
    let overconf_counts = overconfident_miscount(params, train, ranked, top_frac, thresholds)?;
    let group_entropy = rank_group_entropy(params, train, ranked, RANK_GROUPS)?;
    let top_frac_avg_dist = top_frac_diversity(params, train, ranked, top_frac)?;
    let cmp = class_dist_vs_error(params, test, selected, train)?;
    let pca_indices: Vec<usize> = ranked.scores.iter().map(|(i, _)| *i).collect();
    let emb = pca_indices
        .iter()
        .map(|&i| Ok(forward(params, train.row(i))?.hidden))
        .collect::<Result<Vec<_>>>()?;
    let pca = pca_project(&emb)?;
    let chosen: std::collections::HashSet<usize> = selected.iter().copied().collect();
    Ok(DiagnosticsReport {
        strategy: ranked.strategy.name().to_string(),
        top_frac,
        overconf_counts,
        group_entropy,
        top_frac_avg_dist,
        class_hist: cmp.class_hist,
        class_error: cmp.class_error,
        rank_correlation: cmp.rank_correlation,
        pca,
        pca_selected: pca_indices.iter().map(|i| chosen.contains(i)).collect(),
        pca_classes: pca_indices
            .iter()
            .map(|&i| train.true_labels()[i])
            .collect(),
        pca_indices,
    })
}

impl DiagnosticsReport {
    pub fn csv_files(&self) -> Vec<(&'static str, String)> {
        let mut over = String::from("threshold,count\n");
        for (t, c) in &self.overconf_counts {
            let _ = writeln!(over, "{},{c}", fmt_f64(*t));
        }
        let mut groups = String::from("group,size,mean_entropy\n");
        for g in &self.group_entropy {
            let _ = writeln!(groups, "{},{},{}", g.group, g.size, fmt_f64(g.mean_entropy));
        }
        let diversity = format!(
            "top_frac,avg_pairwise_distance\n{},{}\n",
            fmt_f64(self.top_frac),
            fmt_f64(self.top_frac_avg_dist)
        );
        let mut classes = String::from("class,selected_fraction,test_error\n");
        for (c, (h, e)) in self.class_hist.iter().zip(&self.class_error).enumerate() {
            let _ = writeln!(classes, "{c},{},{}", fmt_f64(*h), fmt_f64(*e));
        }
        let mut pca = String::from("x,y,true_class,selected\n");
        for ((xy, class), sel) in self
            .pca
            .coords
            .iter()
            .zip(&self.pca_classes)
            .zip(&self.pca_selected)
        {
            let _ = writeln!(
                pca,
                "{},{},{class},{}",
                fmt_f64(xy[0]),
                fmt_f64(xy[1]),
                u8::from(*sel)
            );
        }
        DIAGNOSTIC_FILES
            .iter()
            .copied()
            .zip([over, groups, diversity, classes, pca])
            .collect()
    }

    /// Writes the five CSV files and an `index.json` summary into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, body) in self.csv_files() {
            std::fs::write(dir.join(name), body)?;
        }
        let index = serde_json::json!({
            "strategy": self.strategy,
            "top_frac": self.top_frac,
            "files": DIAGNOSTIC_FILES,
            "top_frac_avg_dist": self.top_frac_avg_dist,
            "rank_correlation": self.rank_correlation,
            "rank_correlation_degenerate": self.rank_correlation.is_none(),
            "pca_variances": self.pca.variances,
            "pca_rank_deficient": self.pca.rank_deficient,
        });
        std::fs::write(
            dir.join("index.json"),
            serde_json::to_string_pretty(&index)? + "\n",
        )?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;
    use crate::selection::Strategy;

    fn table(n: usize) -> ScoreTable {
        ScoreTable {
            strategy: Strategy::Entropy,
            seed: 0,
            scores: (0..n).map(|i| (i, (n - i) as f64)).collect(),
        }
    }

    #[test]
    fn top_count_rounds_up() {
        assert_eq!(top_count(990, 0.01), 10);
        assert_eq!(top_count(50, 0.01), 1);
        assert_eq!(top_count(7, 1.0), 7);
    }

    #[test]
    fn pairwise_distance_cases() {
        assert_eq!(
            mean_pairwise_distance(&[vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap(),
            0.0
        );
        assert_eq!(
            mean_pairwise_distance(&[vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap(),
            5.0
        );
        assert!(mean_pairwise_distance(&[vec![0.0]]).is_err());
    }

    #[test]
    fn group_sizes_spread_remainder() {
        let ds = crate::data::gen_two_moons(250, 0.1, 0).unwrap();
        let p = ModelParams::zeros(2, 3, 2, Activation::Tanh);
        let g = rank_group_entropy(&p, &ds, &table(250), 100).unwrap();
        assert_eq!(g.len(), 100);
        assert_eq!(g.iter().map(|g| g.size).sum::<usize>(), 250);
        assert_eq!((g[0].size, g[49].size, g[50].size), (3, 3, 2));
        let g = rank_group_entropy(&p, &ds, &table(7), 100).unwrap();
        assert_eq!(g.len(), 7);
        assert!(g.iter().all(|g| (g.mean_entropy - 2f64.ln()).abs() < 1e-15));
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(
            average_ranks(&[3.0, 1.0, 3.0, 2.0]),
            vec![3.5, 1.0, 3.5, 2.0]
        );
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]), None);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 25.0]), Some(1.0));
    }

    #[test]
    fn pca_on_axis_aligned_data() {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                vec![
                    3.0 * ((i / 2) as f64 - 4.5),
                    if i % 2 == 0 { 1.0 } else { -1.0 },
                ]
            })
            .collect();
        let p = pca_project(&rows).unwrap();
        assert!(!p.rank_deficient);
        assert!(p.variances[0] >= p.variances[1]);
        for (r, c) in rows.iter().zip(&p.coords) {
            assert!((c[0] - r[0]).abs() < 1e-6);
            assert!((c[1].abs() - r[1].abs()).abs() < 1e-6);
        }
    }

    #[test]
    fn pca_flags_rank_deficiency() {
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![i as f64, 2.0 * i as f64, -(i as f64)])
            .collect();
        let p = pca_project(&rows).unwrap();
        assert!(p.rank_deficient);
        assert!(p.coords.iter().all(|c| c[1] == 0.0));
        assert!(pca_project(&[vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn boundary_distance_of_linear_model() {
        // Boundary is the line x0 = 0.5 for this hand-built model.
        let mut p = ModelParams::zeros(2, 1, 2, Activation::Tanh);
        p.w1 = vec![1.0, 0.0];
        p.b1 = vec![-0.5];
        p.w2 = vec![1.0, -1.0];
        let d = decision_boundary_distance(&p, &[2.0, 0.3], 5.0, 64).unwrap();
        assert!((d - 1.5).abs() < 1e-9, "{d}");
        let d = decision_boundary_distance(&p, &[-20.0, 0.0], 5.0, 16).unwrap();
        assert_eq!(d, 5.0);
    }
}
