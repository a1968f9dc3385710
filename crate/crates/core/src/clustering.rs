//! Clustering with a trained GM-GAN: each mixture component generates a
//! labeled synthetic set, a classifier learns to tell components apart, and
//! real samples are assigned to the component the classifier picks.
//! Also hosts the ACC and NMI clustering metrics.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, Modality, Normalization};
use crate::error::{Error, Result};
use crate::gan::{GanArchitecture, GanModel};
use crate::latent::{MixturePrior, SigmaScale};
use crate::nn::Tensor;
use crate::scorer::{train_classifier, ClassifierConfig};
use crate::trainer::{TrainConfig, TrainState, Variant};

/// Default synthetic samples per component.
pub const DEFAULT_SAMPLES_PER_COMPONENT: usize = 1000;

/// `M` generated samples from every component, labeled by component index.
pub fn generate_labeled_synthetic<R: Rng + ?Sized>(
    model: &GanModel,
    prior: &MixturePrior,
    m: usize,
    modality: Modality,
    rng: &mut R,
) -> Result<Dataset> {
    if m == 0 {
        return Err(Error::Parameter("need at least one sample per component".into()));
    }
    let k = prior.components();
    let dim = model.data_dim();
    let mut data = Vec::with_capacity(k * m * dim);
    let mut labels = Vec::with_capacity(k * m);
    for c in 0..k {
        let z = prior.sample_from_component(c, m, SigmaScale::ONE, rng)?;
        let comps = vec![c; m];
        let x = model.generate_for(&z, Some(&comps))?;
        data.extend_from_slice(x.data());
        labels.extend(comps);
    }
    Dataset::new(
        Tensor::new(vec![k * m, dim], data)?,
        Some(labels),
        k,
        modality,
        Normalization::identity(dim),
    )
}

/// Counts of (true class, cluster) pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    pub classes: usize,
    pub clusters: usize,
    /// Row-major `classes × clusters`.
    pub counts: Vec<u64>,
}

impl ContingencyTable {
    pub fn new(truth: &[usize], clusters: &[usize], n: usize, k: usize) -> Result<Self> {
        if truth.len() != clusters.len() {
            return Err(Error::Dimension(format!(
                "{} labels vs {} cluster ids",
                truth.len(),
                clusters.len()
            )));
        }
        let mut counts = vec![0u64; n * k];
        for (&y, &c) in truth.iter().zip(clusters) {
            if y >= n || c >= k {
                return Err(Error::Parameter(format!(
                    "pair ({y}, {c}) outside {n} classes × {k} clusters"
                )));
            }
            counts[y * k + c] += 1;
        }
        Ok(ContingencyTable {
            classes: n,
            clusters: k,
            counts,
        })
    }

    pub fn from_counts(rows: &[Vec<u64>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::Dimension("ragged contingency table".into()));
        }
        Ok(ContingencyTable {
            classes: rows.len(),
            clusters: k,
            counts: rows.concat(),
        })
    }

    pub fn get(&self, class: usize, cluster: usize) -> u64 {
        self.counts[class * self.clusters + cluster]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Zero-padded square matrix of side `max(classes, clusters)`.
    pub fn padded(&self) -> Vec<Vec<u64>> {
        let s = self.classes.max(self.clusters);
        (0..s)
            .map(|i| {
                (0..s)
                    .map(|j| {
                        if i < self.classes && j < self.clusters {
                            self.get(i, j)
                        } else {
                            0
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// Maximum-weight perfect matching on a square matrix. Returns the total
/// weight and `assignment[row] = column`.
pub fn max_weight_assignment(weights: &[Vec<u64>]) -> Result<(u64, Vec<usize>)> {
    let n = weights.len();
    if weights.iter().any(|r| r.len() != n) {
        return Err(Error::Dimension("assignment needs a square matrix".into()));
    }
    if n == 0 {
        return Ok((0, Vec::new()));
    }
    let top = weights.iter().flatten().copied().max().unwrap_or(0) as i128;
    // Minimize top - w with the classic potential-based Hungarian method;
    // index 0 is a sentinel, rows/columns are 1-based.
    let cost = |i: usize, j: usize| top - weights[i - 1][j - 1] as i128;
    let inf = i128::MAX / 4;
    let mut u = vec![0i128; n + 1];
    let mut v = vec![0i128; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[p[j] - 1] = j - 1;
    }
    let total = assignment.iter().enumerate().map(|(i, &j)| weights[i][j]).sum();
    Ok((total, assignment))
}

fn brute_force_assignment(weights: &[Vec<u64>]) -> (u64, Vec<usize>) {
    fn go(w: &[Vec<u64>], row: usize, used: &mut [bool], cur: &mut Vec<usize>, best: &mut (u64, Vec<usize>), acc: u64) {
        if row == w.len() {
            if acc > best.0 || best.1.is_empty() {
                *best = (acc, cur.clone());
            }
            return;
        }
        for j in 0..w.len() {
            if !used[j] {
                used[j] = true;
                cur.push(j);
                go(w, row + 1, used, cur, best, acc + w[row][j]);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut best = (0, Vec::new());
    go(weights, 0, &mut vec![false; weights.len()], &mut Vec::new(), &mut best, 0);
    best
}

/// Best one-to-one class↔cluster matching.
#[derive(Debug, Clone, PartialEq)]
pub struct AccResult {
    pub acc: f64,
    pub matched: u64,
    /// `class_of_cluster[c]`, the class matched to cluster `c` (`None` when
    /// the cluster is matched to a padding row).
    pub class_of_cluster: Vec<Option<usize>>,
}

/// Clustering accuracy on a contingency table: exhaustive search for side
/// ≤ 8, the Hungarian method otherwise.
pub fn acc_from_table(table: &ContingencyTable) -> Result<AccResult> {
    let total = table.total();
    if total == 0 {
        return Err(Error::Parameter("accuracy of an empty labeling".into()));
    }
    let padded = table.padded();
    let (matched, assignment) = if padded.len() <= 8 {
        brute_force_assignment(&padded)
    } else {
        max_weight_assignment(&padded)?
    };
    let mut class_of_cluster = vec![None; table.clusters];
    for (class, &cluster) in assignment.iter().enumerate() {
        if class < table.classes && cluster < table.clusters {
            class_of_cluster[cluster] = Some(class);
        }
    }
    Ok(AccResult {
        acc: matched as f64 / total as f64,
        matched,
        class_of_cluster,
    })
}

pub fn acc(truth: &[usize], clusters: &[usize], n: usize, k: usize) -> Result<AccResult> {
    acc_from_table(&ContingencyTable::new(truth, clusters, n, k)?)
}

fn plogp_entropy(counts: impl Iterator<Item = u64>, total: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum()
}

/// Corpus-level `I(Y;C) / √(H(Y)·H(C))`. When either entropy vanishes the
/// score is 1 for identical partitions and 0 otherwise.
pub fn nmi(truth: &[usize], clusters: &[usize]) -> Result<f64> {
    if truth.len() != clusters.len() {
        return Err(Error::Dimension(format!(
            "{} labels vs {} cluster ids",
            truth.len(),
            clusters.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Parameter("NMI of an empty labeling".into()));
    }
    let total = truth.len() as f64;
    // Ordered maps keep the summation order, and so the last bit, stable.
    let mut joint: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut ym: BTreeMap<usize, u64> = BTreeMap::new();
    let mut cm: BTreeMap<usize, u64> = BTreeMap::new();
    for (&y, &c) in truth.iter().zip(clusters) {
        *joint.entry((y, c)).or_default() += 1;
        *ym.entry(y).or_default() += 1;
        *cm.entry(c).or_default() += 1;
    }
    let hy = plogp_entropy(ym.values().copied(), total);
    let hc = plogp_entropy(cm.values().copied(), total);
    if hy == 0.0 || hc == 0.0 {
        // Identical partitions have one block per label on both sides.
        let identical = joint.len() == ym.len() && joint.len() == cm.len();
        return Ok(if identical { 1.0 } else { 0.0 });
    }
    let mut mi = 0.0;
    for (&key, &count) in &joint {
        let nyc = count as f64;
        let (ny, nc) = (ym[&key.0] as f64, cm[&key.1] as f64);
        mi += nyc / total * (nyc * total / (ny * nc)).ln();
    }
    Ok((mi / (hy * hc).sqrt()).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    /// `n × K` soft assignments.
    pub soft: Tensor,
    pub hard: Vec<usize>,
    pub acc: Option<AccResult>,
    pub nmi: Option<f64>,
    /// Hold-out accuracy of the component classifier on synthetic data.
    pub synthetic_accuracy: Option<f64>,
}

impl ClusterResult {
    /// `sample_index,hard,soft_0..soft_{K-1}`.
    pub fn write_assignments_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let k = self.soft.cols();
        let soft: Vec<String> = (0..k).map(|j| format!("soft_{j}")).collect();
        writeln!(out, "sample_index,hard,{}", soft.join(","))?;
        for (i, h) in self.hard.iter().enumerate() {
            let row: Vec<String> = self.soft.row(i).iter().map(|v| v.to_string()).collect();
            writeln!(out, "{i},{h},{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Settings for [`cluster`].
#[derive(Debug, Clone)]
pub struct ClusterConfig {
    pub train: TrainConfig,
    pub arch: GanArchitecture,
    pub classifier: ClassifierConfig,
    pub samples_per_component: usize,
}

/// Assigns each sample of `x` to one of `k` clusters. Labels of `x`, if
/// present, are used only for the returned metrics.
pub fn cluster(x: &Dataset, k: usize, cfg: &ClusterConfig) -> Result<ClusterResult> {
    if k == 0 || x.is_empty() {
        return Err(Error::Parameter("clustering needs K ≥ 1 and data".into()));
    }
    let (soft, hard, synthetic_accuracy) = if k == 1 {
        (Tensor::filled(&[x.len(), 1], 1.0), vec![0; x.len()], None)
    } else {
        let train_cfg = TrainConfig {
            variant: Variant::GmGan,
            components: k,
            ..cfg.train.clone()
        };
        let unlabeled = x.unlabeled();
        let mut state = TrainState::init(train_cfg, &cfg.arch, x.dim(), 0)?;
        let iters = state.config.iters;
        state.run(&unlabeled, iters, None, None)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.train.seed);
        rng.set_stream(1);
        let synthetic = generate_labeled_synthetic(
            &state.model,
            &state.prior,
            cfg.samples_per_component,
            x.modality(),
            &mut rng,
        )?;
        let clf = train_classifier(&synthetic, &cfg.classifier)?;
        let soft = clf.probabilities(x.samples())?;
        let hard = crate::scorer::argmax_rows(&soft);
        (soft, hard, Some(clf.holdout_accuracy))
    };
    let (acc, nmi) = match x.labels() {
        Some(labels) => (
            Some(acc(labels, &hard, x.classes(), k)?),
            Some(nmi(labels, &hard)?),
        ),
        None => (None, None),
    };
    Ok(ClusterResult {
        soft,
        hard,
        acc,
        nmi,
        synthetic_accuracy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn acc_on_two_by_two() {
        let t = ContingencyTable::from_counts(&[vec![5, 1], vec![2, 4]]).unwrap();
        let r = acc_from_table(&t).unwrap();
        assert_eq!(r.matched, 9);
        assert!((r.acc - 0.75).abs() < 1e-15);
        assert_eq!(r.class_of_cluster, vec![Some(0), Some(1)]);
    }

    #[test]
    fn hungarian_matches_exhaustive_on_fixed_tables() {
        let w = vec![vec![7, 2, 9, 0], vec![3, 8, 1, 4], vec![6, 5, 2, 9], vec![1, 1, 8, 3]];
        assert_eq!(max_weight_assignment(&w).unwrap().0, brute_force_assignment(&w).0);
        let w = vec![vec![0; 3]; 3];
        assert_eq!(max_weight_assignment(&w).unwrap().0, 0);
    }

    #[test]
    fn relabeled_clusters_score_one() {
        let y = [0, 0, 1, 1, 2, 2];
        let c = [2, 2, 0, 0, 1, 1];
        assert_eq!(acc(&y, &c, 3, 3).unwrap().acc, 1.0);
        assert!((nmi(&y, &c).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nmi_degenerate_rules() {
        assert_eq!(nmi(&[0, 0, 0], &[4, 4, 4]).unwrap(), 1.0);
        assert_eq!(nmi(&[0, 0, 0], &[0, 1, 1]).unwrap(), 0.0);
        assert_eq!(nmi(&[0, 1, 0, 1], &[0, 0, 1, 1]).unwrap(), 0.0);
    }

    #[test]
    fn padded_acc_when_k_differs() {
        // Three classes, two clusters: only two classes can be matched.
        let y = [0, 0, 1, 1, 2, 2];
        let c = [0, 0, 1, 1, 1, 1];
        let r = acc(&y, &c, 3, 2).unwrap();
        assert!((r.acc - 4.0 / 6.0).abs() < 1e-15);
    }
}
