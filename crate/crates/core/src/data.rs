//! Datasets: the 3×3 toy Gaussian grid, IDX (MNIST-style) ingestion,
//! normalization records and stratified subsets.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::latent::{standard_normal_vec, GaussianMixture};
use crate::nn::Tensor;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Default toy variance and sample count.
pub const TOY_VARIANCE: f64 = 0.1;
pub const TOY_SAMPLES: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modality {
    Points,
    Images {
        height: usize,
        width: usize,
        channels: usize,
    },
}

/// Per-feature affine map `normalized = raw * scale + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub scale: Vec<f64>,
    pub offset: Vec<f64>,
}

impl Normalization {
    pub fn identity(dim: usize) -> Self {
        Normalization {
            scale: vec![1.0; dim],
            offset: vec![0.0; dim],
        }
    }

    /// Byte pixels `0..=255` onto `[-1, 1]`.
    pub fn pixels(dim: usize) -> Self {
        Normalization {
            scale: vec![1.0 / 127.5; dim],
            offset: vec![-1.0; dim],
        }
    }

    /// Maps each feature's observed `[min, max]` onto `[-1, 1]`; constant
    /// features are only shifted.
    pub fn fit(samples: &Tensor) -> Self {
        let dim = samples.cols();
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for r in 0..samples.rows() {
            for (j, &v) in samples.row(r).iter().enumerate() {
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
        let mut scale = Vec::with_capacity(dim);
        let mut offset = Vec::with_capacity(dim);
        for j in 0..dim {
            let span = hi[j] - lo[j];
            if span > 0.0 && span.is_finite() {
                scale.push(2.0 / span);
                offset.push(-1.0 - 2.0 * lo[j] / span);
            } else {
                let mid = if lo[j].is_finite() { lo[j] } else { 0.0 };
                scale.push(1.0);
                offset.push(-mid);
            }
        }
        Normalization { scale, offset }
    }

    pub fn dim(&self) -> usize {
        self.scale.len()
    }

    pub fn normalize(&self, samples: &Tensor) -> Result<Tensor> {
        self.map(samples, |v, s, o| v * s + o)
    }

    pub fn denormalize(&self, samples: &Tensor) -> Result<Tensor> {
        self.map(samples, |v, s, o| (v - o) / s)
    }

    fn map(&self, samples: &Tensor, f: impl Fn(f64, f64, f64) -> f64) -> Result<Tensor> {
        if samples.cols() != self.dim() {
            return Err(Error::Dimension(format!(
                "normalization over {} features applied to {:?}",
                self.dim(),
                samples.shape()
            )));
        }
        let dim = self.dim();
        let data = samples
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| f(v, self.scale[i % dim], self.offset[i % dim]))
            .collect();
        Tensor::new(samples.shape().to_vec(), data)
    }
}

/// Samples are stored flat as `n × dim` rows; image datasets carry their
/// `H×W×C` layout (row-major, channels last) in `modality`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Tensor,
    labels: Option<Vec<usize>>,
    classes: usize,
    modality: Modality,
    normalization: Normalization,
}

impl Dataset {
    pub fn new(
        samples: Tensor,
        labels: Option<Vec<usize>>,
        classes: usize,
        modality: Modality,
        normalization: Normalization,
    ) -> Result<Self> {
        let samples = samples.clone().reshape(vec![samples.rows(), samples.cols()])?;
        let dim = samples.cols();
        if let Some(l) = &labels {
            if l.len() != samples.rows() {
                return Err(Error::Dimension(format!(
                    "{} labels for {} samples",
                    l.len(),
                    samples.rows()
                )));
            }
            if let Some(bad) = l.iter().find(|&&y| y >= classes) {
                return Err(Error::Parameter(format!(
                    "label {bad} outside [0, {classes})"
                )));
            }
        }
        if let Modality::Images {
            height,
            width,
            channels,
        } = modality
        {
            if height == 0 || width == 0 || channels == 0 || height * width * channels != dim {
                return Err(Error::Dimension(format!(
                    "image layout {height}×{width}×{channels} does not match {dim} features"
                )));
            }
        }
        if normalization.dim() != dim {
            return Err(Error::Dimension(format!(
                "normalization over {} features for {dim}-wide samples",
                normalization.dim()
            )));
        }
        Ok(Dataset {
            samples,
            labels,
            classes,
            modality,
            normalization,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.samples.cols()
    }

    pub fn samples(&self) -> &Tensor {
        &self.samples
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        self.samples.row(i)
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Number of label classes (0 for unlabeled data).
    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn normalization(&self) -> &Normalization {
        &self.normalization
    }

    /// Same samples without labels.
    pub fn unlabeled(&self) -> Dataset {
        Dataset {
            labels: None,
            classes: 0,
            ..self.clone()
        }
    }

    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: self.samples.select_rows(indices),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
            ..self.clone()
        }
    }

    pub fn class_counts(&self) -> Option<Vec<usize>> {
        let labels = self.labels.as_ref()?;
        let mut counts = vec![0; self.classes];
        labels.iter().for_each(|&y| counts[y] += 1);
        Some(counts)
    }

    /// CSV with header `x0,...,x{dim-1},label`; the label column is empty
    /// for unlabeled data.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header: Vec<String> = (0..self.dim()).map(|j| format!("x{j}")).collect();
        writeln!(out, "{},label", header.join(","))?;
        for i in 0..self.len() {
            let row: Vec<String> = self.sample(i).iter().map(|v| v.to_string()).collect();
            let label = self
                .labels
                .as_ref()
                .map(|l| l[i].to_string())
                .unwrap_or_default();
            writeln!(out, "{},{label}", row.join(","))?;
        }
        Ok(())
    }
}

/// The nine grid means `{-1,0,1}²`, component `3i + j` at `(grid[i], grid[j])`.
pub fn toy_means() -> Vec<Vec<f64>> {
    let grid = [-1.0, 0.0, 1.0];
    let mut means = Vec::with_capacity(9);
    for &a in &grid {
        for &b in &grid {
            means.push(vec![a, b]);
        }
    }
    means
}

/// The toy data distribution as an equally weighted isotropic mixture.
pub fn toy_mixture(variance: f64) -> Result<GaussianMixture> {
    GaussianMixture::isotropic(toy_means(), variance, vec![1.0 / 9.0; 9])
}

/// `n` labeled points from the 3×3 grid mixture with isotropic `variance`.
pub fn gen_toy<R: Rng + ?Sized>(n: usize, variance: f64, rng: &mut R) -> Result<Dataset> {
    if !(variance >= 0.0) || !variance.is_finite() {
        return Err(Error::Parameter(format!("toy variance must be ≥ 0, got {variance}")));
    }
    let means = toy_means();
    let sd = variance.sqrt();
    let mut data = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let k = rng.random_range(0..9);
        let eps = standard_normal_vec(2, rng);
        data.push(means[k][0] + sd * eps[0]);
        data.push(means[k][1] + sd * eps[1]);
        labels.push(k);
    }
    Dataset::new(
        Tensor::new(vec![n, 2], data)?,
        Some(labels),
        9,
        Modality::Points,
        Normalization::identity(2),
    )
}

fn read_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::format(offset as u64, format!("truncated {what}")))
}

/// Parses an IDX image file into `n × (rows·cols)` values in `[-1, 1]`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(Tensor, usize, usize)> {
    let magic = read_u32(bytes, 0, "magic")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::format(
            0,
            format!("expected image magic 0x{IDX_IMAGES_MAGIC:08x}, found 0x{magic:08x}"),
        ));
    }
    let n = read_u32(bytes, 4, "image count")? as usize;
    let rows = read_u32(bytes, 8, "row count")? as usize;
    let cols = read_u32(bytes, 12, "column count")? as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::format(8, format!("zero image dimension {rows}×{cols}")));
    }
    let body = &bytes[16..];
    let need = n * rows * cols;
    if body.len() < need {
        return Err(Error::format(
            bytes.len() as u64,
            format!("truncated pixel data: {} of {need} bytes", body.len()),
        ));
    }
    if body.len() > need {
        return Err(Error::format(
            (16 + need) as u64,
            format!("{} trailing bytes after pixel data", body.len() - need),
        ));
    }
    let data = body.iter().map(|&p| f64::from(p) / 127.5 - 1.0).collect();
    Ok((Tensor::new(vec![n, rows * cols], data)?, rows, cols))
}

/// Parses an IDX label file.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    let magic = read_u32(bytes, 0, "magic")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::format(
            0,
            format!("expected label magic 0x{IDX_LABELS_MAGIC:08x}, found 0x{magic:08x}"),
        ));
    }
    let n = read_u32(bytes, 4, "label count")? as usize;
    let body = &bytes[8..];
    if body.len() < n {
        return Err(Error::format(
            bytes.len() as u64,
            format!("truncated labels: {} of {n} bytes", body.len()),
        ));
    }
    if body.len() > n {
        return Err(Error::format(
            (8 + n) as u64,
            format!("{} trailing bytes after labels", body.len() - n),
        ));
    }
    Ok(body.iter().map(|&b| usize::from(b)).collect())
}

/// Loads an IDX image file and optional label file into a normalized
/// image dataset. The class count is `max label + 1`.
pub fn load_idx(images_path: &Path, labels_path: Option<&Path>) -> Result<Dataset> {
    let (samples, rows, cols) = parse_idx_images(&std::fs::read(images_path)?)?;
    let labels = match labels_path {
        Some(p) => {
            let labels = parse_idx_labels(&std::fs::read(p)?)?;
            if labels.len() != samples.rows() {
                return Err(Error::format(
                    4,
                    format!(
                        "label file holds {} labels for {} images",
                        labels.len(),
                        samples.rows()
                    ),
                ));
            }
            Some(labels)
        }
        None => None,
    };
    let classes = labels
        .as_ref()
        .and_then(|l| l.iter().max().map(|m| m + 1))
        .unwrap_or(0);
    let dim = rows * cols;
    Dataset::new(
        samples,
        labels,
        classes,
        Modality::Images {
            height: rows,
            width: cols,
            channels: 1,
        },
        Normalization::pixels(dim),
    )
}

/// Exactly `per_class` samples of every class, chosen by a seeded shuffle;
/// the result keeps the original sample order.
pub fn subset(ds: &Dataset, per_class: usize, seed: u64) -> Result<Dataset> {
    let labels = ds
        .labels()
        .ok_or_else(|| Error::Parameter("subset needs a labeled dataset".into()))?;
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.classes()];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::with_capacity(per_class * ds.classes());
    for (class, mut members) in by_class.into_iter().enumerate() {
        if members.len() < per_class {
            return Err(Error::Parameter(format!(
                "class {class} has {} samples, {per_class} requested",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        chosen.extend_from_slice(&members[..per_class]);
    }
    chosen.sort_unstable();
    Ok(ds.select(&chosen))
}
