//! Flat `key=value` experiment configuration.
//!
//! Files hold one `key=value` pair per line; blank lines and lines starting
//! with `#` are ignored. Later assignments win, so command-line overrides are
//! applied after the file. Unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gmgan_core::data::{Dataset, TOY_SAMPLES, TOY_VARIANCE};
use gmgan_core::gan::GanArchitecture;
use gmgan_core::latent::CovarianceKind;
use gmgan_core::scorer::{ClassifierConfig, MsSsimParams};
use gmgan_core::trainer::{TrainConfig, Variant};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

/// Recognized keys and a one-line description of each.
pub const KEYS: &[(&str, &str)] = &[
    ("experiment", "train | toy-convergence | sigma-sweep | score | cluster | gen-toy"),
    ("dataset", "toy | idx"),
    ("toy_samples", "number of toy points"),
    ("toy_variance", "isotropic variance of each toy Gaussian"),
    ("images", "IDX image file (dataset=idx)"),
    ("labels", "IDX label file (dataset=idx)"),
    ("per_class", "stratified subset size per class, 0 keeps everything"),
    ("variant", "baseline | supervised_baseline | gm_gan | supervised_gm_gan"),
    ("models", "comma list of variants for toy-convergence"),
    ("K", "mixture components, auto = number of classes"),
    ("d", "latent dimension"),
    ("c", "means drawn from U(-c, c)"),
    ("sigma_init", "initial per-coordinate variance of each component"),
    ("gamma", "Adam learning rate"),
    ("beta1", "Adam first-moment decay"),
    ("beta2", "Adam second-moment decay"),
    ("batch_d", "discriminator batch size"),
    ("batch_g", "generator batch size"),
    ("epochs", "training epochs, auto = 200 for toy and 20 for idx"),
    ("iters", "training iterations, overrides epochs when set"),
    ("dynamic", "learn the prior's means and covariances"),
    ("covariance", "diagonal | full (dynamic priors)"),
    ("label_table", "comma list mapping component k to a class, auto = k mod N"),
    ("epoch_size", "iterations per epoch, auto = ceil(n / batch_d)"),
    ("snapshot_every", "checkpoint interval in iterations, 0 disables"),
    ("arch", "auto | toy | image"),
    ("generator_hidden", "comma list of generator hidden widths, auto = preset"),
    ("discriminator_hidden", "comma list of discriminator hidden widths, auto = preset"),
    ("a", "quality score constant"),
    ("l", "classifier feature layer, auto = penultimate"),
    ("soft_inter", "use mean softmax instead of one-hot predictions for d_inter"),
    ("n_samples", "generated samples per score or NLL measurement"),
    ("d_intra_samples", "generated images used for the pairwise MS-SSIM term"),
    ("msssim_window", "MS-SSIM Gaussian window size"),
    ("msssim_sigma", "MS-SSIM Gaussian window width"),
    ("msssim_k1", "MS-SSIM luminance constant"),
    ("msssim_k2", "MS-SSIM contrast constant"),
    ("classifier_epochs", "training epochs of the scoring classifier"),
    ("classifier_hidden", "comma list of classifier hidden widths"),
    ("samples_per_component", "synthetic samples per component when clustering"),
    ("sigma_grid", "comma list of sigma scales, auto = preset for the dataset"),
    ("sigma_scale", "sigma scale used by `score`"),
    ("repeats", "independent seeded repeats, auto = 5 for toy and 3 for idx"),
    ("checkpoint", "trained checkpoint for score / sigma-sweep, none = train"),
    ("seed", "base seed; repeat r uses seed + r"),
    ("out", "output directory"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Train,
    ToyConvergence,
    SigmaSweep,
    Score,
    Cluster,
    GenToy,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Train => "train",
            Experiment::ToyConvergence => "toy-convergence",
            Experiment::SigmaSweep => "sigma-sweep",
            Experiment::Score => "score",
            Experiment::Cluster => "cluster",
            Experiment::GenToy => "gen-toy",
        }
    }
}

impl FromStr for Experiment {
    type Err = ();
    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        Ok(match s {
            "train" => Experiment::Train,
            "toy-convergence" => Experiment::ToyConvergence,
            "sigma-sweep" => Experiment::SigmaSweep,
            "score" => Experiment::Score,
            "cluster" => Experiment::Cluster,
            "gen-toy" => Experiment::GenToy,
            _ => return Err(()),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Toy,
    Idx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchKind {
    Auto,
    Toy,
    Image,
}

/// Everything an experiment needs. `None` fields resolve to dataset-dependent
/// defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub dataset: DatasetKind,
    pub toy_samples: usize,
    pub toy_variance: f64,
    pub images: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub per_class: usize,
    pub variant: Variant,
    pub models: Vec<Variant>,
    pub components: Option<usize>,
    pub latent_dim: usize,
    pub c: f64,
    pub sigma_init: f64,
    pub gamma: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub batch_d: usize,
    pub batch_g: usize,
    pub epochs: Option<u64>,
    pub iters: Option<u64>,
    pub dynamic: bool,
    pub covariance: CovarianceKind,
    pub label_table: Option<Vec<usize>>,
    pub epoch_size: Option<u64>,
    pub snapshot_every: u64,
    pub arch: ArchKind,
    pub generator_hidden: Option<Vec<usize>>,
    pub discriminator_hidden: Option<Vec<usize>>,
    pub a: f64,
    pub feature_layer: Option<usize>,
    pub soft_inter: bool,
    pub n_samples: usize,
    pub d_intra_samples: usize,
    pub msssim_window: usize,
    pub msssim_sigma: f64,
    pub msssim_k1: f64,
    pub msssim_k2: f64,
    pub classifier_epochs: usize,
    pub classifier_hidden: Vec<usize>,
    pub samples_per_component: usize,
    pub sigma_grid: Option<Vec<f64>>,
    pub sigma_scale: f64,
    pub repeats: Option<usize>,
    pub checkpoint: Option<PathBuf>,
    pub seed: u64,
    pub out: PathBuf,
}

pub const ALL_VARIANTS: [Variant; 4] = [
    Variant::Baseline,
    Variant::GmGan,
    Variant::SupervisedBaseline,
    Variant::SupervisedGmGan,
];

impl Default for ExperimentConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        let clf = ClassifierConfig::default();
        let ms = MsSsimParams::default();
        ExperimentConfig {
            experiment: Experiment::Train,
            dataset: DatasetKind::Toy,
            toy_samples: TOY_SAMPLES,
            toy_variance: TOY_VARIANCE,
            images: None,
            labels: None,
            per_class: 0,
            variant: train.variant,
            models: ALL_VARIANTS.to_vec(),
            components: None,
            latent_dim: train.latent_dim,
            c: train.c,
            sigma_init: train.sigma_init,
            gamma: train.lr,
            beta1: train.beta1,
            beta2: train.beta2,
            batch_d: train.batch_d,
            batch_g: train.batch_g,
            epochs: None,
            iters: None,
            dynamic: train.dynamic,
            covariance: train.covariance,
            label_table: None,
            epoch_size: None,
            snapshot_every: 0,
            arch: ArchKind::Auto,
            generator_hidden: None,
            discriminator_hidden: None,
            a: 1.0,
            feature_layer: None,
            soft_inter: false,
            n_samples: 1000,
            d_intra_samples: 200,
            msssim_window: ms.window,
            msssim_sigma: ms.sigma,
            msssim_k1: ms.k1,
            msssim_k2: ms.k2,
            classifier_epochs: clf.epochs,
            classifier_hidden: clf.hidden,
            samples_per_component: gmgan_core::clustering::DEFAULT_SAMPLES_PER_COMPONENT,
            sigma_grid: None,
            sigma_scale: 1.0,
            repeats: None,
            checkpoint: None,
            seed: 0,
            out: PathBuf::from("out"),
        }
    }
}

fn type_err(key: &str, expected: &'static str, value: &str) -> HarnessError {
    HarnessError::Type {
        key: key.to_string(),
        expected,
        value: value.to_string(),
    }
}

fn parse<T: FromStr>(key: &str, value: &str, expected: &'static str) -> Result<T> {
    value.parse().map_err(|_| type_err(key, expected, value))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(type_err(key, "a boolean", value)),
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str, expected: &'static str) -> Result<Vec<T>> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse(key, v.trim(), expected)).collect()
}

fn is_auto(value: &str) -> bool {
    value == "auto" || value == "none"
}

fn parse_opt<T: FromStr>(key: &str, value: &str, expected: &'static str) -> Result<Option<T>> {
    if is_auto(value) {
        Ok(None)
    } else {
        parse(key, value, expected).map(Some)
    }
}

fn parse_opt_list<T: FromStr>(key: &str, value: &str, expected: &'static str) -> Result<Option<Vec<T>>> {
    if is_auto(value) {
        Ok(None)
    } else {
        parse_list(key, value, expected).map(Some)
    }
}

fn parse_variant(key: &str, value: &str) -> Result<Variant> {
    ALL_VARIANTS
        .into_iter()
        .find(|v| v.name() == value)
        .ok_or_else(|| type_err(key, "one of baseline, supervised_baseline, gm_gan, supervised_gm_gan", value))
}

fn join<T: fmt::Display>(values: &[T]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn opt<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "auto".to_string(), |x| x.to_string())
}

fn opt_list<T: fmt::Display>(v: &Option<Vec<T>>) -> String {
    v.as_ref().map_or_else(|| "auto".to_string(), |x| join(x))
}

fn opt_path(v: &Option<PathBuf>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), |p| p.display().to_string())
}

impl ExperimentConfig {
    /// Reads a config file on top of the defaults.
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text(&std::fs::read_to_string(path)?)?;
        Ok(cfg)
    }

    /// Applies every `key=value` line of `text`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            self.apply_assignment(line).map_err(|e| match e {
                HarnessError::Syntax { text, .. } => HarnessError::Syntax { line: i + 1, text },
                other => other,
            })?;
        }
        Ok(())
    }

    /// Applies one `key=value` override.
    pub fn apply_assignment(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment.split_once('=').ok_or_else(|| HarnessError::Syntax {
            line: 0,
            text: assignment.to_string(),
        })?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "experiment" => {
                self.experiment = value
                    .parse()
                    .map_err(|_| type_err(key, "an experiment name", value))?
            }
            "dataset" => {
                self.dataset = match value {
                    "toy" => DatasetKind::Toy,
                    "idx" => DatasetKind::Idx,
                    _ => return Err(type_err(key, "toy or idx", value)),
                }
            }
            "toy_samples" => self.toy_samples = parse(key, value, "an integer")?,
            "toy_variance" => self.toy_variance = parse(key, value, "a number")?,
            "images" => self.images = (!is_auto(value)).then(|| PathBuf::from(value)),
            "labels" => self.labels = (!is_auto(value)).then(|| PathBuf::from(value)),
            "per_class" => self.per_class = parse(key, value, "an integer")?,
            "variant" => self.variant = parse_variant(key, value)?,
            "models" => {
                self.models = value
                    .split(',')
                    .map(|v| parse_variant(key, v.trim()))
                    .collect::<Result<_>>()?
            }
            "K" => self.components = parse_opt(key, value, "an integer or auto")?,
            "d" => self.latent_dim = parse(key, value, "an integer")?,
            "c" => self.c = parse(key, value, "a number")?,
            "sigma_init" => self.sigma_init = parse(key, value, "a number")?,
            "gamma" => self.gamma = parse(key, value, "a number")?,
            "beta1" => self.beta1 = parse(key, value, "a number")?,
            "beta2" => self.beta2 = parse(key, value, "a number")?,
            "batch_d" => self.batch_d = parse(key, value, "an integer")?,
            "batch_g" => self.batch_g = parse(key, value, "an integer")?,
            "epochs" => self.epochs = parse_opt(key, value, "an integer or auto")?,
            "iters" => self.iters = parse_opt(key, value, "an integer or auto")?,
            "dynamic" => self.dynamic = parse_bool(key, value)?,
            "covariance" => {
                self.covariance = match value {
                    "diagonal" => CovarianceKind::Diagonal,
                    "full" => CovarianceKind::Full,
                    _ => return Err(type_err(key, "diagonal or full", value)),
                }
            }
            "label_table" => self.label_table = parse_opt_list(key, value, "a comma list of integers")?,
            "epoch_size" => self.epoch_size = parse_opt(key, value, "an integer or auto")?,
            "snapshot_every" => self.snapshot_every = parse(key, value, "an integer")?,
            "arch" => {
                self.arch = match value {
                    "auto" => ArchKind::Auto,
                    "toy" => ArchKind::Toy,
                    "image" => ArchKind::Image,
                    _ => return Err(type_err(key, "auto, toy or image", value)),
                }
            }
            "generator_hidden" => {
                self.generator_hidden = parse_opt_list(key, value, "a comma list of integers")?
            }
            "discriminator_hidden" => {
                self.discriminator_hidden = parse_opt_list(key, value, "a comma list of integers")?
            }
            "a" => self.a = parse(key, value, "a number")?,
            "l" => self.feature_layer = parse_opt(key, value, "an integer or auto")?,
            "soft_inter" => self.soft_inter = parse_bool(key, value)?,
            "n_samples" => self.n_samples = parse(key, value, "an integer")?,
            "d_intra_samples" => self.d_intra_samples = parse(key, value, "an integer")?,
            "msssim_window" => self.msssim_window = parse(key, value, "an integer")?,
            "msssim_sigma" => self.msssim_sigma = parse(key, value, "a number")?,
            "msssim_k1" => self.msssim_k1 = parse(key, value, "a number")?,
            "msssim_k2" => self.msssim_k2 = parse(key, value, "a number")?,
            "classifier_epochs" => self.classifier_epochs = parse(key, value, "an integer")?,
            "classifier_hidden" => self.classifier_hidden = parse_list(key, value, "a comma list of integers")?,
            "samples_per_component" => self.samples_per_component = parse(key, value, "an integer")?,
            "sigma_grid" => self.sigma_grid = parse_opt_list(key, value, "a comma list of numbers")?,
            "sigma_scale" => self.sigma_scale = parse(key, value, "a number")?,
            "repeats" => self.repeats = parse_opt(key, value, "an integer or auto")?,
            "checkpoint" => self.checkpoint = (!is_auto(value)).then(|| PathBuf::from(value)),
            "seed" => self.seed = parse(key, value, "an unsigned integer")?,
            "out" => self.out = PathBuf::from(value),
            _ => return Err(HarnessError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// The value of `key` as it would be written in a config file.
    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "experiment" => self.experiment.name().to_string(),
            "dataset" => match self.dataset {
                DatasetKind::Toy => "toy".into(),
                DatasetKind::Idx => "idx".into(),
            },
            "toy_samples" => self.toy_samples.to_string(),
            "toy_variance" => self.toy_variance.to_string(),
            "images" => opt_path(&self.images),
            "labels" => opt_path(&self.labels),
            "per_class" => self.per_class.to_string(),
            "variant" => self.variant.name().to_string(),
            "models" => self.models.iter().map(|v| v.name()).collect::<Vec<_>>().join(","),
            "K" => opt(&self.components),
            "d" => self.latent_dim.to_string(),
            "c" => self.c.to_string(),
            "sigma_init" => self.sigma_init.to_string(),
            "gamma" => self.gamma.to_string(),
            "beta1" => self.beta1.to_string(),
            "beta2" => self.beta2.to_string(),
            "batch_d" => self.batch_d.to_string(),
            "batch_g" => self.batch_g.to_string(),
            "epochs" => opt(&self.epochs),
            "iters" => opt(&self.iters),
            "dynamic" => self.dynamic.to_string(),
            "covariance" => match self.covariance {
                CovarianceKind::Diagonal => "diagonal".into(),
                CovarianceKind::Full => "full".into(),
            },
            "label_table" => opt_list(&self.label_table),
            "epoch_size" => opt(&self.epoch_size),
            "snapshot_every" => self.snapshot_every.to_string(),
            "arch" => match self.arch {
                ArchKind::Auto => "auto".into(),
                ArchKind::Toy => "toy".into(),
                ArchKind::Image => "image".into(),
            },
            "generator_hidden" => opt_list(&self.generator_hidden),
            "discriminator_hidden" => opt_list(&self.discriminator_hidden),
            "a" => self.a.to_string(),
            "l" => opt(&self.feature_layer),
            "soft_inter" => self.soft_inter.to_string(),
            "n_samples" => self.n_samples.to_string(),
            "d_intra_samples" => self.d_intra_samples.to_string(),
            "msssim_window" => self.msssim_window.to_string(),
            "msssim_sigma" => self.msssim_sigma.to_string(),
            "msssim_k1" => self.msssim_k1.to_string(),
            "msssim_k2" => self.msssim_k2.to_string(),
            "classifier_epochs" => self.classifier_epochs.to_string(),
            "classifier_hidden" => join(&self.classifier_hidden),
            "samples_per_component" => self.samples_per_component.to_string(),
            "sigma_grid" => opt_list(&self.sigma_grid),
            "sigma_scale" => self.sigma_scale.to_string(),
            "repeats" => opt(&self.repeats),
            "checkpoint" => opt_path(&self.checkpoint),
            "seed" => self.seed.to_string(),
            "out" => self.out.display().to_string(),
            _ => return None,
        })
    }

    /// Every key in documented order; parsing the result reproduces `self`.
    pub fn render(&self) -> String {
        KEYS.iter()
            .map(|(k, _)| format!("{k}={}\n", self.get(k).unwrap_or_default()))
            .collect()
    }

    /// SHA-256 of the rendered config without the output directory, so runs
    /// that differ only in where they write share a hash.
    pub fn hash(&self) -> String {
        let text: String = KEYS
            .iter()
            .filter(|(k, _)| *k != "out")
            .map(|(k, _)| format!("{k}={}\n", self.get(k).unwrap_or_default()))
            .collect();
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |key: &str, message: &str| {
            Err(HarnessError::Invalid {
                key: key.to_string(),
                message: message.to_string(),
            })
        };
        if let Some(grid) = &self.sigma_grid {
            if grid.is_empty() {
                return invalid("sigma_grid", "needs at least one value");
            }
            if grid.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
                return invalid("sigma_grid", "values must be > 0");
            }
        }
        if self.repeats == Some(0) {
            return invalid("repeats", "must be ≥ 1");
        }
        if !(self.sigma_scale > 0.0) || !self.sigma_scale.is_finite() {
            return invalid("sigma_scale", "must be > 0");
        }
        if !(self.a > 0.0) || !self.a.is_finite() {
            return invalid("a", "must be > 0");
        }
        if !(self.toy_variance >= 0.0) {
            return invalid("toy_variance", "must be ≥ 0");
        }
        if self.models.is_empty() {
            return invalid("models", "needs at least one variant");
        }
        if self.n_samples < 2 {
            return invalid("n_samples", "must be ≥ 2");
        }
        if self.dataset == DatasetKind::Idx && self.images.is_none() {
            return invalid("images", "required when dataset=idx");
        }
        Ok(())
    }

    pub fn repeats(&self) -> usize {
        self.repeats.unwrap_or(match self.dataset {
            DatasetKind::Toy => 5,
            DatasetKind::Idx => 3,
        })
    }

    pub fn epochs(&self) -> u64 {
        self.epochs.unwrap_or(match self.dataset {
            DatasetKind::Toy => 200,
            DatasetKind::Idx => 20,
        })
    }

    /// The coarse toy grid or the fine 0.5..=2.0 grid for images.
    pub fn sigma_grid(&self) -> Vec<f64> {
        match (&self.sigma_grid, self.dataset) {
            (Some(g), _) => g.clone(),
            (None, DatasetKind::Toy) => vec![0.25, 0.5, 1.0, 1.5, 2.0],
            (None, DatasetKind::Idx) => (5..=20).map(|i| i as f64 / 10.0).collect(),
        }
    }

    pub fn architecture(&self) -> GanArchitecture {
        let mut arch = match (self.arch, self.dataset) {
            (ArchKind::Toy, _) | (ArchKind::Auto, DatasetKind::Toy) => GanArchitecture::toy(),
            (ArchKind::Image, _) | (ArchKind::Auto, DatasetKind::Idx) => GanArchitecture::image(),
        };
        if let Some(h) = &self.generator_hidden {
            arch.generator_hidden = h.clone();
        }
        if let Some(h) = &self.discriminator_hidden {
            arch.discriminator_hidden = h.clone();
        }
        arch
    }

    /// Training settings for `variant` on `data` under `seed`.
    pub fn train_config(&self, variant: Variant, data: &Dataset, seed: u64) -> TrainConfig {
        let mut tc = TrainConfig {
            variant,
            components: self.components.unwrap_or(data.classes().max(1)),
            latent_dim: self.latent_dim,
            c: self.c,
            sigma_init: self.sigma_init,
            iters: 0,
            batch_d: self.batch_d,
            batch_g: self.batch_g,
            lr: self.gamma,
            beta1: self.beta1,
            beta2: self.beta2,
            dynamic: self.dynamic,
            covariance: self.covariance,
            label_table: self.label_table.clone(),
            seed,
            epoch_size: self.epoch_size,
            snapshot_every: self.snapshot_every,
        };
        tc.iters = self.iters.unwrap_or(self.epochs() * tc.epoch_len(data.len()));
        tc
    }

    pub fn classifier_config(&self, seed: u64) -> ClassifierConfig {
        ClassifierConfig {
            hidden: self.classifier_hidden.clone(),
            epochs: self.classifier_epochs,
            seed,
            ..ClassifierConfig::default()
        }
    }

    pub fn msssim(&self) -> MsSsimParams {
        MsSsimParams {
            window: self.msssim_window,
            sigma: self.msssim_sigma,
            k1: self.msssim_k1,
            k2: self.msssim_k2,
            ..MsSsimParams::default()
        }
    }
}
