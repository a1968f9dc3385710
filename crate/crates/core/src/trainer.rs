//! Alternating GAN training (discriminator step, then generator step) for
//! the baseline GAN, the supervised baseline and static/dynamic GM-GANs,
//! plus checkpoints that resume bit-exactly.

use std::cell::Cell;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gan::{bce_sum_on_tape, make_label_map, GanArchitecture, GanModel, Supervision};
use crate::latent::{standard_normal_vec, CovarianceKind, MixturePrior, PriorMode, SigmaScale};
use crate::nn::{adam_step, AdamConfig, AdamState, Tape, Tensor};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Which of the four model families to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Single standard-normal prior, one-output discriminator.
    Baseline,
    /// Standard-normal prior, N-output discriminator; the generator is told
    /// which class to produce through a one-hot input.
    SupervisedBaseline,
    /// K-component mixture prior, one-output discriminator.
    GmGan,
    /// K = N mixture prior with an N-output discriminator.
    SupervisedGmGan,
}

impl Variant {
    pub fn supervised(self) -> bool {
        matches!(self, Variant::SupervisedBaseline | Variant::SupervisedGmGan)
    }

    pub fn mixture(self) -> bool {
        matches!(self, Variant::GmGan | Variant::SupervisedGmGan)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::SupervisedBaseline => "supervised_baseline",
            Variant::GmGan => "gm_gan",
            Variant::SupervisedGmGan => "supervised_gm_gan",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub variant: Variant,
    /// Mixture components K (ignored by the baselines).
    pub components: usize,
    pub latent_dim: usize,
    /// Means are drawn from U(-c, c)^d.
    pub c: f64,
    pub sigma_init: f64,
    pub iters: u64,
    pub batch_d: usize,
    pub batch_g: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub dynamic: bool,
    pub covariance: CovarianceKind,
    pub label_table: Option<Vec<usize>>,
    pub seed: u64,
    /// Iterations per reported epoch; `None` means ⌈n / batch_d⌉.
    pub epoch_size: Option<u64>,
    /// Write a checkpoint every this many iterations (0 disables).
    pub snapshot_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            variant: Variant::GmGan,
            components: 10,
            latent_dim: 100,
            c: 0.1,
            sigma_init: 0.15,
            iters: 0,
            batch_d: 64,
            batch_g: 128,
            lr: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            dynamic: false,
            covariance: CovarianceKind::Diagonal,
            label_table: None,
            seed: 0,
            epoch_size: None,
            snapshot_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("components", self.components),
            ("latent_dim", self.latent_dim),
            ("batch_d", self.batch_d),
            ("batch_g", self.batch_g),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Parameter(format!("{name} must be ≥ 1")));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Parameter(format!("learning rate {} must be ≥ 0", self.lr)));
        }
        if !(self.c >= 0.0 && self.c.is_finite()) || !(self.sigma_init > 0.0) {
            return Err(Error::Parameter("need c ≥ 0 and sigma_init > 0".into()));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Parameter(format!("{name} = {b} outside [0, 1)")));
            }
        }
        if self.epoch_size == Some(0) {
            return Err(Error::Parameter("epoch_size must be ≥ 1".into()));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            ..AdamConfig::gan(self.lr)
        }
    }

    /// Iterations per epoch for a dataset of `n` samples.
    pub fn epoch_len(&self, n: usize) -> u64 {
        self.epoch_size
            .unwrap_or_else(|| (n as u64).div_ceil(self.batch_d as u64).max(1))
    }
}

/// Random access to training samples. Implementations may count reads.
pub trait DataSource {
    fn len(&self) -> usize;
    fn dim(&self) -> usize;
    fn sample(&self, i: usize) -> &[f64];
    fn label(&self, i: usize) -> Option<usize>;
    fn classes(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl DataSource for Dataset {
    fn len(&self) -> usize {
        Dataset::len(self)
    }

    fn dim(&self) -> usize {
        Dataset::dim(self)
    }

    fn sample(&self, i: usize) -> &[f64] {
        Dataset::sample(self, i)
    }

    fn label(&self, i: usize) -> Option<usize> {
        self.labels().map(|l| l[i])
    }

    fn classes(&self) -> usize {
        Dataset::classes(self)
    }
}

/// Wraps a source and counts sample reads.
pub struct CountingSource<'a, D: DataSource> {
    inner: &'a D,
    reads: Cell<u64>,
}

impl<'a, D: DataSource> CountingSource<'a, D> {
    pub fn new(inner: &'a D) -> Self {
        CountingSource {
            inner,
            reads: Cell::new(0),
        }
    }

    pub fn reads(&self) -> u64 {
        self.reads.get()
    }
}

impl<D: DataSource> DataSource for CountingSource<'_, D> {
    fn len(&self) -> usize {
        self.inner.len()
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn sample(&self, i: usize) -> &[f64] {
        self.reads.set(self.reads.get() + 1);
        self.inner.sample(i)
    }

    fn label(&self, i: usize) -> Option<usize> {
        self.inner.label(i)
    }

    fn classes(&self) -> usize {
        self.inner.classes()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u64,
    pub iteration: u64,
    pub metric: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub loss_d: Vec<f64>,
    pub loss_g: Vec<f64>,
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn iterations(&self) -> usize {
        self.loss_d.len()
    }

    /// `iter,loss_d,loss_g`, one row per iteration (1-based).
    pub fn write_loss_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "iter,loss_d,loss_g")?;
        for (i, (d, g)) in self.loss_d.iter().zip(&self.loss_g).enumerate() {
            writeln!(out, "{},{d},{g}", i + 1)?;
        }
        Ok(())
    }

    /// `epoch,iter,metric`; wall-clock times are left out so that files are
    /// reproducible.
    pub fn write_epoch_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "epoch,iter,metric")?;
        for e in &self.epochs {
            let m = e.metric.map(|v| v.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{m}", e.epoch, e.iteration)?;
        }
        Ok(())
    }
}

/// Serializable ChaCha position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        RngState {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn restore(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }
}

/// Everything needed to continue training.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub config: TrainConfig,
    pub model: GanModel,
    pub prior: MixturePrior,
    pub adam_d: AdamState,
    pub adam_g: AdamState,
    /// Dynamic priors get their own moment buffers with the generator's
    /// settings; Adam is per-coordinate, so this equals one shared instance.
    pub adam_prior: Option<AdamState>,
    pub rng: ChaCha8Rng,
    pub iteration: u64,
    pub history: TrainHistory,
}

#[derive(Serialize, Deserialize)]
struct CheckpointDoc {
    format_version: u32,
    config: TrainConfig,
    model: GanModel,
    prior: MixturePrior,
    adam_d: AdamState,
    adam_g: AdamState,
    adam_prior: Option<AdamState>,
    rng: RngState,
    iteration: u64,
    history: TrainHistory,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: serde_json::Value,
}

/// Builds the prior that `config` describes.
pub fn build_prior<R: Rng + ?Sized>(config: &TrainConfig, classes: usize, rng: &mut R) -> Result<MixturePrior> {
    let prior = match config.variant {
        Variant::Baseline => MixturePrior::standard_normal(config.latent_dim)?,
        Variant::SupervisedBaseline => {
            MixturePrior::replicated_standard_normal(classes.max(1), config.latent_dim)?
        }
        Variant::GmGan | Variant::SupervisedGmGan => {
            MixturePrior::init_static(config.components, config.latent_dim, config.c, config.sigma_init, rng)?
        }
    };
    Ok(if config.dynamic {
        prior.into_dynamic(config.covariance)
    } else {
        prior
    })
}

/// Builds the model that `config` describes for `data_dim`-wide data with
/// `classes` labels (0 when unlabeled).
pub fn build_model<R: Rng + ?Sized>(
    config: &TrainConfig,
    arch: &GanArchitecture,
    data_dim: usize,
    classes: usize,
    rng: &mut R,
) -> Result<GanModel> {
    if config.variant.supervised() && classes == 0 {
        return Err(Error::Parameter("supervised training needs labeled data".into()));
    }
    let (supervision, map, conditional) = match config.variant {
        Variant::Baseline | Variant::GmGan => (Supervision::Unsupervised, None, None),
        Variant::SupervisedBaseline => (
            Supervision::Supervised { classes },
            Some(make_label_map(classes, classes, None)?),
            Some(classes),
        ),
        Variant::SupervisedGmGan => (
            Supervision::Supervised { classes },
            Some(make_label_map(config.components, classes, config.label_table.as_deref())?),
            None,
        ),
    };
    GanModel::build(arch, config.latent_dim, data_dim, supervision, map, conditional, rng)
}

impl TrainState {
    /// Fresh state: one RNG seeded from `config.seed` initializes the prior,
    /// then both networks, then drives training.
    pub fn init(config: TrainConfig, arch: &GanArchitecture, data_dim: usize, classes: usize) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let prior = build_prior(&config, classes, &mut rng)?;
        let model = build_model(&config, arch, data_dim, classes, &mut rng)?;
        Self::new(config, model, prior, rng)
    }

    pub fn new(config: TrainConfig, model: GanModel, prior: MixturePrior, rng: ChaCha8Rng) -> Result<Self> {
        config.validate()?;
        if prior.dim() != model.latent_dim() {
            return Err(Error::Dimension(format!(
                "prior dimension {} vs generator latent width {}",
                prior.dim(),
                model.latent_dim()
            )));
        }
        if let Some(map) = &model.label_map {
            if map.components() != prior.components() {
                return Err(Error::Parameter(format!(
                    "label map covers {} components, prior has {}",
                    map.components(),
                    prior.components()
                )));
            }
        }
        if let Some(k) = model.conditional {
            if k != prior.components() {
                return Err(Error::Parameter(format!(
                    "generator conditions on {k} components, prior has {}",
                    prior.components()
                )));
            }
        }
        let adam = config.adam();
        let adam_d = AdamState::new(adam, &model.discriminator.params);
        let adam_g = AdamState::new(adam, &model.generator.params);
        let adam_prior =
            (prior.mode() == PriorMode::Dynamic).then(|| AdamState::new(adam, prior.params()));
        Ok(TrainState {
            config,
            model,
            prior,
            adam_d,
            adam_g,
            adam_prior,
            rng,
            iteration: 0,
            history: TrainHistory::default(),
        })
    }

    fn check_data<D: DataSource>(&self, data: &D) -> Result<()> {
        if data.is_empty() {
            return Err(Error::Parameter("empty training set".into()));
        }
        if data.dim() != self.model.data_dim() {
            return Err(Error::Dimension(format!(
                "data width {} vs generator output {}",
                data.dim(),
                self.model.data_dim()
            )));
        }
        if let Supervision::Supervised { classes } = self.model.supervision {
            if data.label(0).is_none() {
                return Err(Error::Parameter("supervised training needs labeled data".into()));
            }
            if data.classes() > classes {
                return Err(Error::Parameter(format!(
                    "data has {} classes, discriminator {classes}",
                    data.classes()
                )));
            }
        }
        Ok(())
    }

    /// One discriminator update followed by one generator update.
    /// Returns `(L(D), L(G))` as measured before the updates.
    pub fn step<D: DataSource>(&mut self, data: &D) -> Result<(f64, f64)> {
        self.check_data(data)?;
        let it = self.iteration + 1;
        let tag = |e: Error| match e {
            Error::Numeric(m) => Error::Numeric(format!("iteration {it}: {m}")),
            other => other,
        };
        let loss_d = self.discriminator_step(data).map_err(tag)?;
        if !loss_d.is_finite() {
            return Err(Error::Numeric(format!("iteration {it}: L(D) = {loss_d}")));
        }
        let loss_g = self.generator_step().map_err(tag)?;
        if !loss_g.is_finite() {
            return Err(Error::Numeric(format!("iteration {it}: L(G) = {loss_g}")));
        }
        self.iteration = it;
        self.history.loss_d.push(loss_d);
        self.history.loss_g.push(loss_g);
        Ok((loss_d, loss_g))
    }

    fn discriminator_step<D: DataSource>(&mut self, data: &D) -> Result<f64> {
        let b = self.config.batch_d;
        let dim = data.dim();
        let d = self.prior.dim();
        let n = data.len();
        let mut real = Vec::with_capacity(b * dim);
        let mut labels = Vec::with_capacity(b);
        let mut ks = Vec::with_capacity(b);
        let mut z = Vec::with_capacity(b * d);
        for _ in 0..b {
            let j = self.rng.random_range(0..n);
            real.extend_from_slice(data.sample(j));
            labels.push(data.label(j));
            let k = self.prior.sample_component(&mut self.rng);
            let eps = standard_normal_vec(d, &mut self.rng);
            z.extend(self.prior.latent_from_noise(k, &eps, SigmaScale::ONE)?);
            ks.push(k);
        }
        let z = Tensor::new(vec![b, d], z)?;
        let fake = self.model.generate_for(&z, Some(&ks))?;

        let mut stacked = real;
        stacked.extend_from_slice(fake.data());
        let labels = match self.model.supervision {
            Supervision::Unsupervised => None,
            Supervision::Supervised { .. } => Some(
                labels
                    .into_iter()
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| Error::Parameter("unlabeled sample in supervised training".into()))?,
            ),
        };
        let real_t = self.model.real_targets(b, labels.as_deref())?;
        let width = real_t.cols();
        let mut targets = real_t.into_data();
        targets.resize(2 * b * width, 0.0);
        let targets = Tensor::new(vec![2 * b, width], targets)?;

        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(vec![2 * b, dim], stacked)?);
        let p = self.model.discriminate_on_tape(&mut tape, x, true)?;
        let sum = bce_sum_on_tape(&mut tape, p, &targets)?;
        let loss = tape.affine(sum, 1.0 / (2 * b) as f64, 0.0);
        let value = tape.value(loss).data()[0];
        tape.backward(loss)?;
        let params = &mut self.model.discriminator.params;
        params.zero_grads();
        tape.accumulate_into(params)?;
        adam_step(params, &mut self.adam_d)?;
        Ok(value)
    }

    fn generator_step(&mut self) -> Result<f64> {
        let b = self.config.batch_g;
        let d = self.prior.dim();
        let mut ks = Vec::with_capacity(b);
        let mut eps = Vec::with_capacity(b * d);
        for _ in 0..b {
            ks.push(self.prior.sample_component(&mut self.rng));
            eps.extend(standard_normal_vec(d, &mut self.rng));
        }
        let dynamic = self.adam_prior.is_some();
        let mut tape = Tape::new();
        let z = self
            .prior
            .latent_on_tape(&mut tape, &ks, Tensor::new(vec![b, d], eps)?, SigmaScale::ONE, dynamic)?;
        let x = self.model.generate_on_tape(&mut tape, z, &ks, true)?;
        let p = self.model.discriminate_on_tape(&mut tape, x, false)?;
        let targets = self.model.generator_targets(&ks)?;
        let sum = bce_sum_on_tape(&mut tape, p, &targets)?;
        let loss = tape.affine(sum, 1.0 / b as f64, 0.0);
        let value = tape.value(loss).data()[0];
        tape.backward(loss)?;
        let g = &mut self.model.generator.params;
        g.zero_grads();
        tape.accumulate_into(g)?;
        adam_step(g, &mut self.adam_g)?;
        if let Some(state) = &mut self.adam_prior {
            let pp = self.prior.params_mut();
            pp.zero_grads();
            tape.accumulate_into(pp)?;
            adam_step(pp, state)?;
        }
        Ok(value)
    }

    /// Runs `iters` further iterations. At every epoch boundary `hook` (if
    /// any) is evaluated on the current model and its value recorded; with
    /// `snapshot_dir` set and `snapshot_every > 0`, checkpoints are written
    /// as `checkpoint_<iter>.json`.
    pub fn run<D: DataSource>(
        &mut self,
        data: &D,
        iters: u64,
        mut hook: Option<&mut dyn FnMut(&TrainState) -> Result<f64>>,
        snapshot_dir: Option<&Path>,
    ) -> Result<()> {
        let epoch_len = self.config.epoch_len(data.len());
        let mut clock = Instant::now();
        for _ in 0..iters {
            self.step(data)?;
            if self.iteration % epoch_len == 0 {
                let metric = match hook.as_mut() {
                    Some(h) => Some(h(self)?),
                    None => None,
                };
                self.history.epochs.push(EpochRecord {
                    epoch: self.iteration / epoch_len,
                    iteration: self.iteration,
                    metric,
                    seconds: clock.elapsed().as_secs_f64(),
                });
                clock = Instant::now();
            }
            if let Some(dir) = snapshot_dir {
                let every = self.config.snapshot_every;
                if every > 0 && self.iteration % every == 0 {
                    self.snapshot(&dir.join(format!("checkpoint_{}.json", self.iteration)))?;
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = CheckpointDoc {
            format_version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            model: self.model.clone(),
            prior: self.prior.clone(),
            adam_d: self.adam_d.clone(),
            adam_g: self.adam_g.clone(),
            adam_prior: self.adam_prior.clone(),
            rng: RngState::capture(&self.rng),
            iteration: self.iteration,
            history: self.history.clone(),
        };
        serde_json::to_string(&doc).map_err(|e| Error::format(0, e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let json_err = |e: serde_json::Error| {
            let offset = byte_offset(text, e.line(), e.column());
            Error::format(offset, e.to_string())
        };
        let probe: VersionProbe = serde_json::from_str(text).map_err(json_err)?;
        if probe.format_version.as_u64() != Some(u64::from(CHECKPOINT_VERSION)) {
            let offset = text.find("\"format_version\"").unwrap_or(0) as u64;
            return Err(Error::format(
                offset,
                format!(
                    "unsupported checkpoint format_version {}, expected {CHECKPOINT_VERSION}",
                    probe.format_version
                ),
            ));
        }
        let doc: CheckpointDoc = serde_json::from_str(text).map_err(json_err)?;
        Ok(TrainState {
            config: doc.config,
            model: doc.model,
            prior: doc.prior,
            adam_d: doc.adam_d,
            adam_g: doc.adam_g,
            adam_prior: doc.adam_prior,
            rng: doc.rng.restore(),
            iteration: doc.iteration,
            history: doc.history,
        })
    }

    pub fn snapshot(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn byte_offset(text: &str, line: usize, column: usize) -> u64 {
    if line == 0 {
        return 0;
    }
    let start: usize = text.split_inclusive('\n').take(line - 1).map(str::len).sum();
    (start + column.saturating_sub(1)) as u64
}

/// Trains a fresh or given model for `config.iters` iterations with `rng`.
pub fn train<D: DataSource>(
    config: TrainConfig,
    data: &D,
    model: GanModel,
    prior: MixturePrior,
    rng: ChaCha8Rng,
) -> Result<(GanModel, MixturePrior, TrainHistory)> {
    let iters = config.iters;
    let mut state = TrainState::new(config, model, prior, rng)?;
    state.run(data, iters, None, None)?;
    Ok((state.model, state.prior, state.history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_toy, TOY_VARIANCE};
    use crate::nn::WeightInit;

    fn small_config(variant: Variant) -> TrainConfig {
        TrainConfig {
            variant,
            components: 9,
            latent_dim: 4,
            batch_d: 8,
            batch_g: 16,
            seed: 3,
            ..TrainConfig::default()
        }
    }

    fn small_arch() -> GanArchitecture {
        GanArchitecture {
            generator_hidden: vec![8],
            discriminator_hidden: vec![8],
            ..GanArchitecture::toy()
        }
    }

    #[test]
    fn first_losses_are_ln2_with_zero_discriminator() {
        let data = gen_toy(100, TOY_VARIANCE, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let mut arch = small_arch();
        arch.init = WeightInit { std: 0.0 };
        let mut st = TrainState::init(small_config(Variant::GmGan), &arch, 2, 9).unwrap();
        let (ld, lg) = st.step(&data).unwrap();
        assert!((ld - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((lg - std::f64::consts::LN_2).abs() < 1e-3);
    }

    #[test]
    fn zero_iterations_leave_parameters_untouched() {
        let data = gen_toy(50, TOY_VARIANCE, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let st = TrainState::init(small_config(Variant::GmGan), &small_arch(), 2, 9).unwrap();
        let before = st.model.clone();
        let (model, prior, hist) =
            train(st.config.clone(), &data, st.model, st.prior.clone(), st.rng).unwrap();
        assert_eq!(model, before);
        assert_eq!(prior, st.prior);
        assert_eq!(hist.iterations(), 0);
    }

    #[test]
    fn supervised_training_requires_labels() {
        let data = gen_toy(50, TOY_VARIANCE, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let mut st = TrainState::init(small_config(Variant::SupervisedGmGan), &small_arch(), 2, 9).unwrap();
        assert!(matches!(st.step(&data.unlabeled()), Err(Error::Parameter(_))));
        st.step(&data).unwrap();
        assert!(TrainState::init(small_config(Variant::SupervisedBaseline), &small_arch(), 2, 0).is_err());
    }

    #[test]
    fn rng_state_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let _: u64 = rng.random();
        let _: u32 = rng.random();
        let mut copy = RngState::capture(&rng).restore();
        for _ in 0..10 {
            assert_eq!(rng.random::<u64>(), copy.random::<u64>());
        }
    }

    #[test]
    fn corrupt_version_is_a_format_error() {
        let st = TrainState::init(small_config(Variant::Baseline), &small_arch(), 2, 9).unwrap();
        let json = st.to_json().unwrap().replacen("\"format_version\":1", "\"format_version\":99", 1);
        assert!(matches!(TrainState::from_json(&json), Err(Error::Format { .. })));
        assert!(matches!(TrainState::from_json("{"), Err(Error::Format { .. })));
    }
}
