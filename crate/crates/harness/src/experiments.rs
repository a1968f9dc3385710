//! The experiment recipes. Each returns its structured results together with
//! the files it would write, so callers can inspect or persist them.

use std::path::Path;

use gmgan_core::clustering::{cluster, ClusterConfig, ClusterResult};
use gmgan_core::data::{gen_toy, load_idx, subset, toy_mixture, Dataset, Modality};
use gmgan_core::gan::GanModel;
use gmgan_core::latent::{GaussianMixture, MixturePrior, SigmaScale};
use gmgan_core::nn::Tensor;
use gmgan_core::scorer::{
    classifier_is, combined, d_inter, d_inter_soft, d_intra, diversity, nll_under_mixture,
    quality_set, train_classifier, FeatureClassifier, FeatureIndex, ScoreReport, SCORE_HEADER,
};
use gmgan_core::trainer::{TrainState, Variant};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{DatasetKind, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::stats::{mean, spearman, standard_error};

/// Version of the emitted file layouts.
pub const FORMAT_VERSION: u32 = 1;

const DATA_STREAM: u64 = 2;
const EVAL_STREAM: u64 = 3;

/// One output file.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outputs(pub Vec<Artifact>);

impl Outputs {
    fn push(&mut self, name: impl Into<String>, contents: String) {
        self.0.push(Artifact {
            name: name.into(),
            contents,
        });
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.0.iter().find(|a| a.name == name).map(|a| a.contents.as_str())
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for a in &self.0 {
            std::fs::write(dir.join(&a.name), &a.contents)?;
        }
        Ok(())
    }
}

/// `# gmgan experiment=… seed=… config_sha256=… format_version=…`
pub fn provenance(cfg: &ExperimentConfig) -> String {
    format!(
        "# gmgan experiment={} seed={} config_sha256={} format_version={FORMAT_VERSION}",
        cfg.experiment.name(),
        cfg.seed,
        cfg.hash()
    )
}

fn csv(cfg: &ExperimentConfig, header: &str, rows: &[String]) -> String {
    let mut s = format!("{}\n{header}\n", provenance(cfg));
    for r in rows {
        s.push_str(r);
        s.push('\n');
    }
    s
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn invalid(key: &str, message: &str) -> HarnessError {
    HarnessError::Invalid {
        key: key.into(),
        message: message.into(),
    }
}

/// Source data, loaded once and instantiated per repeat.
pub enum DataSpec {
    Toy { n: usize, variance: f64 },
    Loaded { full: Dataset, per_class: usize },
}

impl DataSpec {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        Ok(match cfg.dataset {
            DatasetKind::Toy => DataSpec::Toy {
                n: cfg.toy_samples,
                variance: cfg.toy_variance,
            },
            DatasetKind::Idx => {
                let images = cfg.images.as_ref().ok_or_else(|| invalid("images", "required when dataset=idx"))?;
                DataSpec::Loaded {
                    full: load_idx(images, cfg.labels.as_deref())?,
                    per_class: cfg.per_class,
                }
            }
        })
    }

    /// The training set of the repeat seeded with `seed`.
    pub fn instance(&self, seed: u64) -> Result<Dataset> {
        Ok(match self {
            DataSpec::Toy { n, variance } => gen_toy(*n, *variance, &mut rng(seed, DATA_STREAM))?,
            DataSpec::Loaded { full, per_class: 0 } => full.clone(),
            DataSpec::Loaded { full, per_class } => subset(full, *per_class, seed)?,
        })
    }

    /// The generating mixture, when known.
    pub fn truth(&self) -> Result<Option<GaussianMixture>> {
        match self {
            DataSpec::Toy { variance, .. } if *variance > 0.0 => Ok(Some(toy_mixture(*variance)?)),
            _ => Ok(None),
        }
    }
}

/// Draws `n` samples from the trained generator at σ-scale `scale`.
pub fn generate(
    model: &GanModel,
    prior: &MixturePrior,
    n: usize,
    scale: SigmaScale,
    rng: &mut ChaCha8Rng,
) -> gmgan_core::Result<Tensor> {
    let (ks, z) = prior.sample_batch(n, scale, rng)?;
    model.generate_for(&z, Some(&ks))
}

/// Mean NLL of `n` fresh samples under `truth`, drawn with the evaluation
/// stream of `seed` so that every call sees the same noise.
pub fn sample_nll(state: &TrainState, truth: &GaussianMixture, n: usize, seed: u64) -> gmgan_core::Result<f64> {
    let x = generate(&state.model, &state.prior, n, SigmaScale::ONE, &mut rng(seed, EVAL_STREAM))?;
    nll_under_mixture(&x, truth)
}

/// Trains `variant` on `data` for the configured budget.
pub fn train_variant(
    cfg: &ExperimentConfig,
    data: &Dataset,
    variant: Variant,
    seed: u64,
    hook: Option<&mut dyn FnMut(&TrainState) -> gmgan_core::Result<f64>>,
    snapshot_dir: Option<&Path>,
) -> Result<TrainState> {
    let tc = cfg.train_config(variant, data, seed);
    let iters = tc.iters;
    let mut state = TrainState::init(tc, &cfg.architecture(), data.dim(), data.classes())?;
    state.run(data, iters, hook, snapshot_dir)?;
    Ok(state)
}

/// Classifier-based scoring against one training set.
pub struct Scorer {
    pub classifier: FeatureClassifier,
    pub index: FeatureIndex,
    pub truth: Option<GaussianMixture>,
    pub modality: Modality,
    a: f64,
    soft_inter: bool,
    d_intra_samples: usize,
    msssim: gmgan_core::scorer::MsSsimParams,
}

impl Scorer {
    pub fn new(cfg: &ExperimentConfig, data: &Dataset, truth: Option<GaussianMixture>, seed: u64) -> Result<Self> {
        let mut classifier = train_classifier(data, &cfg.classifier_config(seed))?;
        if let Some(l) = cfg.feature_layer {
            if l == 0 || l > classifier.num_layers() {
                return Err(invalid("l", "feature layer out of range"));
            }
            classifier.feature_layer = l;
        }
        let index = FeatureIndex::from_classifier(&classifier, data.samples())?;
        Ok(Scorer {
            classifier,
            index,
            truth,
            modality: data.modality(),
            a: cfg.a,
            soft_inter: cfg.soft_inter,
            d_intra_samples: cfg.d_intra_samples,
            msssim: cfg.msssim(),
        })
    }

    pub fn report(&self, x: &Tensor, sigma: f64) -> Result<ScoreReport> {
        let clf = &self.classifier;
        let q = quality_set(x, clf, &self.index, self.a)?;
        let d_inter = if self.soft_inter {
            d_inter_soft(&clf.probabilities(x)?)?
        } else {
            d_inter(x, clf)?
        };
        let d_intra = match self.modality {
            Modality::Images { .. } => {
                let m = self.d_intra_samples.min(x.rows()).max(1);
                let head: Vec<usize> = (0..m).collect();
                Some(d_intra(&x.select_rows(&head), self.modality, &self.msssim)?)
            }
            Modality::Points => None,
        };
        let d = d_intra.map(|di| diversity(di, d_inter));
        let nll = match &self.truth {
            Some(t) => Some(nll_under_mixture(x, t)?),
            None => None,
        };
        Ok(ScoreReport {
            sigma,
            q,
            d_intra,
            d_inter,
            d,
            s: d.map(|d| combined(q, d)),
            classifier_is: classifier_is(x, clf)?,
            nll,
            n_samples: x.rows(),
        })
    }
}

fn repeat_seeds(cfg: &ExperimentConfig) -> Vec<u64> {
    (0..cfg.repeats() as u64).map(|r| cfg.seed.wrapping_add(r)).collect()
}

/// Writes the toy set as `x0,x1,label`.
pub fn run_gen_toy(cfg: &ExperimentConfig) -> Result<Outputs> {
    let ds = gen_toy(cfg.toy_samples, cfg.toy_variance, &mut rng(cfg.seed, DATA_STREAM))?;
    let mut body = Vec::new();
    ds.write_csv(&mut body)?;
    let mut out = Outputs::default();
    out.push(
        "toy.csv",
        format!("{}\n{}", provenance(cfg), String::from_utf8_lossy(&body)),
    );
    Ok(out)
}

/// Trains one model; emits losses, per-epoch records and the final checkpoint.
pub fn run_train(cfg: &ExperimentConfig, snapshot_dir: Option<&Path>) -> Result<(TrainState, Outputs)> {
    let spec = DataSpec::from_config(cfg)?;
    let data = spec.instance(cfg.seed)?;
    let truth = spec.truth()?;
    let n = cfg.n_samples;
    let seed = cfg.seed;
    let mut nll_hook = |s: &TrainState| -> gmgan_core::Result<f64> {
        let t = truth.as_ref().expect("hook only installed with a known mixture");
        sample_nll(s, t, n, seed)
    };
    let hook: Option<&mut dyn FnMut(&TrainState) -> gmgan_core::Result<f64>> = match truth {
        Some(_) => Some(&mut nll_hook),
        None => None,
    };
    let state = train_variant(cfg, &data, cfg.variant, seed, hook, snapshot_dir)?;

    let mut out = Outputs::default();
    let loss_rows: Vec<String> = state
        .history
        .loss_d
        .iter()
        .zip(&state.history.loss_g)
        .enumerate()
        .map(|(i, (d, g))| format!("{},{d},{g}", i + 1))
        .collect();
    out.push("losses.csv", csv(cfg, "iter,loss_d,loss_g", &loss_rows));
    let epoch_rows: Vec<String> = state
        .history
        .epochs
        .iter()
        .map(|e| format!("{},{},{}", e.epoch, e.iteration, e.metric.map(|m| m.to_string()).unwrap_or_default()))
        .collect();
    out.push("epochs.csv", csv(cfg, "epoch,iter,nll", &epoch_rows));
    out.push("checkpoint.json", state.to_json()?);
    Ok((state, out))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub repeat: usize,
    pub seed: u64,
    pub model: Variant,
    pub epoch: u64,
    pub iteration: u64,
    pub nll: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceResult {
    pub rows: Vec<ConvergenceRow>,
    /// NLL of samples from the data distribution itself, per repeat.
    pub floor: Vec<f64>,
}

impl ConvergenceResult {
    /// Last-epoch NLL of `model` in `repeat`.
    pub fn final_nll(&self, repeat: usize, model: Variant) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.repeat == repeat && r.model == model)
            .max_by_key(|r| r.epoch)
            .map(|r| r.nll)
    }
}

/// Per-epoch NLL of every configured model on the toy data, epoch 0 being
/// the untrained generator. All models of a repeat share its seed.
pub fn run_toy_convergence(cfg: &ExperimentConfig) -> Result<(ConvergenceResult, Outputs)> {
    if cfg.dataset != DatasetKind::Toy {
        return Err(invalid("dataset", "toy-convergence needs dataset=toy"));
    }
    let spec = DataSpec::from_config(cfg)?;
    let truth = spec.truth()?.ok_or_else(|| invalid("toy_variance", "must be > 0 for NLL"))?;
    let n = cfg.n_samples;
    let mut result = ConvergenceResult {
        rows: Vec::new(),
        floor: Vec::new(),
    };
    for (repeat, seed) in repeat_seeds(cfg).into_iter().enumerate() {
        let data = spec.instance(seed)?;
        let reference = gen_toy(n, cfg.toy_variance, &mut rng(seed, EVAL_STREAM))?;
        result.floor.push(nll_under_mixture(reference.samples(), &truth)?);
        for &model in &cfg.models {
            let tc = cfg.train_config(model, &data, seed);
            let iters = tc.iters;
            let mut state = TrainState::init(tc, &cfg.architecture(), data.dim(), data.classes())?;
            result.rows.push(ConvergenceRow {
                repeat,
                seed,
                model,
                epoch: 0,
                iteration: 0,
                nll: sample_nll(&state, &truth, n, seed)?,
            });
            let mut hook = |s: &TrainState| sample_nll(s, &truth, n, seed);
            state.run(&data, iters, Some(&mut hook), None)?;
            for e in &state.history.epochs {
                result.rows.push(ConvergenceRow {
                    repeat,
                    seed,
                    model,
                    epoch: e.epoch,
                    iteration: e.iteration,
                    nll: e.metric.expect("hook installed"),
                });
            }
        }
    }

    let mut out = Outputs::default();
    let rows: Vec<String> = result
        .rows
        .iter()
        .map(|r| format!("{},{},{},{},{},{}", r.repeat, r.seed, r.model.name(), r.epoch, r.iteration, r.nll))
        .collect();
    out.push("toy_convergence.csv", csv(cfg, "repeat,seed,model,epoch,iter,nll", &rows));
    let mut finals = Vec::new();
    for (repeat, seed) in repeat_seeds(cfg).into_iter().enumerate() {
        for &model in &cfg.models {
            if let Some(v) = result.final_nll(repeat, model) {
                finals.push(format!("{repeat},{seed},{},{v}", model.name()));
            }
        }
        finals.push(format!("{repeat},{seed},true_mixture,{}", result.floor[repeat]));
    }
    out.push("toy_convergence_final.csv", csv(cfg, "repeat,seed,model,final_nll", &finals));
    Ok((result, out))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub repeat: usize,
    pub seed: u64,
    pub report: ScoreReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Per repeat: ρ(quality, σ) and ρ(diversity, σ).
    pub spearman: Vec<(Option<f64>, Option<f64>)>,
}

/// The diversity used for rank correlation: `d` for images, `d_inter` for points.
pub fn sweep_diversity(r: &ScoreReport) -> f64 {
    r.d.unwrap_or(r.d_inter)
}

impl SweepResult {
    pub fn mean_spearman(&self) -> (Option<f64>, Option<f64>) {
        let avg = |f: fn(&(Option<f64>, Option<f64>)) -> Option<f64>| {
            let v: Option<Vec<f64>> = self.spearman.iter().map(f).collect();
            v.filter(|v| !v.is_empty()).map(|v| mean(&v))
        };
        (avg(|p| p.0), avg(|p| p.1))
    }
}

fn metric_columns(r: &ScoreReport) -> [(&'static str, Option<f64>); 8] {
    [
        ("q", Some(r.q)),
        ("d_intra", r.d_intra),
        ("d_inter", Some(r.d_inter)),
        ("d", r.d),
        ("s", r.s),
        ("is", Some(r.classifier_is)),
        ("nll", r.nll),
        ("diversity", Some(sweep_diversity(r))),
    ]
}

/// Scores freshly generated sets at every σ of the grid. Each repeat trains
/// (or loads) one model; all σ values reuse the same latent noise so only the
/// scale differs between rows.
pub fn run_sigma_sweep(cfg: &ExperimentConfig) -> Result<(SweepResult, Outputs)> {
    let spec = DataSpec::from_config(cfg)?;
    let grid = cfg.sigma_grid();
    let mut result = SweepResult {
        rows: Vec::new(),
        spearman: Vec::new(),
    };
    for (repeat, seed) in repeat_seeds(cfg).into_iter().enumerate() {
        let data = spec.instance(seed)?;
        let state = match &cfg.checkpoint {
            Some(p) => TrainState::load(p)?,
            None => train_variant(cfg, &data, cfg.variant, seed, None, None)?,
        };
        let scorer = Scorer::new(cfg, &data, spec.truth()?, seed)?;
        let mut qs = Vec::new();
        let mut ds = Vec::new();
        for &sigma in &grid {
            let x = generate(
                &state.model,
                &state.prior,
                cfg.n_samples,
                SigmaScale::new(sigma)?,
                &mut rng(seed, EVAL_STREAM),
            )?;
            let report = scorer.report(&x, sigma)?;
            qs.push(report.q);
            ds.push(sweep_diversity(&report));
            result.rows.push(SweepRow { repeat, seed, report });
        }
        result.spearman.push((spearman(&grid, &qs), spearman(&grid, &ds)));
    }

    let mut out = Outputs::default();
    let rows: Vec<String> = result
        .rows
        .iter()
        .map(|r| format!("{},{},{}", r.repeat, r.seed, r.report.csv_row()))
        .collect();
    out.push("sigma_sweep.csv", csv(cfg, &format!("repeat,seed,{SCORE_HEADER}"), &rows));

    let mut summary = Vec::new();
    for &sigma in &grid {
        let at: Vec<&ScoreReport> = result.rows.iter().filter(|r| r.report.sigma == sigma).map(|r| &r.report).collect();
        for (i, (name, _)) in metric_columns(at[0]).iter().enumerate() {
            let vals: Option<Vec<f64>> = at.iter().map(|r| metric_columns(r)[i].1).collect();
            if let Some(v) = vals {
                let se = standard_error(&v).map(|s| s.to_string()).unwrap_or_default();
                summary.push(format!("{sigma},{name},{},{se},{}", mean(&v), v.len()));
            }
        }
    }
    out.push("sigma_sweep_summary.csv", csv(cfg, "sigma,metric,mean,se,repeats", &summary));

    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut rho: Vec<String> = repeat_seeds(cfg)
        .iter()
        .zip(&result.spearman)
        .enumerate()
        .map(|(r, (seed, (q, d)))| format!("{r},{seed},{},{}", fmt(*q), fmt(*d)))
        .collect();
    let (mq, md) = result.mean_spearman();
    rho.push(format!("mean,,{},{}", fmt(mq), fmt(md)));
    out.push("sigma_sweep_spearman.csv", csv(cfg, "repeat,seed,rho_quality,rho_diversity", &rho));
    Ok((result, out))
}

/// Scores one model at the configured σ-scale.
pub fn run_score(cfg: &ExperimentConfig) -> Result<(ScoreReport, Outputs)> {
    let spec = DataSpec::from_config(cfg)?;
    let data = spec.instance(cfg.seed)?;
    let state = match &cfg.checkpoint {
        Some(p) => TrainState::load(p)?,
        None => train_variant(cfg, &data, cfg.variant, cfg.seed, None, None)?,
    };
    let scorer = Scorer::new(cfg, &data, spec.truth()?, cfg.seed)?;
    let x = generate(
        &state.model,
        &state.prior,
        cfg.n_samples,
        SigmaScale::new(cfg.sigma_scale)?,
        &mut rng(cfg.seed, EVAL_STREAM),
    )?;
    let report = scorer.report(&x, cfg.sigma_scale)?;
    let mut out = Outputs::default();
    out.push("score.csv", csv(cfg, SCORE_HEADER, &[report.csv_row()]));
    let mut text = Vec::new();
    report.write_text(&mut text)?;
    out.push("score.txt", String::from_utf8_lossy(&text).into_owned());
    Ok((report, out))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterRow {
    pub repeat: usize,
    pub seed: u64,
    pub k: usize,
    pub result: ClusterResult,
}

/// Clusters the training set once per repeat.
pub fn run_cluster(cfg: &ExperimentConfig) -> Result<(Vec<ClusterRow>, Outputs)> {
    let spec = DataSpec::from_config(cfg)?;
    let mut rows = Vec::new();
    let mut out = Outputs::default();
    for (repeat, seed) in repeat_seeds(cfg).into_iter().enumerate() {
        let data = spec.instance(seed)?;
        let train = cfg.train_config(Variant::GmGan, &data, seed);
        let k = train.components;
        let cc = ClusterConfig {
            train,
            arch: cfg.architecture(),
            classifier: cfg.classifier_config(seed),
            samples_per_component: cfg.samples_per_component,
        };
        let result = cluster(&data, k, &cc)?;
        let mut assignments = Vec::new();
        result.write_assignments_csv(&mut assignments)?;
        out.push(
            format!("cluster_assignments_{repeat}.csv"),
            format!("{}\n{}", provenance(cfg), String::from_utf8_lossy(&assignments)),
        );
        rows.push(ClusterRow { repeat, seed, k, result });
    }
    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let metrics: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{}",
                r.repeat,
                r.seed,
                r.k,
                fmt(r.result.acc.as_ref().map(|a| a.acc)),
                fmt(r.result.nmi),
                fmt(r.result.synthetic_accuracy)
            )
        })
        .collect();
    out.push("cluster_metrics.csv", csv(cfg, "repeat,seed,k,acc,nmi,synthetic_accuracy", &metrics));
    Ok((rows, out))
}
