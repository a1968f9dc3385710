use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{
    adam_step, log_softmax_into, Activation, AdamConfig, AdamState, MlpSpec, ParamStore, Tape,
    Tensor, WeightInit,
};

pub const CLASSIFIER_LABEL: &str = "classifier";

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierConfig {
    pub hidden: Vec<usize>,
    pub leaky_slope: f64,
    pub epochs: usize,
    pub batch: usize,
    pub adam: AdamConfig,
    /// Fraction of samples held out for the accuracy report.
    pub holdout: f64,
    pub init: WeightInit,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            hidden: vec![64, 64],
            leaky_slope: 0.2,
            epochs: 20,
            batch: 64,
            adam: AdamConfig {
                lr: 1e-3,
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
            },
            holdout: 0.1,
            init: WeightInit { std: 0.1 },
            seed: 0,
        }
    }
}

/// An MLP classifier whose hidden activations serve as features.
///
/// Layers are numbered `1..=L`; layer `L` yields logits, and asking for its
/// features returns softmax probabilities instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureClassifier {
    pub spec: MlpSpec,
    pub params: ParamStore,
    pub classes: usize,
    pub feature_layer: usize,
    pub holdout_accuracy: f64,
}

impl FeatureClassifier {
    pub fn new(spec: MlpSpec, params: ParamStore) -> Result<Self> {
        let classes = spec.output_width();
        let layers = spec.num_layers();
        Ok(FeatureClassifier {
            feature_layer: if layers > 1 { layers - 1 } else { layers },
            spec,
            params,
            classes,
            holdout_accuracy: f64::NAN,
        })
    }

    pub fn num_layers(&self) -> usize {
        self.spec.num_layers()
    }

    pub fn logits(&self, x: &Tensor) -> Result<Tensor> {
        self.spec.infer(&self.params, x)
    }

    /// Row-wise softmax of the logits.
    pub fn probabilities(&self, x: &Tensor) -> Result<Tensor> {
        Ok(softmax_rows(&self.logits(x)?))
    }

    /// Argmax class per row; ties go to the lowest index.
    pub fn predict(&self, x: &Tensor) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.logits(x)?))
    }

    /// `c_l(x)` for layer `l` in `1..=L`.
    pub fn features_at(&self, x: &Tensor, l: usize) -> Result<Tensor> {
        let layers = self.num_layers();
        if l == 0 || l > layers {
            return Err(Error::Parameter(format!("feature layer {l} outside 1..={layers}")));
        }
        let mut outs = self.spec.infer_layers_until(&self.params, x, l)?;
        let out = outs.pop().expect("at least one layer");
        Ok(if l == layers { softmax_rows(&out) } else { out })
    }

    /// Features at the configured layer.
    pub fn features(&self, x: &Tensor) -> Result<Tensor> {
        self.features_at(x, self.feature_layer)
    }

    pub fn accuracy(&self, x: &Tensor, labels: &[usize]) -> Result<f64> {
        if labels.len() != x.rows() {
            return Err(Error::Dimension(format!("{} labels for {} rows", labels.len(), x.rows())));
        }
        if labels.is_empty() {
            return Err(Error::Parameter("accuracy of an empty set".into()));
        }
        let hits = self
            .predict(x)?
            .iter()
            .zip(labels)
            .filter(|(p, y)| p == y)
            .count();
        Ok(hits as f64 / labels.len() as f64)
    }
}

pub fn softmax_rows(logits: &Tensor) -> Tensor {
    let cols = logits.cols();
    let mut out = vec![0.0; logits.len()];
    for (src, dst) in logits.data().chunks(cols.max(1)).zip(out.chunks_mut(cols.max(1))) {
        log_softmax_into(src, dst);
    }
    Tensor::new(vec![logits.rows(), cols], out).expect("shape preserved")
}

pub fn argmax_rows(t: &Tensor) -> Vec<usize> {
    (0..t.rows())
        .map(|r| {
            let row = t.row(r);
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

/// Trains a softmax classifier on a labeled dataset with a seeded hold-out
/// split; the hold-out accuracy is stored on the result (measured on the
/// training split when the hold-out set is empty).
pub fn train_classifier(ds: &Dataset, cfg: &ClassifierConfig) -> Result<FeatureClassifier> {
    let labels = ds
        .labels()
        .ok_or_else(|| Error::Parameter("classifier training needs labels".into()))?;
    let classes = ds.classes();
    let distinct = {
        let mut seen = vec![false; classes];
        labels.iter().for_each(|&y| seen[y] = true);
        seen.iter().filter(|&&s| s).count()
    };
    if distinct < 2 {
        return Err(Error::Parameter(format!(
            "classifier needs at least two classes, data has {distinct}"
        )));
    }
    if cfg.batch == 0 {
        return Err(Error::Parameter("batch must be ≥ 1".into()));
    }
    if !(0.0..1.0).contains(&cfg.holdout) {
        return Err(Error::Parameter(format!("holdout fraction {} outside [0, 1)", cfg.holdout)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut rng);
    let n_hold = (ds.len() as f64 * cfg.holdout).floor() as usize;
    let (held, train_idx) = order.split_at(n_hold);
    let mut train_idx = train_idx.to_vec();

    let mut widths = vec![ds.dim()];
    widths.extend(&cfg.hidden);
    widths.push(classes);
    let spec = MlpSpec::with_hidden(widths, Activation::leaky_relu(cfg.leaky_slope), Activation::Identity)?;
    let mut params = spec.init_params(CLASSIFIER_LABEL, cfg.init, &mut rng);
    let mut adam = AdamState::new(cfg.adam, &params);

    for _ in 0..cfg.epochs {
        train_idx.shuffle(&mut rng);
        for chunk in train_idx.chunks(cfg.batch) {
            let x = ds.samples().select_rows(chunk);
            let y: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let mut tape = Tape::new();
            let input = tape.constant(x);
            let logits = spec.forward(&mut tape, &params, input, true)?;
            let sum = tape.softmax_cross_entropy(logits, &y)?;
            let loss = tape.affine(sum, 1.0 / chunk.len() as f64, 0.0);
            tape.backward(loss)?;
            params.zero_grads();
            tape.accumulate_into(&mut params)?;
            adam_step(&mut params, &mut adam)?;
        }
    }

    let mut clf = FeatureClassifier::new(spec, params)?;
    let eval: &[usize] = if held.is_empty() { &train_idx } else { held };
    let eval_labels: Vec<usize> = eval.iter().map(|&i| labels[i]).collect();
    clf.holdout_accuracy = clf.accuracy(&ds.samples().select_rows(eval), &eval_labels)?;
    Ok(clf)
}
