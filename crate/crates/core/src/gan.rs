//! Generator and discriminator wrappers, adversarial losses and the
//! Gaussian-to-class label map.
//!
//! Every loss here is a sum of per-coordinate binary cross-entropies,
//! `-[t·ln p + (1-t)·ln(1-p)]`, with probabilities clamped to
//! `[PROB_CLAMP, 1 - PROB_CLAMP]`. The target matrix `t` selects the variant:
//! all ones for the unsupervised generator and real samples, all zeros for
//! fake samples shown to the discriminator, and a one-hot row at the
//! (mapped) class in the supervised setting.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, MlpSpec, ParamStore, Tape, Tensor, Var, WeightInit};

pub const GENERATOR_LABEL: &str = "generator";
pub const DISCRIMINATOR_LABEL: &str = "discriminator";

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before logs.
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Supervision {
    Unsupervised,
    /// N-way discriminator over `classes` labels.
    Supervised { classes: usize },
}

impl Supervision {
    /// Discriminator output width.
    pub fn outputs(self) -> usize {
        match self {
            Supervision::Unsupervised => 1,
            Supervision::Supervised { classes } => classes,
        }
    }
}

/// Map `f: [K] → [N]` from mixture components to class labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMap {
    classes: usize,
    table: Vec<usize>,
}

impl LabelMap {
    pub fn class_of(&self, component: usize) -> usize {
        self.table[component]
    }

    pub fn components(&self) -> usize {
        self.table.len()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn table(&self) -> &[usize] {
        &self.table
    }
}

/// Builds `f`. Without an explicit table: identity when `K = N`,
/// `k mod N` when `K > N` and `k ↦ k` when `K < N`.
pub fn make_label_map(k: usize, n: usize, table: Option<&[usize]>) -> Result<LabelMap> {
    if k == 0 || n == 0 {
        return Err(Error::Parameter(format!("label map needs K, N ≥ 1 (K={k}, N={n})")));
    }
    let table = match table {
        Some(t) => {
            if t.len() != k {
                return Err(Error::Parameter(format!(
                    "label table has {} entries for K={k}",
                    t.len()
                )));
            }
            if let Some(bad) = t.iter().find(|&&c| c >= n) {
                return Err(Error::Parameter(format!(
                    "label table maps to class {bad}, outside [0, {n})"
                )));
            }
            t.to_vec()
        }
        None => (0..k).map(|c| c % n).collect(),
    };
    Ok(LabelMap { classes: n, table })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub spec: MlpSpec,
    pub params: ParamStore,
}

/// Hidden widths and heads for both networks.
#[derive(Debug, Clone, PartialEq)]
pub struct GanArchitecture {
    pub generator_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
    pub leaky_slope: f64,
    pub generator_output: Activation,
    pub init: WeightInit,
}

impl GanArchitecture {
    /// Two 128-unit hidden layers; the `1.5·tanh` head covers the toy
    /// data's [-1.5, 1.5] box.
    pub fn toy() -> Self {
        GanArchitecture {
            generator_hidden: vec![128, 128],
            discriminator_hidden: vec![128, 128],
            leaky_slope: 0.2,
            generator_output: Activation::ScaledTanh { scale: 1.5 },
            init: WeightInit::default(),
        }
    }

    /// MLP pair for [-1, 1]-normalized images.
    pub fn image() -> Self {
        GanArchitecture {
            generator_hidden: vec![256, 256],
            discriminator_hidden: vec![256, 256],
            leaky_slope: 0.2,
            generator_output: Activation::Tanh,
            init: WeightInit::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanModel {
    pub generator: Network,
    pub discriminator: Network,
    pub supervision: Supervision,
    pub label_map: Option<LabelMap>,
    /// Generator input is `[z, one_hot(k)]` instead of `z` (used by the
    /// supervised baseline, whose prior carries no component information).
    pub conditional: Option<usize>,
}

impl GanModel {
    pub fn new(
        generator: Network,
        discriminator: Network,
        supervision: Supervision,
        label_map: Option<LabelMap>,
        conditional: Option<usize>,
    ) -> Result<Self> {
        let width = discriminator.spec.output_width();
        if width != supervision.outputs() {
            return Err(Error::Parameter(format!(
                "discriminator has {width} outputs, {supervision:?} needs {}",
                supervision.outputs()
            )));
        }
        if generator.spec.output_width() != discriminator.spec.input_width() {
            return Err(Error::Dimension(format!(
                "generator emits {} features, discriminator reads {}",
                generator.spec.output_width(),
                discriminator.spec.input_width()
            )));
        }
        if generator.params.label() != GENERATOR_LABEL
            || discriminator.params.label() != DISCRIMINATOR_LABEL
        {
            return Err(Error::Parameter("parameter stores carry the wrong labels".into()));
        }
        if let (Supervision::Supervised { classes }, Some(map)) = (supervision, &label_map) {
            if map.classes() != classes {
                return Err(Error::Parameter(format!(
                    "label map targets {} classes, discriminator has {classes}",
                    map.classes()
                )));
            }
        }
        if matches!(supervision, Supervision::Supervised { .. }) && label_map.is_none() {
            return Err(Error::Parameter("supervised model needs a label map".into()));
        }
        Ok(GanModel {
            generator,
            discriminator,
            supervision,
            label_map,
            conditional,
        })
    }

    /// Fresh model for `latent_dim → data_dim`.
    pub fn build<R: Rng + ?Sized>(
        arch: &GanArchitecture,
        latent_dim: usize,
        data_dim: usize,
        supervision: Supervision,
        label_map: Option<LabelMap>,
        conditional: Option<usize>,
        rng: &mut R,
    ) -> Result<Self> {
        let leaky = Activation::leaky_relu(arch.leaky_slope);
        let mut g_widths = vec![latent_dim + conditional.unwrap_or(0)];
        g_widths.extend(&arch.generator_hidden);
        g_widths.push(data_dim);
        let g_spec = MlpSpec::with_hidden(g_widths, leaky, arch.generator_output)?;
        let mut d_widths = vec![data_dim];
        d_widths.extend(&arch.discriminator_hidden);
        d_widths.push(supervision.outputs());
        let d_spec = MlpSpec::with_hidden(d_widths, leaky, Activation::Sigmoid)?;
        let g_params = g_spec.init_params(GENERATOR_LABEL, arch.init, rng);
        let d_params = d_spec.init_params(DISCRIMINATOR_LABEL, arch.init, rng);
        Self::new(
            Network {
                spec: g_spec,
                params: g_params,
            },
            Network {
                spec: d_spec,
                params: d_params,
            },
            supervision,
            label_map,
            conditional,
        )
    }

    pub fn latent_dim(&self) -> usize {
        self.generator.spec.input_width() - self.conditional.unwrap_or(0)
    }

    pub fn data_dim(&self) -> usize {
        self.generator.spec.output_width()
    }

    fn conditioned_input(&self, z: &Tensor, components: Option<&[usize]>) -> Result<Tensor> {
        let Some(k) = self.conditional else {
            return Ok(z.clone());
        };
        let comps = components.ok_or_else(|| {
            Error::Usage("conditional generator needs component indices".into())
        })?;
        let onehot = one_hot(comps, k)?;
        let rows = z.rows();
        let mut data = Vec::with_capacity(rows * (z.cols() + k));
        for r in 0..rows {
            data.extend_from_slice(z.row(r));
            data.extend_from_slice(onehot.row(r));
        }
        Tensor::new(vec![rows, z.cols() + k], data)
    }

    /// `G(z)` for a `B×d` latent batch.
    pub fn generate(&self, z: &Tensor) -> Result<Tensor> {
        self.generate_for(z, None)
    }

    /// `G(z)`, passing component indices to conditional generators.
    pub fn generate_for(&self, z: &Tensor, components: Option<&[usize]>) -> Result<Tensor> {
        let z = as_matrix(z)?;
        if z.cols() != self.latent_dim() {
            return Err(Error::Dimension(format!(
                "latent width {}, generator expects {}",
                z.cols(),
                self.latent_dim()
            )));
        }
        if z.rows() == 0 {
            return Ok(Tensor::zeros(&[0, self.data_dim()]));
        }
        let input = self.conditioned_input(&z, components)?;
        self.generator.spec.infer(&self.generator.params, &input)
    }

    /// Generator pass recorded on a tape.
    pub fn generate_on_tape(
        &self,
        tape: &mut Tape,
        z: Var,
        components: &[usize],
        trainable: bool,
    ) -> Result<Var> {
        let input = match self.conditional {
            Some(k) => {
                let oh = tape.constant(one_hot(components, k)?);
                tape.concat_cols(z, oh)?
            }
            None => z,
        };
        self.generator
            .spec
            .forward(tape, &self.generator.params, input, trainable)
    }

    /// `D(x)` with sigmoid outputs in (0, 1).
    pub fn discriminate(&self, x: &Tensor) -> Result<Tensor> {
        let x = as_matrix(x)?;
        if x.rows() == 0 {
            return Ok(Tensor::zeros(&[0, self.supervision.outputs()]));
        }
        self.discriminator.spec.infer(&self.discriminator.params, &x)
    }

    pub fn discriminate_on_tape(&self, tape: &mut Tape, x: Var, trainable: bool) -> Result<Var> {
        self.discriminator
            .spec
            .forward(tape, &self.discriminator.params, x, trainable)
    }

    /// Generator-loss target rows for samples from `components`.
    pub fn generator_targets(&self, components: &[usize]) -> Result<Tensor> {
        match (self.supervision, &self.label_map) {
            (Supervision::Unsupervised, _) => Ok(Tensor::filled(&[components.len(), 1], 1.0)),
            (Supervision::Supervised { classes }, Some(map)) => {
                let classes_of = components
                    .iter()
                    .map(|&k| {
                        if k < map.components() {
                            Ok(map.class_of(k))
                        } else {
                            Err(Error::Parameter(format!("component {k} has no label mapping")))
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                one_hot(&classes_of, classes)
            }
            (Supervision::Supervised { .. }, None) => {
                Err(Error::Parameter("supervised model without label map".into()))
            }
        }
    }

    /// Discriminator target rows for real samples.
    pub fn real_targets(&self, rows: usize, labels: Option<&[usize]>) -> Result<Tensor> {
        match self.supervision {
            Supervision::Unsupervised => Ok(Tensor::filled(&[rows, 1], 1.0)),
            Supervision::Supervised { classes } => {
                let labels = labels.ok_or_else(|| {
                    Error::Parameter("supervised discriminator needs labeled real data".into())
                })?;
                one_hot(labels, classes)
            }
        }
    }
}

fn as_matrix(t: &Tensor) -> Result<Tensor> {
    t.clone().reshape(vec![t.rows(), t.cols()])
}

/// `B×n` one-hot rows.
pub fn one_hot(indices: &[usize], n: usize) -> Result<Tensor> {
    let mut data = vec![0.0; indices.len() * n];
    for (r, &i) in indices.iter().enumerate() {
        if i >= n {
            return Err(Error::Parameter(format!("index {i} out of range for {n} classes")));
        }
        data[r * n + i] = 1.0;
    }
    Tensor::new(vec![indices.len(), n], data)
}

/// Sum over all entries of `-[t·ln p + (1-t)·ln(1-p)]` with clamped `p`.
pub fn bce_sum_on_tape(tape: &mut Tape, probs: Var, targets: &Tensor) -> Result<Var> {
    if tape.value(probs).shape() != targets.shape() {
        return Err(Error::Dimension(format!(
            "probabilities {:?} vs targets {:?}",
            tape.value(probs).shape(),
            targets.shape()
        )));
    }
    if let Some(bad) = tape.value(probs).data().iter().find(|p| p.is_nan()) {
        return Err(Error::Numeric(format!("discriminator output {bad}")));
    }
    let p = tape.clamp(probs, PROB_CLAMP, 1.0 - PROB_CLAMP);
    let log_p = tape.ln(p);
    let q = tape.affine(p, -1.0, 1.0);
    let log_q = tape.ln(q);
    let t = tape.constant(targets.clone());
    let complement: Vec<f64> = targets.data().iter().map(|v| 1.0 - v).collect();
    let u = tape.constant(Tensor::new(targets.shape().to_vec(), complement)?);
    let a = tape.mul(log_p, t)?;
    let b = tape.mul(log_q, u)?;
    let both = tape.add(a, b)?;
    let s = tape.sum(both);
    Ok(tape.affine(s, -1.0, 0.0))
}

fn bce_mean(probs: &Tensor, targets: &Tensor) -> Result<f64> {
    let rows = probs.rows();
    if rows == 0 {
        return Err(Error::Parameter("loss of an empty batch".into()));
    }
    let mut tape = Tape::new();
    let p = tape.constant(as_matrix(probs)?);
    let s = bce_sum_on_tape(&mut tape, p, targets)?;
    Ok(tape.value(s).data()[0] / rows as f64)
}

fn check_width(t: &Tensor, width: usize, what: &str) -> Result<()> {
    if t.cols() != width {
        return Err(Error::Dimension(format!(
            "{what}: expected width {width}, got {:?}",
            t.shape()
        )));
    }
    Ok(())
}

/// `-E[log D(G(z))]`.
pub fn loss_g_unsup(d_on_fake: &Tensor) -> Result<f64> {
    check_width(d_on_fake, 1, "loss_g_unsup")?;
    bce_mean(d_on_fake, &Tensor::filled(&[d_on_fake.rows(), 1], 1.0))
}

/// `-E[log D(x)] - E[log(1 - D(G(z)))]`, the sum of both expectations.
pub fn loss_d_unsup(d_on_real: &Tensor, d_on_fake: &Tensor) -> Result<f64> {
    check_width(d_on_real, 1, "loss_d_unsup real")?;
    check_width(d_on_fake, 1, "loss_d_unsup fake")?;
    let real = bce_mean(d_on_real, &Tensor::filled(&[d_on_real.rows(), 1], 1.0))?;
    let fake = bce_mean(d_on_fake, &Tensor::zeros(&[d_on_fake.rows(), 1]))?;
    Ok(real + fake)
}

/// Supervised generator loss: the mapped class coordinate should read
/// "real", every other coordinate "not real".
pub fn loss_g_sup(d_on_fake: &Tensor, component_ids: &[usize], map: &LabelMap) -> Result<f64> {
    check_width(d_on_fake, map.classes(), "loss_g_sup")?;
    if component_ids.len() != d_on_fake.rows() {
        return Err(Error::Dimension(format!(
            "{} component ids for {} rows",
            component_ids.len(),
            d_on_fake.rows()
        )));
    }
    let classes = component_ids
        .iter()
        .map(|&k| {
            if k < map.components() {
                Ok(map.class_of(k))
            } else {
                Err(Error::Parameter(format!("component {k} has no label mapping")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    bce_mean(d_on_fake, &one_hot(&classes, map.classes())?)
}

/// Supervised discriminator loss: labeled real rows plus all-negative fake
/// rows, each averaged over its own batch.
pub fn loss_d_sup(d_on_real: &Tensor, labels: &[usize], d_on_fake: &Tensor) -> Result<f64> {
    let n = d_on_real.cols();
    check_width(d_on_fake, n, "loss_d_sup fake")?;
    if labels.len() != d_on_real.rows() {
        return Err(Error::Dimension(format!(
            "{} labels for {} real rows",
            labels.len(),
            d_on_real.rows()
        )));
    }
    let real = bce_mean(d_on_real, &one_hot(labels, n)?)?;
    let fake = bce_mean(d_on_fake, &Tensor::zeros(&[d_on_fake.rows(), n]))?;
    Ok(real + fake)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const LN2: f64 = std::f64::consts::LN_2;

    fn col(v: &[f64]) -> Tensor {
        Tensor::new(vec![v.len(), 1], v.to_vec()).unwrap()
    }

    #[test]
    fn unsupervised_generator_loss_values() {
        assert!((loss_g_unsup(&col(&[0.5, 0.5])).unwrap() - LN2).abs() < 1e-15);
        assert!(loss_g_unsup(&col(&[1.0, 1.0])).unwrap() < 1e-6);
        let v = loss_g_unsup(&col(&[0.9, 0.1])).unwrap();
        assert!((v - (-(0.9f64.ln()) - 0.1f64.ln()) / 2.0).abs() < 1e-12);
        assert!((v - 1.204).abs() < 1e-3);
    }

    #[test]
    fn unsupervised_discriminator_loss_values() {
        let half = col(&[0.5, 0.5]);
        assert!((loss_d_unsup(&half, &half).unwrap() - 2.0 * LN2).abs() < 1e-15);
        assert!(loss_d_unsup(&col(&[1.0]), &col(&[0.0])).unwrap() < 1e-6);
        let v = loss_d_unsup(&col(&[0.8]), &col(&[0.3])).unwrap();
        assert!((v - (-(0.8f64.ln()) - 0.7f64.ln())).abs() < 1e-12);
        assert!((v - 0.580).abs() < 1e-3);
    }

    #[test]
    fn clamping_keeps_losses_finite() {
        let v = loss_d_unsup(&col(&[0.0, 1.0]), &col(&[1.0, 0.0])).unwrap();
        assert!(v.is_finite() && v > 0.0);
        assert!(loss_g_unsup(&col(&[-0.5])).unwrap().is_finite());
        assert!(matches!(loss_g_unsup(&col(&[f64::NAN])), Err(Error::Numeric(_))));
    }

    #[test]
    fn supervised_losses() {
        let map = make_label_map(10, 10, None).unwrap();
        let half = Tensor::filled(&[3, 10], 0.5);
        let v = loss_g_sup(&half, &[0, 4, 9], &map).unwrap();
        assert!((v - 10.0 * LN2).abs() < 1e-12);
        assert!((v - 6.931).abs() < 1e-3);

        // Optimum: target coordinate → 1, others → 0.
        let mut rows = Tensor::zeros(&[2, 10]);
        rows.data_mut()[3] = 1.0;
        rows.data_mut()[10 + 7] = 1.0;
        assert!(loss_g_sup(&rows, &[3, 7], &map).unwrap() < 1e-5);

        let half2 = Tensor::filled(&[1, 2], 0.5);
        let real_term = loss_d_sup(&half2, &[1], &Tensor::zeros(&[0, 2]));
        assert!(real_term.is_err(), "empty fake batch has no mean");
        let v = loss_d_sup(&half2, &[1], &half2).unwrap();
        assert!((v - 4.0 * LN2).abs() < 1e-12);

        let real = Tensor::new(vec![2, 3], vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let fake = Tensor::zeros(&[4, 3]);
        assert!(loss_d_sup(&real, &[0, 2], &fake).unwrap() < 1e-5);
    }

    #[test]
    fn single_class_supervision_reduces_to_unsupervised() {
        let map = make_label_map(1, 1, None).unwrap();
        let fake = col(&[0.2, 0.7, 0.55]);
        let real = col(&[0.9, 0.35]);
        let g_sup = loss_g_sup(&fake, &[0, 0, 0], &map).unwrap();
        assert!((g_sup - loss_g_unsup(&fake).unwrap()).abs() < 1e-12);
        let d_sup = loss_d_sup(&real, &[0, 0], &fake).unwrap();
        assert!((d_sup - loss_d_unsup(&real, &fake).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn label_maps() {
        let f = make_label_map(10, 10, None).unwrap();
        assert_eq!(f.table(), (0..10).collect::<Vec<_>>());
        let f = make_label_map(20, 10, None).unwrap();
        let mut hits = [0; 10];
        f.table().iter().for_each(|&c| hits[c] += 1);
        assert_eq!(hits, [2; 10]);
        assert!(f.table().iter().enumerate().all(|(k, &c)| c == k % 10));
        let f = make_label_map(2, 4, Some(&[3, 3])).unwrap();
        assert_eq!(f.table(), &[3, 3]);
        assert!(make_label_map(2, 4, Some(&[3, 4])).is_err());
        let f = make_label_map(3, 5, None).unwrap();
        assert_eq!(f.table(), &[0, 1, 2]);
    }

    fn zero_model(supervision: Supervision) -> GanModel {
        let mut arch = GanArchitecture::toy();
        arch.init = WeightInit { std: 0.0 };
        let map = match supervision {
            Supervision::Supervised { classes } => Some(make_label_map(classes, classes, None).unwrap()),
            Supervision::Unsupervised => None,
        };
        GanModel::build(&arch, 5, 2, supervision, map, None, &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap()
    }

    #[test]
    fn zero_weight_networks() {
        let m = zero_model(Supervision::Unsupervised);
        let z = Tensor::filled(&[4, 5], 0.3);
        let x = m.generate(&z).unwrap();
        assert!(x.data().iter().all(|&v| v == 0.0));
        let d = m.discriminate(&Tensor::filled(&[3, 2], 1.7)).unwrap();
        assert_eq!(d.shape(), &[3, 1]);
        assert!(d.data().iter().all(|&v| v == 0.5));
        let empty = m.generate(&Tensor::zeros(&[0, 5])).unwrap();
        assert_eq!(empty.shape(), &[0, 2]);
        let sup = zero_model(Supervision::Supervised { classes: 10 });
        assert_eq!(sup.discriminate(&Tensor::zeros(&[2, 2])).unwrap().shape(), &[2, 10]);
    }

    #[test]
    fn single_layer_discriminator_matches_manual_sigmoid() {
        let spec = MlpSpec::new(vec![2, 1], vec![Activation::Sigmoid]).unwrap();
        let mut params = ParamStore::new(DISCRIMINATOR_LABEL);
        params.insert("layer0.weight", Tensor::new(vec![2, 1], vec![0.7, -1.3]).unwrap()).unwrap();
        params.insert("layer0.bias", Tensor::new(vec![1], vec![0.2]).unwrap()).unwrap();
        let g_spec = MlpSpec::new(vec![1, 2], vec![Activation::Identity]).unwrap();
        let g_params = g_spec.init_params(GENERATOR_LABEL, WeightInit::default(), &mut ChaCha8Rng::seed_from_u64(1));
        let model = GanModel::new(
            Network { spec: g_spec, params: g_params },
            Network { spec, params },
            Supervision::Unsupervised,
            None,
            None,
        )
        .unwrap();
        let out = model.discriminate(&Tensor::new(vec![1, 2], vec![0.4, 0.9]).unwrap()).unwrap();
        let pre: f64 = 0.4 * 0.7 + 0.9 * -1.3 + 0.2;
        assert!((out.data()[0] - 1.0 / (1.0 + (-pre).exp())).abs() < 1e-15);
    }

    #[test]
    fn discriminator_width_must_match_supervision() {
        let m = zero_model(Supervision::Unsupervised);
        let r = GanModel::new(
            m.generator.clone(),
            m.discriminator.clone(),
            Supervision::Supervised { classes: 3 },
            Some(make_label_map(3, 3, None).unwrap()),
            None,
        );
        assert!(r.is_err());
    }
}
