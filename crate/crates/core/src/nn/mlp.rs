use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::activation::Activation;
use super::linalg::gemm;
use super::tape::{Tape, Var};
use super::{ParamStore, Tensor};
use crate::error::{Error, Result};

/// Layer widths plus one activation per layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    widths: Vec<usize>,
    activations: Vec<Activation>,
}

/// Gaussian weight initialization; biases start at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightInit {
    pub std: f64,
}

impl Default for WeightInit {
    fn default() -> Self {
        WeightInit { std: 0.02 }
    }
}

impl MlpSpec {
    pub fn new(widths: Vec<usize>, activations: Vec<Activation>) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::Parameter("an MLP needs at least two widths".into()));
        }
        if widths.contains(&0) {
            return Err(Error::Parameter(format!("zero layer width in {widths:?}")));
        }
        if activations.len() != widths.len() - 1 {
            return Err(Error::Parameter(format!(
                "{} layers need {} activations, got {}",
                widths.len() - 1,
                widths.len() - 1,
                activations.len()
            )));
        }
        for act in &activations {
            if let Activation::LeakyRelu { slope } = act {
                if !(*slope > 0.0 && *slope < 1.0) {
                    return Err(Error::Parameter(format!(
                        "leaky-relu slope {slope} outside (0, 1)"
                    )));
                }
            }
        }
        Ok(MlpSpec {
            widths,
            activations,
        })
    }

    /// Same activation on every hidden layer, `output` on the last one.
    pub fn with_hidden(widths: Vec<usize>, hidden: Activation, output: Activation) -> Result<Self> {
        let layers = widths.len().saturating_sub(1);
        let mut acts = vec![hidden; layers.saturating_sub(1)];
        acts.push(output);
        Self::new(widths, acts)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().expect("validated non-empty")
    }

    pub fn num_layers(&self) -> usize {
        self.activations.len()
    }

    pub fn weight_name(layer: usize) -> String {
        format!("layer{layer}.weight")
    }

    pub fn bias_name(layer: usize) -> String {
        format!("layer{layer}.bias")
    }

    /// Fresh parameters: weights `in×out` drawn from N(0, std²), zero biases.
    pub fn init_params<R: Rng + ?Sized>(
        &self,
        label: &str,
        init: WeightInit,
        rng: &mut R,
    ) -> ParamStore {
        let mut store = ParamStore::new(label);
        let normal = Normal::new(0.0, init.std).expect("finite std");
        for (l, pair) in self.widths.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let w: Vec<f64> = (0..fan_in * fan_out).map(|_| normal.sample(rng)).collect();
            store
                .insert(
                    Self::weight_name(l),
                    Tensor::new(vec![fan_in, fan_out], w).expect("sized"),
                )
                .expect("unique names");
            store
                .insert(Self::bias_name(l), Tensor::zeros(&[fan_out]))
                .expect("unique names");
        }
        store
    }

    fn check_params(&self, params: &ParamStore) -> Result<()> {
        for (l, pair) in self.widths.windows(2).enumerate() {
            let w = params.get(&Self::weight_name(l))?;
            let b = params.get(&Self::bias_name(l))?;
            if w.shape() != [pair[0], pair[1]] || b.shape() != [pair[1]] {
                return Err(Error::Dimension(format!(
                    "layer {l}: weight {:?} / bias {:?} for widths {}→{}",
                    w.shape(),
                    b.shape(),
                    pair[0],
                    pair[1]
                )));
            }
        }
        Ok(())
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.input_width() {
            return Err(Error::Dimension(format!(
                "input width {cols}, network expects {}",
                self.input_width()
            )));
        }
        Ok(())
    }

    /// Records a forward pass on `tape`. With `trainable = false` the
    /// parameters enter the tape as constants.
    pub fn forward(
        &self,
        tape: &mut Tape,
        params: &ParamStore,
        input: Var,
        trainable: bool,
    ) -> Result<Var> {
        Ok(*self
            .forward_layers(tape, params, input, trainable)?
            .last()
            .expect("at least one layer"))
    }

    /// Like [`forward`](Self::forward) but returns every layer's activated output.
    pub fn forward_layers(
        &self,
        tape: &mut Tape,
        params: &ParamStore,
        input: Var,
        trainable: bool,
    ) -> Result<Vec<Var>> {
        self.check_params(params)?;
        self.check_input(tape.value(input).cols())?;
        let mut h = input;
        let mut outs = Vec::with_capacity(self.num_layers());
        for (l, act) in self.activations.iter().enumerate() {
            let (w, b) = if trainable {
                (
                    tape.param(params, &Self::weight_name(l))?,
                    tape.param(params, &Self::bias_name(l))?,
                )
            } else {
                (
                    tape.frozen(params, &Self::weight_name(l))?,
                    tape.frozen(params, &Self::bias_name(l))?,
                )
            };
            let pre = tape.matmul(h, w)?;
            let pre = tape.add_bias(pre, b)?;
            h = tape.activation(pre, *act);
            tape.value(h).check_finite(&format!("layer {l} activation"))?;
            outs.push(h);
        }
        Ok(outs)
    }

    /// Forward pass without recording a trace.
    pub fn infer(&self, params: &ParamStore, batch: &Tensor) -> Result<Tensor> {
        let mut layers = self.infer_layers_until(params, batch, self.num_layers())?;
        Ok(layers.pop().expect("at least one layer"))
    }

    /// Activated outputs of layers `1..=upto` (1-based) for `batch`.
    pub fn infer_layers_until(
        &self,
        params: &ParamStore,
        batch: &Tensor,
        upto: usize,
    ) -> Result<Vec<Tensor>> {
        self.check_params(params)?;
        self.check_input(batch.cols())?;
        let rows = batch.rows();
        let mut outs: Vec<Tensor> = Vec::with_capacity(upto);
        for (l, act) in self.activations.iter().enumerate().take(upto) {
            let input = outs.last().map_or(batch.data(), |t| t.data());
            let (k, n) = (self.widths[l], self.widths[l + 1]);
            let w = params.get(&Self::weight_name(l))?.data();
            let b = params.get(&Self::bias_name(l))?.data();
            let mut out = vec![0.0; rows * n];
            gemm(rows, k, n, input, (k as isize, 1), w, (n as isize, 1), &mut out, false);
            for row in out.chunks_mut(n) {
                for (x, bi) in row.iter_mut().zip(b) {
                    *x = act.apply(*x + bi);
                }
            }
            let t = Tensor::new(vec![rows, n], out)?;
            t.check_finite(&format!("layer {l} activation"))?;
            outs.push(t);
        }
        Ok(outs)
    }
}

/// A recorded forward pass that can be backpropagated exactly once.
#[derive(Debug)]
pub struct Trace {
    tape: Tape,
    output: Var,
}

impl Trace {
    pub fn tape(&self) -> &Tape {
        &self.tape
    }

    pub fn output(&self) -> Var {
        self.output
    }

    /// Propagates `loss_grad` (dL/d output) back through the recorded pass
    /// and accumulates parameter gradients into `params`.
    pub fn backprop(&mut self, loss_grad: &Tensor, params: &mut ParamStore) -> Result<()> {
        if loss_grad.shape() != self.tape.value(self.output).shape() {
            return Err(Error::Dimension(format!(
                "loss gradient {:?} for output {:?}",
                loss_grad.shape(),
                self.tape.value(self.output).shape()
            )));
        }
        self.tape
            .backward_with(self.output, loss_grad.data().to_vec())?;
        self.tape.accumulate_into(params)
    }
}

/// Runs `spec` on `batch`, returning the output together with a trace for
/// [`Trace::backprop`].
pub fn mlp_forward(spec: &MlpSpec, params: &ParamStore, batch: &Tensor) -> Result<(Tensor, Trace)> {
    let mut tape = Tape::new();
    let input = tape.constant(batch.clone().reshape(vec![batch.rows(), batch.cols()])?);
    let output = spec.forward(&mut tape, params, input, true)?;
    let value = tape.value(output).clone();
    Ok((value, Trace { tape, output }))
}
