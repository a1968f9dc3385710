use super::mlp::MlpSpec;
use super::tape::{Tape, Var};
use super::{ParamStore, Tensor};
use crate::error::Result;

/// Max relative discrepancy between taped gradients and central finite
/// differences of the scalar built by `loss`, over every entry of `params`.
///
/// `loss` must register the parameters it uses with [`Tape::param`].
pub fn finite_diff_check_with(
    params: &ParamStore,
    h: f64,
    loss: impl Fn(&mut Tape, &ParamStore) -> Result<Var>,
) -> Result<f64> {
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut analytic = params.clone();
    analytic.zero_grads();
    let mut tape = Tape::new();
    let out = loss(&mut tape, &analytic)?;
    tape.backward(out)?;
    tape.accumulate_into(&mut analytic)?;

    let eval = |p: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new();
        let out = loss(&mut tape, p)?;
        Ok(tape.value(out).data()[0])
    };

    let mut worst: f64 = 0.0;
    let mut probe = params.clone();
    let names: Vec<String> = params.names().map(str::to_string).collect();
    for name in &names {
        let len = params.get(name)?.len();
        let grads = analytic
            .get(name)?
            .grad()
            .map_or_else(|| vec![0.0; len], <[f64]>::to_vec);
        for (i, &a) in grads.iter().enumerate() {
            let original = probe.get(name)?.data()[i];
            probe.get_mut(name)?.data_mut()[i] = original + h;
            let up = eval(&probe)?;
            probe.get_mut(name)?.data_mut()[i] = original - h;
            let down = eval(&probe)?;
            probe.get_mut(name)?.data_mut()[i] = original;
            let numeric = (up - down) / (2.0 * h);
            let denom = a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((a - numeric).abs() / denom);
        }
    }
    Ok(worst)
}

/// Gradient check of an MLP under a scalar loss of its output.
pub fn finite_diff_check(
    spec: &MlpSpec,
    params: &ParamStore,
    batch: &Tensor,
    loss_fn: impl Fn(&mut Tape, Var) -> Result<Var>,
    h: f64,
) -> Result<f64> {
    finite_diff_check_with(params, h, |tape, p| {
        let x = tape.constant(batch.clone());
        let out = spec.forward(tape, p, x, true)?;
        loss_fn(tape, out)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn linear_model_quadratic_loss() {
        let spec = MlpSpec::new(vec![3, 1], vec![Activation::Identity]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let params = spec.init_params("lin", crate::nn::WeightInit { std: 1.0 }, &mut rng);
        let x = Tensor::new(vec![4, 3], (0..12).map(|i| (i as f64 - 5.0) * 0.3).collect())
            .unwrap();
        let err = finite_diff_check(
            &spec,
            &params,
            &x,
            |tape, out| {
                let sq = tape.mul(out, out)?;
                Ok(tape.sum(sq))
            },
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn empty_store_has_zero_error() {
        let params = ParamStore::new("none");
        let err = finite_diff_check_with(&params, 1e-5, |tape, _| {
            let c = tape.constant(Tensor::scalar(2.0));
            Ok(tape.sum(c))
        })
        .unwrap();
        assert_eq!(err, 0.0);
    }
}
