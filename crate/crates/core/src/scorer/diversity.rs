use crate::data::Modality;
use crate::error::{Error, Result};
use crate::latent::GaussianMixture;
use crate::nn::Tensor;

use super::classifier::FeatureClassifier;
use super::msssim::{ms_ssim_prepared, prepare, MsSsimParams};

/// `1 - (1/|X|²) Σ_{x,x'} MS-SSIM(x, x')` over all ordered pairs, self-pairs
/// included, with MS-SSIM clamped to `[0, 1]`.
pub fn d_intra(samples: &Tensor, modality: Modality, params: &MsSsimParams) -> Result<f64> {
    let Modality::Images {
        height,
        width,
        channels,
    } = modality
    else {
        return Err(Error::UnsupportedModality(
            "intra-class diversity is defined for images only".into(),
        ));
    };
    let n = samples.rows();
    if n == 0 {
        return Err(Error::Parameter("diversity of an empty set".into()));
    }
    let shape = (height, width, channels);
    let prepared = (0..n)
        .map(|i| prepare(samples.row(i), shape, params))
        .collect::<Result<Vec<_>>>()?;
    let mut total = 0.0;
    for i in 0..n {
        total += ms_ssim_prepared(&prepared[i], &prepared[i], params)?.clamp(0.0, 1.0);
        for j in i + 1..n {
            total += 2.0 * ms_ssim_prepared(&prepared[i], &prepared[j], params)?.clamp(0.0, 1.0);
        }
    }
    Ok(1.0 - total / (n * n) as f64)
}

fn entropy(p: &[f64]) -> f64 {
    0.0 - p.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}

/// Normalized entropy `H(mean one-hot prediction) / ln N`.
pub fn d_inter_from_predictions(predictions: &[usize], classes: usize) -> Result<f64> {
    if classes < 2 {
        return Err(Error::Parameter(format!(
            "inter-class diversity needs N ≥ 2, got {classes}"
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Parameter("diversity of an empty set".into()));
    }
    let mut mean = vec![0.0; classes];
    for &p in predictions {
        if p >= classes {
            return Err(Error::Parameter(format!("prediction {p} outside [0, {classes})")));
        }
        mean[p] += 1.0;
    }
    mean.iter_mut().for_each(|v| *v /= predictions.len() as f64);
    Ok(entropy(&mean) / (classes as f64).ln())
}

/// Soft variant: entropy of the mean softmax row.
pub fn d_inter_soft(probs: &Tensor) -> Result<f64> {
    let classes = probs.cols();
    if classes < 2 {
        return Err(Error::Parameter(format!(
            "inter-class diversity needs N ≥ 2, got {classes}"
        )));
    }
    let mean = column_means(probs)?;
    Ok(entropy(&mean) / (classes as f64).ln())
}

/// Hard (argmax) inter-class diversity of `x` under `clf`.
pub fn d_inter(x: &Tensor, clf: &FeatureClassifier) -> Result<f64> {
    d_inter_from_predictions(&clf.predict(x)?, clf.classes)
}

fn column_means(probs: &Tensor) -> Result<Vec<f64>> {
    let n = probs.rows();
    if n == 0 {
        return Err(Error::Parameter("score of an empty set".into()));
    }
    let cols = probs.cols();
    let mut mean = vec![0.0; cols];
    for r in 0..n {
        mean.iter_mut().zip(probs.row(r)).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    Ok(mean)
}

/// `exp(E_x[KL(p(y|x) ‖ p(y))])` with `p(y)` the mean row.
pub fn classifier_is_from_probs(probs: &Tensor) -> Result<f64> {
    let marginal = column_means(probs)?;
    let n = probs.rows();
    let mut kl_sum = 0.0;
    for r in 0..n {
        kl_sum += probs
            .row(r)
            .iter()
            .zip(&marginal)
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, q)| p * (p.ln() - q.max(f64::MIN_POSITIVE).ln()))
            .sum::<f64>();
    }
    Ok((kl_sum / n as f64).exp())
}

pub fn classifier_is(x: &Tensor, clf: &FeatureClassifier) -> Result<f64> {
    classifier_is_from_probs(&clf.probabilities(x)?)
}

/// `√(d_intra · d_inter)`.
pub fn diversity(d_intra: f64, d_inter: f64) -> f64 {
    (d_intra * d_inter).sqrt()
}

/// `√(q · d)`.
pub fn combined(q: f64, d: f64) -> f64 {
    (q * d).sqrt()
}

/// Mean negative log-likelihood of the rows of `x` under `mixture`.
pub fn nll_under_mixture(x: &Tensor, mixture: &GaussianMixture) -> Result<f64> {
    if x.rows() == 0 {
        return Err(Error::Parameter("likelihood of an empty set".into()));
    }
    let mut total = 0.0;
    for r in 0..x.rows() {
        total -= mixture.log_density(x.row(r))?;
    }
    Ok(total / x.rows() as f64)
}
