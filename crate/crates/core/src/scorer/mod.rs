//! Sample-quality and diversity scores for generated sets, all computed
//! against a classifier trained on the generator's own training data.

mod classifier;
mod diversity;
mod msssim;
mod quality;

use std::io::Write;

use crate::error::Result;

pub use classifier::{
    argmax_rows, softmax_rows, train_classifier, ClassifierConfig, FeatureClassifier,
    CLASSIFIER_LABEL,
};
pub use diversity::{
    classifier_is, classifier_is_from_probs, combined, d_inter, d_inter_from_predictions,
    d_inter_soft, d_intra, diversity, nll_under_mixture,
};
pub use msssim::{ms_ssim, ms_ssim_prepared, ms_ssim_raw, prepare, ImageShape, MsSsimParams, PreparedImage};
pub use quality::{qualities, quality, quality_from_distance, quality_set, FeatureIndex};

/// One row of scores for a generated set at a given σ-scale. Scores that do
/// not apply to the data modality are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub sigma: f64,
    pub q: f64,
    pub d_intra: Option<f64>,
    pub d_inter: f64,
    pub d: Option<f64>,
    pub s: Option<f64>,
    pub classifier_is: f64,
    pub nll: Option<f64>,
    pub n_samples: usize,
}

pub const SCORE_HEADER: &str = "sigma,q,d_intra,d_inter,d,s,is,nll,n_samples";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ScoreReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.sigma,
            self.q,
            opt(self.d_intra),
            self.d_inter,
            opt(self.d),
            opt(self.s),
            self.classifier_is,
            opt(self.nll),
            self.n_samples
        )
    }

    /// Multi-line `key: value` summary.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "sigma_scale: {}", self.sigma)?;
        writeln!(out, "quality: {}", self.q)?;
        writeln!(out, "d_intra: {}", opt(self.d_intra))?;
        writeln!(out, "d_inter: {}", self.d_inter)?;
        writeln!(out, "diversity: {}", opt(self.d))?;
        writeln!(out, "combined: {}", opt(self.s))?;
        writeln!(out, "classifier_is: {}", self.classifier_is)?;
        writeln!(out, "nll: {}", opt(self.nll))?;
        writeln!(out, "samples: {}", self.n_samples)?;
        Ok(())
    }
}
