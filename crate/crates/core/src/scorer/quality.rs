use crate::error::{Error, Result};
use crate::nn::Tensor;

use super::classifier::FeatureClassifier;

/// Above this distance `exp(dist)` overflows; `a·e^{-dist}` is used instead.
const OVERFLOW_GUARD: f64 = 700.0;

/// Exact nearest-neighbour search over a fixed set of feature rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureIndex {
    features: Tensor,
}

impl FeatureIndex {
    pub fn new(features: Tensor) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::Parameter("nearest-neighbour set is empty".into()));
        }
        let features = features.clone().reshape(vec![features.rows(), features.cols()])?;
        Ok(FeatureIndex { features })
    }

    /// Indexes the classifier features of every row of `train`.
    pub fn from_classifier(clf: &FeatureClassifier, train: &Tensor) -> Result<Self> {
        Self::new(clf.features(train)?)
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// `(index, euclidean distance)` of the closest row; ties keep the
    /// lowest index.
    pub fn nearest(&self, query: &[f64]) -> Result<(usize, f64)> {
        if query.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "query of width {} against {}-wide features",
                query.len(),
                self.dim()
            )));
        }
        let mut best = (0, f64::INFINITY);
        for i in 0..self.len() {
            let d2: f64 = self
                .features
                .row(i)
                .iter()
                .zip(query)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if d2 < best.1 {
                best = (i, d2);
            }
        }
        if !best.1.is_finite() {
            return Err(Error::Numeric("non-finite feature distance".into()));
        }
        Ok((best.0, best.1.sqrt()))
    }
}

/// `a / (a + e^dist)`, the quality of a sample at feature distance `dist`
/// from its nearest training neighbour.
pub fn quality_from_distance(dist: f64, a: f64) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::Parameter(format!("quality constant a = {a} must be > 0")));
    }
    if !(dist >= 0.0) {
        return Err(Error::Numeric(format!("distance {dist}")));
    }
    Ok(if dist > OVERFLOW_GUARD {
        a * (-dist).exp()
    } else {
        a / (a + dist.exp())
    })
}

/// Quality of the single sample `x`.
pub fn quality(x: &[f64], clf: &FeatureClassifier, index: &FeatureIndex, a: f64) -> Result<f64> {
    let t = Tensor::new(vec![1, x.len()], x.to_vec())?;
    let f = clf.features(&t)?;
    quality_from_distance(index.nearest(f.row(0))?.1, a)
}

/// Per-row qualities of `x`.
pub fn qualities(x: &Tensor, clf: &FeatureClassifier, index: &FeatureIndex, a: f64) -> Result<Vec<f64>> {
    let f = clf.features(x)?;
    (0..f.rows())
        .map(|r| quality_from_distance(index.nearest(f.row(r))?.1, a))
        .collect()
}

/// Mean quality over a set.
pub fn quality_set(x: &Tensor, clf: &FeatureClassifier, index: &FeatureIndex, a: f64) -> Result<f64> {
    if x.rows() == 0 {
        return Err(Error::Parameter("quality of an empty set".into()));
    }
    let q = qualities(x, clf, index, a)?;
    Ok(q.iter().sum::<f64>() / q.len() as f64)
}
