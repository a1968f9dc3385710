//! Multi-scale structural similarity on `H×W×C` images (channels last).
//!
//! Per scale the local statistics use a normalized Gaussian window with
//! "valid" filtering. Scales 1..M-1 contribute their mean contrast-structure
//! term, scale M the mean full SSIM; terms are combined as a weighted
//! product. Negative terms are raised with a signed power so that
//! anticorrelated images score below zero before clamping.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MsSsimParams {
    pub weights: Vec<f64>,
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for MsSsimParams {
    fn default() -> Self {
        MsSsimParams {
            weights: vec![0.0448, 0.2856, 0.3001, 0.2363, 0.1333],
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 2.0,
        }
    }
}

impl MsSsimParams {
    fn validate(&self) -> Result<()> {
        if self.weights.is_empty() || self.weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::Parameter("MS-SSIM weights must be positive".into()));
        }
        if self.window == 0 || !(self.sigma > 0.0) || !(self.dynamic_range > 0.0) {
            return Err(Error::Parameter("invalid MS-SSIM window or range".into()));
        }
        Ok(())
    }

    /// Number of scales whose image side still fits the window.
    pub fn usable_scales(&self, height: usize, width: usize) -> usize {
        let (mut h, mut w) = (height, width);
        let mut scales = 0;
        while scales < self.weights.len() && h >= self.window && w >= self.window {
            scales += 1;
            h /= 2;
            w /= 2;
        }
        scales
    }

    /// Weights of the usable scales, renormalized to sum to one.
    pub fn effective_weights(&self, height: usize, width: usize) -> Vec<f64> {
        let m = self.usable_scales(height, width);
        let total: f64 = self.weights[..m].iter().sum();
        self.weights[..m].iter().map(|w| w / total).collect()
    }

    fn kernel(&self) -> Vec<f64> {
        let c = (self.window as f64 - 1.0) / 2.0;
        let raw: Vec<f64> = (0..self.window)
            .map(|i| {
                let t = i as f64 - c;
                (-t * t / (2.0 * self.sigma * self.sigma)).exp()
            })
            .collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / s).collect()
    }
}

/// Image shape `(height, width, channels)`.
pub type ImageShape = (usize, usize, usize);

/// Separable valid-mode Gaussian filter of an `h×w` plane.
fn filter(plane: &[f64], h: usize, w: usize, kernel: &[f64]) -> Vec<f64> {
    let k = kernel.len();
    let (oh, ow) = (h + 1 - k, w + 1 - k);
    let mut tmp = vec![0.0; h * ow];
    for r in 0..h {
        let row = &plane[r * w..(r + 1) * w];
        for c in 0..ow {
            tmp[r * ow + c] = kernel.iter().zip(&row[c..c + k]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            let mut acc = 0.0;
            for (i, kv) in kernel.iter().enumerate() {
                acc += kv * tmp[(r + i) * ow + c];
            }
            out[r * ow + c] = acc;
        }
    }
    out
}

fn downsample(plane: &[f64], h: usize, w: usize) -> (Vec<f64>, usize, usize) {
    let (nh, nw) = (h / 2, w / 2);
    let mut out = vec![0.0; nh * nw];
    for r in 0..nh {
        for c in 0..nw {
            let s = plane[2 * r * w + 2 * c]
                + plane[2 * r * w + 2 * c + 1]
                + plane[(2 * r + 1) * w + 2 * c]
                + plane[(2 * r + 1) * w + 2 * c + 1];
            out[r * nw + c] = s / 4.0;
        }
    }
    (out, nh, nw)
}

#[derive(Debug, Clone)]
struct ScaleStats {
    h: usize,
    w: usize,
    plane: Vec<f64>,
    mu: Vec<f64>,
    sq: Vec<f64>,
}

/// Per-image filtered statistics reused across all pairs it takes part in.
#[derive(Debug, Clone)]
pub struct PreparedImage {
    shape: ImageShape,
    /// `channels × scales`.
    stats: Vec<Vec<ScaleStats>>,
}

/// Filters and pyramids one image.
pub fn prepare(image: &[f64], shape: ImageShape, params: &MsSsimParams) -> Result<PreparedImage> {
    params.validate()?;
    let (h, w, ch) = shape;
    if h * w * ch != image.len() || ch == 0 {
        return Err(Error::Dimension(format!(
            "{} values for a {h}×{w}×{ch} image",
            image.len()
        )));
    }
    let scales = params.usable_scales(h, w);
    if scales == 0 {
        return Err(Error::Parameter(format!(
            "{h}×{w} image is smaller than the {}-pixel window",
            params.window
        )));
    }
    let kernel = params.kernel();
    let mut stats = Vec::with_capacity(ch);
    for c in 0..ch {
        let mut plane: Vec<f64> = (0..h * w).map(|p| image[p * ch + c]).collect();
        let (mut ph, mut pw) = (h, w);
        let mut per_scale = Vec::with_capacity(scales);
        for s in 0..scales {
            if s > 0 {
                let (p, nh, nw) = downsample(&plane, ph, pw);
                plane = p;
                ph = nh;
                pw = nw;
            }
            let mu = filter(&plane, ph, pw, &kernel);
            let squares: Vec<f64> = plane.iter().map(|v| v * v).collect();
            let sq = filter(&squares, ph, pw, &kernel);
            per_scale.push(ScaleStats {
                h: ph,
                w: pw,
                plane: plane.clone(),
                mu,
                sq,
            });
        }
        stats.push(per_scale);
    }
    Ok(PreparedImage { shape, stats })
}

fn signed_pow(v: f64, p: f64) -> f64 {
    v.signum() * v.abs().powf(p)
}

/// Unclamped MS-SSIM of two prepared images.
pub fn ms_ssim_prepared(a: &PreparedImage, b: &PreparedImage, params: &MsSsimParams) -> Result<f64> {
    if a.shape != b.shape {
        return Err(Error::Dimension(format!(
            "image shapes {:?} and {:?} differ",
            a.shape, b.shape
        )));
    }
    let weights = params.effective_weights(a.shape.0, a.shape.1);
    let kernel = params.kernel();
    let c1 = (params.k1 * params.dynamic_range).powi(2);
    let c2 = (params.k2 * params.dynamic_range).powi(2);
    let m = weights.len();
    let mut total = 0.0;
    for (sa, sb) in a.stats.iter().zip(&b.stats) {
        let mut value = 1.0;
        for (s, wgt) in weights.iter().enumerate() {
            let (x, y) = (&sa[s], &sb[s]);
            let prod: Vec<f64> = x.plane.iter().zip(&y.plane).map(|(p, q)| p * q).collect();
            let cross = filter(&prod, x.h, x.w, &kernel);
            let mut acc = 0.0;
            for i in 0..cross.len() {
                let (mx, my) = (x.mu[i], y.mu[i]);
                let vx = x.sq[i] - mx * mx;
                let vy = y.sq[i] - my * my;
                let cov = cross[i] - mx * my;
                let cs = (2.0 * cov + c2) / (vx + vy + c2);
                acc += if s + 1 == m {
                    cs * (2.0 * mx * my + c1) / (mx * mx + my * my + c1)
                } else {
                    cs
                };
            }
            value *= signed_pow(acc / cross.len() as f64, *wgt);
        }
        total += value;
    }
    Ok(total / a.stats.len() as f64)
}

/// Unclamped MS-SSIM of two images of the same shape.
pub fn ms_ssim_raw(a: &[f64], b: &[f64], shape: ImageShape, params: &MsSsimParams) -> Result<f64> {
    let pa = prepare(a, shape, params)?;
    let pb = prepare(b, shape, params)?;
    ms_ssim_prepared(&pa, &pb, params)
}

/// MS-SSIM clamped to `[0, 1]`.
pub fn ms_ssim(a: &[f64], b: &[f64], shape: ImageShape, params: &MsSsimParams) -> Result<f64> {
    Ok(ms_ssim_raw(a, b, shape, params)?.clamp(0.0, 1.0))
}
