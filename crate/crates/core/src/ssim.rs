//! Structural similarity (SSIM) between an image and its reconstruction.
//!
//! Local means, variances and covariance are taken under a normalized window
//! (Gaussian σ = 1.5 or uniform, 7×7 by default) at every position where the
//! window fits entirely inside the image. The score is the mean of the local
//! SSIM map; multi-channel images average the per-channel scores.

use crate::datasets::{ImageSet, ImageShape};
use crate::nn::{self, AutoencoderParams};
use crate::{par, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WindowKind {
    Gaussian { sigma: f64 },
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimConfig {
    pub window: usize,
    pub kind: WindowKind,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        Self {
            window: 7,
            kind: WindowKind::Gaussian { sigma: 1.5 },
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
        }
    }
}

impl SsimConfig {
    pub fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }

    /// Normalized 1-D window; the 2-D window is its outer product.
    pub fn weights_1d(&self) -> Vec<f64> {
        let n = self.window;
        let raw: Vec<f64> = match self.kind {
            WindowKind::Uniform => vec![1.0; n],
            WindowKind::Gaussian { sigma } => {
                let c = (n as f64 - 1.0) / 2.0;
                (0..n)
                    .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp())
                    .collect()
            }
        };
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / s).collect()
    }

    fn validate(&self, shape: ImageShape) -> Result<()> {
        if self.window == 0 || self.window > shape.height || self.window > shape.width {
            return Err(Error::Config(format!(
                "SSIM window {} does not fit {shape} images",
                self.window
            )));
        }
        if self.c1() <= 0.0 || self.c2() <= 0.0 {
            return Err(Error::Config("SSIM stabilizers must be positive".into()));
        }
        if let WindowKind::Gaussian { sigma } = self.kind {
            if sigma <= 0.0 || !sigma.is_finite() {
                return Err(Error::Config(format!("SSIM sigma {sigma} must be positive")));
            }
        }
        Ok(())
    }
}

/// Separable "valid" filtering of one plane.
fn filter_valid(plane: &[f64], h: usize, w: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (oh, ow) = (h - n + 1, w - n + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..n).map(|i| k[i] * plane[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..n).map(|i| k[i] * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

fn ssim_plane(a: &[f64], b: &[f64], h: usize, w: usize, k: &[f64], cfg: &SsimConfig) -> f64 {
    let (c1, c2) = (cfg.c1(), cfg.c2());
    let aa: Vec<f64> = a.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = b.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    let mu_a = filter_valid(a, h, w, k);
    let mu_b = filter_valid(b, h, w, k);
    let e_aa = filter_valid(&aa, h, w, k);
    let e_bb = filter_valid(&bb, h, w, k);
    let e_ab = filter_valid(&ab, h, w, k);
    let n = mu_a.len();
    (0..n)
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            let s = ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            s.clamp(-1.0, 1.0)
        })
        .sum::<f64>()
        / n as f64
}

/// SSIM of two images of `shape` stored height × width × channel.
pub fn ssim(a: &[f64], b: &[f64], shape: ImageShape, cfg: &SsimConfig) -> Result<f64> {
    if a.len() != shape.pixels() || b.len() != shape.pixels() {
        return Err(Error::Shape(format!(
            "SSIM inputs of {} and {} values for shape {shape}",
            a.len(),
            b.len()
        )));
    }
    cfg.validate(shape)?;
    let k = cfg.weights_1d();
    let (h, w, c) = (shape.height, shape.width, shape.channels);
    let plane = |img: &[f64], ch: usize| (0..h * w).map(|p| img[p * c + ch]).collect::<Vec<_>>();
    let total: f64 = (0..c)
        .map(|ch| {
            if c == 1 {
                ssim_plane(a, b, h, w, &k, cfg)
            } else {
                ssim_plane(&plane(a, ch), &plane(b, ch), h, w, &k, cfg)
            }
        })
        .sum();
    Ok(total / c as f64)
}

/// Images reconstructed per forward pass when scoring a dataset.
const SCORE_BATCH: usize = 256;

/// SSIM between every image and its autoencoder reconstruction, in dataset order.
pub fn score_dataset(params: &AutoencoderParams, images: &ImageSet, cfg: &SsimConfig) -> Result<Vec<f64>> {
    let shape = images.shape();
    if shape != params.arch.input {
        return Err(Error::Shape(format!(
            "images are {shape}, network expects {}",
            params.arch.input
        )));
    }
    cfg.validate(shape)?;
    let n = shape.pixels();
    let mut scores = Vec::with_capacity(images.len());
    for start in (0..images.len()).step_by(SCORE_BATCH) {
        let end = (start + SCORE_BATCH).min(images.len());
        let batch = &images.pixels()[start * n..end * n];
        let recon = nn::reconstruct(params, batch)?;
        let part = par::map_range(end - start, |i| ssim(&batch[i * n..(i + 1) * n], &recon[i * n..(i + 1) * n], shape, cfg));
        for s in part {
            scores.push(s?);
        }
    }
    Ok(scores)
}
