//! Reconstruction, closeness and dispersion losses and their weighted sum.
//!
//! Closeness and both dispersion terms share one building block, the mean
//! root-mean-square distance over a list of latent row pairs:
//!
//! ```text
//! D(pairs) = 1/|pairs| · Σ_(j,i) sqrt( 1/L · ||z_j − z_i||² )
//! closeness = D(typical row → random other typical row)
//! disp1     = −D(atypical row → random other atypical row)
//! disp2     = −D(atypical row → random typical row)
//! ```
//!
//! The square root has no derivative at zero distance. Values are computed
//! exactly; gradients use `sqrt(d²/L + SQRT_GUARD)` in the denominator, which
//! keeps them finite and makes coincident pairs contribute zero gradient.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::matrix::Matrix;
use crate::{Error, Result};

/// Added under the square root in distance gradients.
pub const SQRT_GUARD: f64 = 1e-12;

/// Weights of the closeness and the two dispersion terms relative to the
/// reconstruction loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta1: 1e-5,
            beta2: 1e-5,
        }
    }
}

impl LossWeights {
    pub const RECONSTRUCTION_ONLY: LossWeights = LossWeights {
        alpha: 0.0,
        beta1: 0.0,
        beta2: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta1", self.beta1), ("beta2", self.beta2)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!("loss weight {name} = {v} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

/// `1/B · Σ_j ||x_j − x̂_j||²` over `batch` vectorized images.
pub fn rec_loss(x: &[f64], xhat: &[f64], batch: usize) -> Result<f64> {
    if x.len() != xhat.len() {
        return Err(Error::Shape(format!(
            "reconstruction has {} values, input {}",
            xhat.len(),
            x.len()
        )));
    }
    if batch == 0 || x.len() % batch != 0 {
        return Err(Error::Shape(format!("{} values do not split into {batch} images", x.len())));
    }
    Ok(x.iter().zip(xhat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / batch as f64)
}

/// Gradient of [`rec_loss`] with respect to `xhat`.
pub fn rec_loss_grad(x: &[f64], xhat: &[f64], batch: usize) -> Vec<f64> {
    let s = 2.0 / batch as f64;
    x.iter().zip(xhat).map(|(a, b)| s * (b - a)).collect()
}

fn rms_distance(a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (d2 / a.len() as f64).sqrt()
}

/// Mean RMS distance between rows `j` and `i` of `z` for each `(j, i)` pair.
/// An empty pair list gives 0.
pub fn mean_rms_distance(z: &[f64], dim: usize, pairs: &[(usize, usize)]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let row = |r: usize| &z[r * dim..(r + 1) * dim];
    pairs.iter().map(|&(j, i)| rms_distance(row(j), row(i))).sum::<f64>() / pairs.len() as f64
}

/// Add `scale · ∂D/∂z` to `grad` for `D = mean_rms_distance(z, dim, pairs)`.
pub fn mean_rms_distance_grad(z: &[f64], dim: usize, pairs: &[(usize, usize)], scale: f64, grad: &mut [f64]) {
    if pairs.is_empty() || scale == 0.0 {
        return;
    }
    let l = dim as f64;
    let per_pair = scale / pairs.len() as f64;
    for &(j, i) in pairs {
        let (zj, zi) = (&z[j * dim..(j + 1) * dim], &z[i * dim..(i + 1) * dim]);
        let d2: f64 = zj.iter().zip(zi).map(|(a, b)| (a - b) * (a - b)).sum();
        let denom = (d2 / l + SQRT_GUARD).sqrt();
        let c = per_pair / (l * denom);
        for k in 0..dim {
            let g = c * (zj[k] - zi[k]);
            grad[j * dim + k] += g;
            grad[i * dim + k] -= g;
        }
    }
}

/// Latent rows with a fixed-point-free partner assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedLatentBatch {
    z: Matrix,
    partner: Vec<usize>,
}

impl PairedLatentBatch {
    pub fn new(z: Matrix, partner: Vec<usize>) -> Result<Self> {
        if z.rows() < 2 {
            return Err(Error::Shape(format!("paired batch needs at least 2 rows, got {}", z.rows())));
        }
        if partner.len() != z.rows() {
            return Err(Error::Shape(format!(
                "{} partners for {} rows",
                partner.len(),
                z.rows()
            )));
        }
        if let Some(j) = (0..partner.len()).find(|&j| partner[j] == j || partner[j] >= z.rows()) {
            return Err(Error::Shape(format!("row {j} has invalid partner {}", partner[j])));
        }
        Ok(Self { z, partner })
    }

    pub fn z(&self) -> &Matrix {
        &self.z
    }

    pub fn partner(&self) -> &[usize] {
        &self.partner
    }

    fn pairs(&self) -> Vec<(usize, usize)> {
        self.partner.iter().enumerate().map(|(j, &i)| (j, i)).collect()
    }
}

/// `1/B · Σ_j sqrt(1/L · ||z_j − z_partner(j)||²)`.
pub fn closeness_loss(batch: &PairedLatentBatch) -> f64 {
    mean_rms_distance(batch.z.as_slice(), batch.z.cols(), &batch.pairs())
}

/// `(disp1, disp2)`: negative mean RMS distance among atypical rows and
/// between each atypical row and its typical partner (row `j` of
/// `typical_partners`).
pub fn dispersion_loss(atypical: &PairedLatentBatch, typical_partners: &Matrix) -> Result<(f64, f64)> {
    let z = atypical.z();
    if typical_partners.rows() != z.rows() || typical_partners.cols() != z.cols() {
        return Err(Error::Shape(format!(
            "typical partners {}x{} vs atypical {}x{}",
            typical_partners.rows(),
            typical_partners.cols(),
            z.rows(),
            z.cols()
        )));
    }
    let disp1 = -closeness_loss(atypical);
    let disp2 = -(0..z.rows())
        .map(|j| rms_distance(z.row(j), typical_partners.row(j)))
        .sum::<f64>()
        / z.rows() as f64;
    Ok((disp1, disp2))
}

/// `rec + α·cls + β1·disp1 + β2·disp2`.
pub fn total_loss(rec: f64, cls: f64, disp1: f64, disp2: f64, w: &LossWeights) -> Result<f64> {
    for (name, v) in [("rec", rec), ("cls", cls), ("disp1", disp1), ("disp2", disp2)] {
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("{name} loss = {v}")));
        }
    }
    Ok(rec + w.alpha * cls + w.beta1 * disp1 + w.beta2 * disp2)
}

/// Which batch rows are compared by each latent term.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairLayout {
    pub closeness: Vec<(usize, usize)>,
    pub dispersion_atypical: Vec<(usize, usize)>,
    pub dispersion_cross: Vec<(usize, usize)>,
}

/// Values of the three latent terms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LatentTerms {
    pub cls: f64,
    pub disp1: f64,
    pub disp2: f64,
}

impl PairLayout {
    /// Batch rows `0..typical` are typical, `typical..typical + atypical` are
    /// atypical. Partners are drawn from `rng`: a uniform derangement within
    /// each subset and a uniform typical row for every atypical row.
    pub fn sample<R: Rng>(typical: usize, atypical: usize, rng: &mut R) -> Result<Self> {
        if typical < 2 {
            return Err(Error::Empty(format!("closeness needs 2 typical rows, got {typical}")));
        }
        if atypical == 1 {
            return Err(Error::Empty("dispersion needs 0 or at least 2 atypical rows, got 1".into()));
        }
        let closeness = derangement(typical, rng).into_iter().enumerate().collect();
        let (dispersion_atypical, dispersion_cross) = if atypical > 0 {
            let d = derangement(atypical, rng);
            let a = d.iter().enumerate().map(|(j, &i)| (typical + j, typical + i)).collect();
            let c = (0..atypical).map(|j| (typical + j, rng.random_range(0..typical))).collect();
            (a, c)
        } else {
            (Vec::new(), Vec::new())
        };
        Ok(Self {
            closeness,
            dispersion_atypical,
            dispersion_cross,
        })
    }

    pub fn evaluate(&self, z: &[f64], dim: usize) -> LatentTerms {
        LatentTerms {
            cls: mean_rms_distance(z, dim, &self.closeness),
            disp1: -mean_rms_distance(z, dim, &self.dispersion_atypical),
            disp2: -mean_rms_distance(z, dim, &self.dispersion_cross),
        }
    }

    /// Gradient of `α·cls + β1·disp1 + β2·disp2` with respect to `z`. Terms
    /// with zero weight are skipped.
    pub fn gradient(&self, z: &[f64], dim: usize, w: &LossWeights) -> Vec<f64> {
        let mut g = vec![0.0; z.len()];
        mean_rms_distance_grad(z, dim, &self.closeness, w.alpha, &mut g);
        mean_rms_distance_grad(z, dim, &self.dispersion_atypical, -w.beta1, &mut g);
        mean_rms_distance_grad(z, dim, &self.dispersion_cross, -w.beta2, &mut g);
        g
    }
}

/// Uniformly random fixed-point-free permutation of `0..n` (`n >= 2`).
pub fn derangement<R: Rng>(n: usize, rng: &mut R) -> Vec<usize> {
    assert!(n >= 2, "derangement of {n} elements");
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        p.shuffle(rng);
        if p.iter().enumerate().all(|(i, &v)| i != v) {
            return p;
        }
    }
}
