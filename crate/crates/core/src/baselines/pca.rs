use nalgebra::{DMatrix, SymmetricEigen};

use crate::matrix::{dot, Matrix};
use crate::{par, Error, Result};

/// Number of principal components used as features.
pub const PCA_COMPONENTS: usize = 64;

/// Relative eigenvalue below which a direction counts as absent.
const RANK_TOLERANCE: f64 = 1e-12;

/// Mean and leading principal axes of a training set.
///
/// If the data has fewer than `k` directions of nonzero variance, the missing
/// axes are stored as zero vectors: they project everything to 0 and report
/// zero variance. The available axes are orthonormal and sign-normalized so
/// their largest-magnitude entry is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k × D`, one axis per row, by decreasing variance.
    pub axes: Matrix,
    /// Sample variance along each axis.
    pub variances: Vec<f64>,
}

/// Fit `k` components on the rows of `x`. Needs more rows than components.
///
/// The eigenproblem is solved on the `D × D` covariance, or on the `N × N`
/// Gram matrix of the centered data when that is smaller.
pub fn pca_fit(x: &Matrix, k: usize) -> Result<PcaModel> {
    let (n, d) = (x.rows(), x.cols());
    if n <= k {
        return Err(Error::InsufficientSamples {
            class: 0,
            needed: k + 1,
            available: n,
        });
    }
    if d == 0 {
        return Err(Error::Shape("PCA input has no features".into()));
    }
    let mut mean = vec![0.0; d];
    for row in x.iter_rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(n, d, |i, j| x.row(i)[j] - mean[j]);

    let (values, vectors): (Vec<f64>, Vec<Vec<f64>>) = if d <= n {
        let eig = SymmetricEigen::new(centered.transpose() * &centered);
        let cols = (0..d).map(|c| eig.eigenvectors.column(c).iter().copied().collect()).collect();
        (eig.eigenvalues.iter().copied().collect(), cols)
    } else {
        let eig = SymmetricEigen::new(&centered * centered.transpose());
        let vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let cols = (0..n)
            .map(|c| {
                let axis = centered.transpose() * eig.eigenvectors.column(c);
                let norm = axis.norm();
                axis.iter().map(|v| if norm > 0.0 { v / norm } else { 0.0 }).collect()
            })
            .collect();
        (vals, cols)
    };

    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let top = values[order[0]].max(0.0);
    let mut axes = Matrix::zeros(k, d);
    let mut variances = vec![0.0; k];
    for (slot, &c) in order.iter().take(k).enumerate() {
        if values[c] <= RANK_TOLERANCE * top || values[c] <= 0.0 {
            break;
        }
        let mut axis = vectors[c].clone();
        let lead = axis.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        if lead < 0.0 {
            axis.iter_mut().for_each(|v| *v = -*v);
        }
        axes.row_mut(slot).copy_from_slice(&axis);
        variances[slot] = values[c] / (n - 1) as f64;
    }
    Ok(PcaModel { mean, axes, variances })
}

impl PcaModel {
    pub fn components(&self) -> usize {
        self.axes.rows()
    }

    /// Coordinates of every row of `x` along the axes.
    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.mean.len() {
            return Err(Error::Shape(format!(
                "PCA fitted on {} features, got {}",
                self.mean.len(),
                x.cols()
            )));
        }
        let k = self.components();
        let rows = par::map_range(x.rows(), |i| {
            let c: Vec<f64> = x.row(i).iter().zip(&self.mean).map(|(v, m)| v - m).collect();
            (0..k).map(|a| dot(self.axes.row(a), &c)).collect::<Vec<f64>>()
        });
        Matrix::from_vec(x.rows(), k, rows.concat())
    }

    /// Map coordinates back to the input space using the first `k` axes.
    pub fn reconstruct(&self, coords: &[f64], k: usize) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (a, c) in coords.iter().enumerate().take(k) {
            for (o, v) in out.iter_mut().zip(self.axes.row(a)) {
                *o += c * v;
            }
        }
        out
    }
}
