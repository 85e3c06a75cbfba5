use std::f64::consts::PI;

use crate::datasets::{ImageSet, ImageShape};
use crate::matrix::Matrix;
use crate::{par, Error, Result};

/// Histogram-of-oriented-gradients layout.
///
/// Cells of `cell × cell` pixels hold `bins` unsigned orientation bins over
/// [0°, 180°). Blocks of `block × block` cells, moved by `block_stride` cells,
/// are normalized with L2-Hys and concatenated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HogConfig {
    pub cell: usize,
    pub block: usize,
    pub block_stride: usize,
    pub bins: usize,
}

const L2HYS_CLIP: f64 = 0.2;
const NORM_EPS: f64 = 1e-5;

impl HogConfig {
    /// 7-pixel cells in non-overlapping 2×2 blocks: 144 values on 28×28.
    pub const MNIST: HogConfig = HogConfig {
        cell: 7,
        block: 2,
        block_stride: 2,
        bins: 9,
    };

    /// 8-pixel cells in 2×2 blocks with one-cell stride: 324 values on 32×32.
    pub const CIFAR10: HogConfig = HogConfig {
        cell: 8,
        block: 2,
        block_stride: 1,
        bins: 9,
    };

    /// Preset for 28×28 and 32×32 images; other sizes get four cells per side
    /// and overlapping blocks.
    pub fn for_shape(shape: ImageShape) -> HogConfig {
        match (shape.height, shape.width) {
            (28, 28) => Self::MNIST,
            (32, 32) => Self::CIFAR10,
            (h, w) => HogConfig {
                cell: (h.min(w) / 4).max(1),
                ..Self::CIFAR10
            },
        }
    }

    fn blocks_along(&self, pixels: usize) -> Option<usize> {
        let cells = pixels / self.cell;
        (cells >= self.block).then(|| (cells - self.block) / self.block_stride + 1)
    }

    /// Feature length on images of `shape`.
    pub fn length(&self, shape: ImageShape) -> Result<usize> {
        if self.cell == 0 || self.block == 0 || self.block_stride == 0 || self.bins == 0 {
            return Err(Error::Config(format!("invalid HOG layout {self:?}")));
        }
        match (self.blocks_along(shape.height), self.blocks_along(shape.width)) {
            (Some(by), Some(bx)) => Ok(by * bx * self.block * self.block * self.bins),
            _ => Err(Error::Shape(format!(
                "{shape} image is smaller than one {0}×{0} block of {1}-pixel cells",
                self.block, self.cell
            ))),
        }
    }
}

/// HOG descriptor of one channel-last image.
///
/// Gradients are central differences with edge replication; on color images
/// each pixel uses the channel with the largest gradient magnitude. Votes are
/// split linearly between the two nearest orientation bins. A constant image
/// has zero gradient everywhere and yields an all-zero descriptor.
pub fn hog_features(image: &[f64], shape: ImageShape, cfg: &HogConfig) -> Result<Vec<f64>> {
    if image.len() != shape.pixels() {
        return Err(Error::Shape(format!("image has {} values, {shape} needs {}", image.len(), shape.pixels())));
    }
    let len = cfg.length(shape)?;
    let (h, w, ch) = (shape.height, shape.width, shape.channels);
    let at = |y: usize, x: usize, c: usize| image[(y * w + x) * ch + c];

    let cells_y = h / cfg.cell;
    let cells_x = w / cfg.cell;
    let mut hist = vec![0.0; cells_y * cells_x * cfg.bins];
    let bin_width = PI / cfg.bins as f64;
    for y in 0..cells_y * cfg.cell {
        for x in 0..cells_x * cfg.cell {
            let (mut gx, mut gy, mut mag) = (0.0, 0.0, -1.0);
            for c in 0..ch {
                let dx = at(y, (x + 1).min(w - 1), c) - at(y, x.saturating_sub(1), c);
                let dy = at((y + 1).min(h - 1), x, c) - at(y.saturating_sub(1), x, c);
                let m = dx * dx + dy * dy;
                if m > mag {
                    (gx, gy, mag) = (dx, dy, m);
                }
            }
            let mag = mag.sqrt();
            if mag == 0.0 {
                continue;
            }
            let mut angle = gy.atan2(gx);
            if angle < 0.0 {
                angle += PI;
            }
            if angle >= PI {
                angle -= PI;
            }
            // Bin centers sit at (b + ½)·width; wrap around at 180°.
            let pos = angle / bin_width - 0.5;
            let lower = pos.floor();
            let frac = pos - lower;
            let b0 = (lower as isize).rem_euclid(cfg.bins as isize) as usize;
            let b1 = (b0 + 1) % cfg.bins;
            let cell = ((y / cfg.cell) * cells_x + x / cfg.cell) * cfg.bins;
            hist[cell + b0] += mag * (1.0 - frac);
            hist[cell + b1] += mag * frac;
        }
    }

    let mut out = Vec::with_capacity(len);
    let blocks_y = cfg.blocks_along(h).expect("checked by length");
    let blocks_x = cfg.blocks_along(w).expect("checked by length");
    let mut block = Vec::with_capacity(cfg.block * cfg.block * cfg.bins);
    for by in 0..blocks_y {
        for bx in 0..blocks_x {
            block.clear();
            for cy in 0..cfg.block {
                for cx in 0..cfg.block {
                    let cell = ((by * cfg.block_stride + cy) * cells_x + bx * cfg.block_stride + cx) * cfg.bins;
                    block.extend_from_slice(&hist[cell..cell + cfg.bins]);
                }
            }
            l2_hys(&mut block);
            out.extend_from_slice(&block);
        }
    }
    debug_assert_eq!(out.len(), len);
    Ok(out)
}

fn l2_hys(v: &mut [f64]) {
    let norm = |v: &[f64]| (v.iter().map(|x| x * x).sum::<f64>() + NORM_EPS * NORM_EPS).sqrt();
    let n = norm(v);
    v.iter_mut().for_each(|x| *x = (*x / n).min(L2HYS_CLIP));
    let n = norm(v);
    v.iter_mut().for_each(|x| *x /= n);
}

/// Descriptors of every image, one row each.
pub fn hog_matrix(images: &ImageSet, cfg: &HogConfig) -> Result<Matrix> {
    let shape = images.shape();
    let len = cfg.length(shape)?;
    let rows = par::map_range(images.len(), |i| hog_features(images.image(i), shape, cfg));
    let mut data = Vec::with_capacity(images.len() * len);
    for r in rows {
        data.extend(r?);
    }
    Matrix::from_vec(images.len(), len, data)
}
