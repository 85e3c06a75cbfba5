//! One-class feature learning by intra-class splitting.
//!
//! The normal training class is split into *typical* and *atypical* samples by
//! how well a pretrained autoencoder reconstructs them (SSIM). The autoencoder
//! is then trained jointly with a closeness loss on typical latents and
//! dispersion losses that push atypical latents apart from each other and from
//! typical ones. The encoder output feeds a ν-one-class SVM.
//!
//! Module map:
//!
//! * [`datasets`]: IDX / CIFAR-10 / CSV loaders, min-max scaling, experiment splits
//! * [`nn`]: small convolutional autoencoder with hand-written backpropagation and Adam
//! * [`ssim`]: structural similarity used as the splitting metric
//! * [`losses`]: reconstruction, closeness and dispersion losses
//! * [`pipeline`]: the three training stages and feature extraction
//! * [`ocsvm`]: RBF one-class SVM trained by SMO, threshold selection
//! * [`baselines`]: Original, PCA, HOG, CAE and CLS feature extractors
//! * [`metrics`]: balanced accuracy and seed aggregation
//! * [`experiment`]: manifests, experiment grids, sweeps and SVG curves
//!
//! With the default `parallel` feature, per-sample work (batch forward and
//! backward passes, SSIM scoring, kernel rows, experiment cells) runs on rayon.
//! Reductions always happen in a fixed chunk order, so results are bit-identical
//! with and without the feature and for any thread count.

pub mod baselines;
pub mod datasets;
pub mod error;
pub mod experiment;
pub mod losses;
pub mod matrix;
pub mod metrics;
pub mod nn;
pub mod ocsvm;
pub mod par;
pub mod pipeline;
pub mod rng;
pub mod ssim;

pub use error::{Error, Result};
pub use matrix::Matrix;
