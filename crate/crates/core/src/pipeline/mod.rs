//! The three training stages:
//!
//! 1. reconstruction-only pretraining on the whole normal training set,
//! 2. intra-class splitting: the `rho` percent of samples with the lowest
//!    SSIM against their reconstruction become *atypical*, the rest *typical*,
//! 3. joint training that continues from stage 1 (same weights, optimizer
//!    state and shuffling stream) with reconstruction on every sample,
//!    closeness among typical latents and dispersion of atypical latents.
//!
//! After training only the encoder is used, as a feature extractor.

mod split;
mod train;

pub use split::{split, split_from_scores, SplitAssignment, SplitFlag};
pub use train::{EpochLog, Stage, Trainer};

use crate::datasets::{ImageSet, ImageShape};
use crate::losses::LossWeights;
use crate::matrix::Matrix;
use crate::nn::{self, AdamConfig, ArchitectureSpec, AutoencoderParams};
use crate::ssim::SsimConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub stage1_epochs: usize,
    pub stage3_epochs: usize,
    pub weights: LossWeights,
    /// Percentage of training samples flagged atypical.
    pub rho: f64,
    pub seed: u64,
    pub ssim: SsimConfig,
    pub adam: AdamConfig,
    /// Coefficient of the L2 penalty on convolution weights.
    pub l2: f64,
    pub latent_dim: usize,
    /// Channels of the three encoder convolutions.
    pub channels: [usize; 3],
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            stage1_epochs: 60,
            stage3_epochs: 30,
            weights: LossWeights::default(),
            rho: 10.0,
            seed: 0,
            ssim: SsimConfig::default(),
            adam: AdamConfig::default(),
            l2: 1e-6,
            latent_dim: 64,
            channels: [16, 32, 32],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::Config(format!("batch size {} must be at least 2", self.batch_size)));
        }
        if self.stage1_epochs == 0 {
            return Err(Error::Config("stage-1 epochs must be at least 1".into()));
        }
        if !(0.0..=100.0).contains(&self.rho) {
            return Err(Error::Config(format!("rho {} outside [0, 100]", self.rho)));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::Config(format!("l2 {} must be finite and >= 0", self.l2)));
        }
        if !(self.adam.learning_rate > 0.0 && self.adam.learning_rate.is_finite()) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.latent_dim == 0 || self.channels.contains(&0) {
            return Err(Error::Config("latent_dim and channels must be positive".into()));
        }
        self.weights.validate()
    }

    pub fn architecture(&self, input: ImageShape) -> Result<ArchitectureSpec> {
        ArchitectureSpec::desk(input, self.channels, self.latent_dim)
    }
}

/// Result of a full three-stage run.
#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub params: AutoencoderParams,
    pub assignment: SplitAssignment,
    pub history: Vec<EpochLog>,
}

/// Stage 1: reconstruction-only training from a fresh initialization.
pub fn stage1_train(train: &ImageSet, cfg: &TrainConfig) -> Result<Trainer> {
    let mut trainer = Trainer::new(train.shape(), cfg)?;
    trainer.stage1(train)?;
    Ok(trainer)
}

/// Stage 3: joint training continuing from a stage-1 trainer.
pub fn stage3_train(mut trainer: Trainer, train: &ImageSet, assignment: &SplitAssignment) -> Result<Trainer> {
    trainer.stage3(train, assignment)?;
    Ok(trainer)
}

/// Stage 2 and 3 on top of a finished stage-1 trainer.
pub fn continue_from_stage1(mut trainer: Trainer, train: &ImageSet) -> Result<PipelineOutcome> {
    let cfg = trainer.config().clone();
    let assignment = split(trainer.params(), train, cfg.rho, &cfg.ssim)?;
    trainer.stage3(train, &assignment)?;
    let history = trainer.history().to_vec();
    Ok(PipelineOutcome {
        params: trainer.into_params(),
        assignment,
        history,
    })
}

/// All three stages.
pub fn run(train: &ImageSet, cfg: &TrainConfig) -> Result<PipelineOutcome> {
    continue_from_stage1(stage1_train(train, cfg)?, train)
}

/// Images encoded per forward pass during feature extraction.
const FEATURE_BATCH: usize = 512;

/// Encoder output for every image; the decoder is not evaluated.
pub fn extract_features(params: &AutoencoderParams, images: &ImageSet) -> Result<Matrix> {
    if images.shape() != params.arch.input {
        return Err(Error::Shape(format!(
            "images are {}, network expects {}",
            images.shape(),
            params.arch.input
        )));
    }
    let n = images.shape().pixels();
    let mut data = Vec::with_capacity(images.len() * params.arch.latent_dim);
    for start in (0..images.len()).step_by(FEATURE_BATCH) {
        let end = (start + FEATURE_BATCH).min(images.len());
        data.extend(nn::encode(params, &images.pixels()[start * n..end * n])?.into_vec());
    }
    Matrix::from_vec(images.len(), params.arch.latent_dim, data)
}
