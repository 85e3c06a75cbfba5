//! Feature extractors the learned features are compared against.
//!
//! | method   | width              |
//! |----------|--------------------|
//! | original | H·W·C (784, 3072)  |
//! | pca      | 64                 |
//! | hog      | 144 (28×28), 324 (32×32×3) |
//! | cae, cls | latent size (64)   |

mod hog;
mod pca;

pub use hog::{hog_features, hog_matrix, HogConfig};
pub use pca::{pca_fit, PcaModel, PCA_COMPONENTS};

use crate::datasets::ImageSet;
use crate::losses::LossWeights;
use crate::matrix::Matrix;
use crate::nn::AutoencoderParams;
use crate::pipeline::{stage1_train, Stage, TrainConfig, Trainer};
use crate::Result;

/// Each image flattened in its stored (row-major, channel-last) order.
pub fn original_features(images: &ImageSet) -> Matrix {
    Matrix::from_vec(images.len(), images.shape().pixels(), images.pixels().to_vec())
        .expect("image buffer matches its shape")
}

/// Plain convolutional autoencoder: stage-1 training followed by
/// `stage3_epochs` more reconstruction-only epochs on the same trajectory.
pub fn train_cae(train: &ImageSet, cfg: &TrainConfig) -> Result<AutoencoderParams> {
    Ok(continue_cae(stage1_train(train, cfg)?, train)?.into_params())
}

/// Autoencoder with the closeness loss on every sample and no splitting.
pub fn train_cls(train: &ImageSet, cfg: &TrainConfig) -> Result<AutoencoderParams> {
    Ok(continue_cls(stage1_train(train, cfg)?, train)?.into_params())
}

/// CAE continuation of a finished stage-1 trainer.
pub fn continue_cae(trainer: Trainer, train: &ImageSet) -> Result<Trainer> {
    continue_without_split(trainer, train, LossWeights::RECONSTRUCTION_ONLY)
}

/// CLS continuation of a finished stage-1 trainer, using the configured α.
pub fn continue_cls(trainer: Trainer, train: &ImageSet) -> Result<Trainer> {
    let alpha = trainer.config().weights.alpha;
    continue_without_split(
        trainer,
        train,
        LossWeights {
            alpha,
            beta1: 0.0,
            beta2: 0.0,
        },
    )
}

fn continue_without_split(mut trainer: Trainer, train: &ImageSet, weights: LossWeights) -> Result<Trainer> {
    let all: Vec<usize> = (0..train.len()).collect();
    let epochs = trainer.config().stage3_epochs;
    trainer.train_epochs(train, &all, &[], weights, epochs, Stage::Joint)?;
    Ok(trainer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::ImageShape;

    #[test]
    fn original_features_round_trip() {
        let shape = ImageShape {
            height: 2,
            width: 3,
            channels: 2,
        };
        let pixels: Vec<f64> = (0..24).map(|v| v as f64 / 24.0).collect();
        let set = ImageSet::new(shape, pixels.clone(), vec![0, 1]).unwrap();
        let f = original_features(&set);
        assert_eq!((f.rows(), f.cols()), (2, 12));
        assert_eq!(f.into_vec(), pixels);
    }

    #[test]
    fn paper_widths() {
        let mnist = ImageSet::new(ImageShape::MNIST, vec![0.0; 784], vec![0]).unwrap();
        assert_eq!(original_features(&mnist).cols(), 784);
        let cifar = ImageSet::new(ImageShape::CIFAR10, vec![0.0; 3072], vec![0]).unwrap();
        assert_eq!(original_features(&cifar).cols(), 3072);
    }
}
