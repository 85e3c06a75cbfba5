use std::path::Path;

use crate::datasets::{
    load_cifar10, load_csv_images, load_idx, make_experiment, make_experiment_from_pools, synthetic,
    ExperimentConfig, ExperimentSplit, ImageSet, MinMaxScaler,
};
use crate::{Error, Result};

use super::manifest::{DatasetSource, Manifest};

/// Image pools of one dataset. Without a test pool, test images are drawn
/// from what is left of the training pool.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub train_pool: ImageSet,
    pub test_pool: Option<ImageSet>,
}

impl Dataset {
    /// Load and min-max scale with a single minimum and maximum over every pool.
    pub fn load(source: &DatasetSource) -> Result<Self> {
        let raw = match source {
            DatasetSource::Idx {
                train_images,
                train_labels,
                test,
            } => Dataset {
                train_pool: load_idx(train_images, train_labels)?,
                test_pool: test.as_ref().map(|(i, l)| load_idx(i, l)).transpose()?,
            },
            DatasetSource::Cifar10 { train, test } => Dataset {
                train_pool: load_cifar10(train)?,
                test_pool: (!test.is_empty()).then(|| load_cifar10(test)).transpose()?,
            },
            DatasetSource::Csv { train, test, shape } => Dataset {
                train_pool: load_csv_images(train, *shape)?,
                test_pool: test.as_ref().map(|t| load_csv_images(t, *shape)).transpose()?,
            },
            DatasetSource::SyntheticDigits { per_class, seed } => Dataset {
                train_pool: synthetic::digits(*per_class, *seed)?,
                test_pool: None,
            },
        };
        let corpus = match &raw.test_pool {
            Some(t) => raw.train_pool.concat(t)?,
            None => raw.train_pool.clone(),
        };
        let scaler = MinMaxScaler::fit(&corpus);
        Ok(Dataset {
            train_pool: scaler.apply(&raw.train_pool),
            test_pool: raw.test_pool.as_ref().map(|t| scaler.apply(t)),
        })
    }

    /// Precomputed feature rows aligned with `reference`, used unscaled.
    pub fn load_features(train: &Path, test: Option<&Path>, reference: &Dataset) -> Result<Self> {
        let aligned = |path: &Path, pool: &ImageSet| -> Result<ImageSet> {
            let features = load_csv_images(path, None)?;
            if features.labels() != pool.labels() {
                return Err(Error::Config(format!(
                    "{}: labels do not match the dataset images row for row",
                    path.display()
                )));
            }
            Ok(features)
        };
        let train_pool = aligned(train, &reference.train_pool)?;
        let test_pool = match (test, &reference.test_pool) {
            (Some(p), Some(pool)) => Some(aligned(p, pool)?),
            (None, None) => None,
            _ => {
                return Err(Error::Config(
                    "external test features are needed exactly when the dataset has a test pool".into(),
                ))
            }
        };
        Ok(Dataset { train_pool, test_pool })
    }

    pub fn split(&self, normal_class: u8, cfg: &ExperimentConfig, seed: u64) -> Result<ExperimentSplit> {
        match &self.test_pool {
            Some(test) => make_experiment_from_pools(&self.train_pool, test, normal_class, cfg, seed),
            None => make_experiment(&self.train_pool, normal_class, cfg, seed),
        }
    }
}

/// Load the manifest's dataset and, when configured, its external features.
pub fn load_manifest_data(manifest: &Manifest) -> Result<(Dataset, Option<Dataset>)> {
    let data = Dataset::load(&manifest.source)?;
    let external = match &manifest.external_features {
        Some(p) => Some(Dataset::load_features(p, manifest.external_test_features.as_deref(), &data)?),
        None => None,
    };
    Ok((data, external))
}
