use rand::seq::SliceRandom;

use super::{ImageSet, Label};
use crate::{rng, Error, Result};

/// How many normal and abnormal images go into the test set. `None` takes
/// everything available.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TestComposition {
    pub normal: Option<usize>,
    pub abnormal: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n_train: usize,
    pub test: TestComposition,
    /// Fraction of the test set held out for threshold selection.
    pub validation_fraction: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_train: 4000,
            test: TestComposition::default(),
            validation_fraction: 0.2,
        }
    }
}

/// Images with binary normal/abnormal labels. `images.labels()` keeps the
/// original class ids.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySet {
    pub images: ImageSet,
    pub labels: Vec<Label>,
}

impl BinarySet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }
}

/// Partitions for one normal-class experiment.
///
/// `validation` and `evaluation` are disjoint and together form the test set;
/// metrics are reported on `evaluation` only.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSplit {
    pub normal_class: u8,
    pub seed: u64,
    pub train: ImageSet,
    pub validation: BinarySet,
    pub evaluation: BinarySet,
}

impl ExperimentSplit {
    pub fn test_len(&self) -> usize {
        self.validation.len() + self.evaluation.len()
    }
}

/// Build a split from a single pool: training images are drawn from the normal
/// class, and the test set takes the remaining normal images plus abnormal
/// images from every other class.
pub fn make_experiment(set: &ImageSet, normal_class: u8, cfg: &ExperimentConfig, seed: u64) -> Result<ExperimentSplit> {
    build(set, None, normal_class, cfg, seed)
}

/// Build a split where training images come from `train_pool` and test images
/// from a separate `test_pool` (e.g. the official train/test files).
pub fn make_experiment_from_pools(
    train_pool: &ImageSet,
    test_pool: &ImageSet,
    normal_class: u8,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<ExperimentSplit> {
    build(train_pool, Some(test_pool), normal_class, cfg, seed)
}

fn take(mut pool: Vec<usize>, count: Option<usize>, class: u8, what: &str) -> Result<Vec<usize>> {
    match count {
        None => Ok(pool),
        Some(n) if n <= pool.len() => {
            pool.truncate(n);
            Ok(pool)
        }
        Some(n) => Err(Error::Config(format!(
            "{what} test images for class {class}: {n} requested, {} available",
            pool.len()
        ))),
    }
}

fn build(
    train_pool: &ImageSet,
    test_pool: Option<&ImageSet>,
    normal_class: u8,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<ExperimentSplit> {
    if !(0.0..1.0).contains(&cfg.validation_fraction) {
        return Err(Error::Config(format!(
            "validation fraction {} outside [0, 1)",
            cfg.validation_fraction
        )));
    }
    if let Some(t) = test_pool {
        if t.shape() != train_pool.shape() {
            return Err(Error::Shape(format!(
                "train pool {} vs test pool {}",
                train_pool.shape(),
                t.shape()
            )));
        }
    }
    let mut rng = rng::stream(seed, "experiment-split");

    let mut normal = train_pool.indices_of(normal_class);
    if normal.len() < cfg.n_train || cfg.n_train == 0 {
        return Err(Error::InsufficientSamples {
            class: normal_class,
            needed: cfg.n_train.max(1),
            available: normal.len(),
        });
    }
    normal.shuffle(&mut rng);
    let train_idx = &normal[..cfg.n_train];
    let train = train_pool.subset(train_idx);

    let test_source = test_pool.unwrap_or(train_pool);
    let mut test_normal = match test_pool {
        Some(t) => {
            let mut v = t.indices_of(normal_class);
            v.shuffle(&mut rng);
            v
        }
        None => normal[cfg.n_train..].to_vec(),
    };
    test_normal = take(test_normal, cfg.test.normal, normal_class, "normal")?;
    let mut abnormal: Vec<usize> = (0..test_source.len())
        .filter(|&i| test_source.labels()[i] != normal_class)
        .collect();
    abnormal.shuffle(&mut rng);
    let abnormal = take(abnormal, cfg.test.abnormal, normal_class, "abnormal")?;

    let mut test: Vec<(usize, Label)> = test_normal
        .iter()
        .map(|&i| (i, Label::Normal))
        .chain(abnormal.iter().map(|&i| (i, Label::Abnormal)))
        .collect();
    test.shuffle(&mut rng);

    let n_val = (cfg.validation_fraction * test.len() as f64).round() as usize;
    let (val, eval) = test.split_at(n_val);
    let to_set = |items: &[(usize, Label)]| {
        let idx: Vec<usize> = items.iter().map(|p| p.0).collect();
        BinarySet {
            images: test_source.subset(&idx),
            labels: items.iter().map(|p| p.1).collect(),
        }
    };

    Ok(ExperimentSplit {
        normal_class,
        seed,
        train,
        validation: to_set(val),
        evaluation: to_set(eval),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::ImageShape;

    /// 10 classes × `per_class` images; pixel 0 encodes the dataset index.
    fn pool(per_class: usize) -> ImageSet {
        let n = 10 * per_class;
        let pixels = (0..n).flat_map(|i| [i as f64, 0.0]).collect();
        let labels = (0..n).map(|i| (i % 10) as u8).collect();
        ImageSet::new(ImageShape::new(1, 2, 1), pixels, labels).unwrap()
    }

    #[test]
    fn train_holds_only_normal_images() {
        let cfg = ExperimentConfig {
            n_train: 30,
            ..Default::default()
        };
        let s = make_experiment(&pool(50), 2, &cfg, 1).unwrap();
        assert_eq!(s.train.len(), 30);
        assert!(s.train.labels().iter().all(|&l| l == 2));
        assert_eq!(s.test_len(), 500 - 30);
        assert_eq!(s.validation.len(), (0.2f64 * 470.0).round() as usize);
        for set in [&s.validation, &s.evaluation] {
            for (c, l) in set.images.labels().iter().zip(&set.labels) {
                assert_eq!(*c == 2, *l == Label::Normal);
            }
        }
    }

    #[test]
    fn no_image_is_reused_across_partitions() {
        let cfg = ExperimentConfig {
            n_train: 20,
            ..Default::default()
        };
        let s = make_experiment(&pool(40), 7, &cfg, 3).unwrap();
        let mut ids: Vec<u64> = [&s.train, &s.validation.images, &s.evaluation.images]
            .iter()
            .flat_map(|set| (0..set.len()).map(|i| set.image(i)[0] as u64).collect::<Vec<_>>())
            .collect();
        let n = ids.len();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), n);
    }

    #[test]
    fn same_seed_same_partitions() {
        let cfg = ExperimentConfig {
            n_train: 10,
            test: TestComposition {
                normal: Some(5),
                abnormal: Some(45),
            },
            validation_fraction: 0.2,
        };
        let a = make_experiment(&pool(20), 4, &cfg, 9).unwrap();
        let b = make_experiment(&pool(20), 4, &cfg, 9).unwrap();
        let c = make_experiment(&pool(20), 4, &cfg, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.validation.len() + a.evaluation.len(), 50);
        assert_eq!(a.validation.count(Label::Normal) + a.evaluation.count(Label::Normal), 5);
    }

    #[test]
    fn insufficient_normals_is_error() {
        let cfg = ExperimentConfig {
            n_train: 21,
            ..Default::default()
        };
        assert!(matches!(
            make_experiment(&pool(20), 0, &cfg, 0),
            Err(Error::InsufficientSamples { needed: 21, available: 20, .. })
        ));
    }

    #[test]
    fn separate_test_pool() {
        let cfg = ExperimentConfig {
            n_train: 20,
            ..Default::default()
        };
        let s = make_experiment_from_pools(&pool(20), &pool(5), 1, &cfg, 0).unwrap();
        assert_eq!(s.test_len(), 50);
        assert_eq!(s.validation.count(Label::Normal) + s.evaluation.count(Label::Normal), 5);
    }
}
