//! Plain-text experiment manifests.
//!
//! ```text
//! # comment
//! [dataset]
//! kind = mnist
//! train_images = data/train-images-idx3-ubyte
//! train_labels = data/train-labels-idx1-ubyte
//!
//! [experiment]
//! classes = 0, 1, 2
//! methods = ours, cae, original
//! seeds = 0, 1, 2
//!
//! [train]
//! stage1_epochs = 20
//! ```
//!
//! Every key is optional except the dataset source. Unknown sections or keys,
//! duplicate keys and missing files are errors. Relative paths are resolved
//! against the manifest's directory.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::datasets::{ExperimentConfig, ImageShape, TestComposition};
use crate::losses::LossWeights;
use crate::nn::AdamConfig;
use crate::ocsvm::{Gamma, OcsvmParams};
use crate::pipeline::TrainConfig;
use crate::ssim::{SsimConfig, WindowKind};
use crate::{Error, Result};

/// Feature extractor evaluated in an experiment cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Ours,
    Original,
    Pca,
    Hog,
    Cae,
    Cls,
    External,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Ours,
        Method::Original,
        Method::Pca,
        Method::Hog,
        Method::Cae,
        Method::Cls,
        Method::External,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ours => "ours",
            Method::Original => "original",
            Method::Pca => "pca",
            Method::Hog => "hog",
            Method::Cae => "cae",
            Method::Cls => "cls",
            Method::External => "external",
        }
    }

    /// Whether the method trains an autoencoder (and so depends on the seed).
    pub fn is_learned(self) -> bool {
        matches!(self, Method::Ours | Method::Cae | Method::Cls)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    /// MNIST-style IDX files; the optional test pair is a separate test pool.
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test: Option<(PathBuf, PathBuf)>,
    },
    Cifar10 {
        train: Vec<PathBuf>,
        test: Vec<PathBuf>,
    },
    Csv {
        train: PathBuf,
        test: Option<PathBuf>,
        shape: Option<ImageShape>,
    },
    /// Rendered stroke digits, `per_class` images of each digit.
    SyntheticDigits { per_class: usize, seed: u64 },
}

/// Threshold applied to the one-class SVM decision score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdRule {
    /// Maximize balanced accuracy on the validation split.
    Validation,
    /// The sign of the decision score.
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    /// Label written into result tables.
    pub dataset_name: String,
    pub source: DatasetSource,
    pub classes: Vec<u8>,
    pub methods: Vec<Method>,
    /// One training run per seed; the seed drives initialization and batching.
    pub seeds: Vec<u64>,
    /// Seed of the train/validation/test partition, shared by all runs.
    pub split_seed: u64,
    pub experiment: ExperimentConfig,
    pub train: TrainConfig,
    pub ocsvm: OcsvmParams,
    pub threshold: ThresholdRule,
    pub output_dir: PathBuf,
    /// Precomputed features for `external`, one row per image of the train pool.
    pub external_features: Option<PathBuf>,
    /// Same for the test pool when the dataset has one.
    pub external_test_features: Option<PathBuf>,
}

type Section = BTreeMap<String, (usize, String)>;

struct Reader {
    sections: BTreeMap<String, Section>,
    base: PathBuf,
}

impl Reader {
    fn take(&mut self, section: &str, key: &str) -> Option<(usize, String)> {
        self.sections.get_mut(section)?.remove(key)
    }

    fn parse<T: FromStr>(&mut self, section: &str, key: &str) -> Result<Option<T>> {
        match self.take(section, key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("line {line}: invalid value `{v}` for {section}.{key}"))),
        }
    }

    fn set<T: FromStr>(&mut self, section: &str, key: &str, slot: &mut T) -> Result<()> {
        if let Some(v) = self.parse(section, key)? {
            *slot = v;
        }
        Ok(())
    }

    fn list<T: FromStr>(&mut self, section: &str, key: &str) -> Result<Option<Vec<T>>> {
        match self.take(section, key) {
            None => Ok(None),
            Some((line, v)) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse()
                        .map_err(|_| Error::Config(format!("line {line}: invalid item `{s}` in {section}.{key}")))
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    fn path(&mut self, section: &str, key: &str) -> Result<Option<PathBuf>> {
        match self.take(section, key) {
            None => Ok(None),
            Some((line, v)) => {
                let p = self.base.join(&v);
                if !p.exists() {
                    return Err(Error::Config(format!("line {line}: {section}.{key}: `{}` does not exist", p.display())));
                }
                Ok(Some(p))
            }
        }
    }

    fn required_path(&mut self, section: &str, key: &str) -> Result<PathBuf> {
        self.path(section, key)?
            .ok_or_else(|| Error::Config(format!("missing {section}.{key}")))
    }

    fn paths(&mut self, section: &str, key: &str) -> Result<Vec<PathBuf>> {
        let Some((line, v)) = self.take(section, key) else {
            return Ok(Vec::new());
        };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                let p = self.base.join(s);
                if p.exists() {
                    Ok(p)
                } else {
                    Err(Error::Config(format!("line {line}: {section}.{key}: `{}` does not exist", p.display())))
                }
            })
            .collect()
    }

    fn finish(self) -> Result<()> {
        for (name, section) in &self.sections {
            if let Some((key, (line, _))) = section.iter().next() {
                return Err(Error::Config(format!("line {line}: unknown key `{key}` in [{name}]")));
            }
        }
        Ok(())
    }
}

fn count(v: &str) -> std::result::Result<Option<usize>, ()> {
    if v == "all" {
        Ok(None)
    } else {
        v.parse().map(Some).map_err(|_| ())
    }
}

const SECTIONS: [&str; 4] = ["dataset", "experiment", "train", "ocsvm"];

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    /// Parse manifest text, resolving relative paths against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut sections: BTreeMap<String, Section> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                if !SECTIONS.contains(&name) {
                    return Err(Error::Config(format!("line {line_no}: unknown section [{name}]")));
                }
                if sections.contains_key(name) {
                    return Err(Error::Config(format!("line {line_no}: section [{name}] repeated")));
                }
                sections.insert(name.to_owned(), Section::new());
                current = Some(name.to_owned());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {line_no}: expected `key = value`")))?;
            let section = current
                .as_ref()
                .ok_or_else(|| Error::Config(format!("line {line_no}: key outside of a section")))?;
            let entry = sections.get_mut(section).expect("section inserted");
            let key = key.trim().to_owned();
            if entry.insert(key.clone(), (line_no, value.trim().to_owned())).is_some() {
                return Err(Error::Config(format!("line {line_no}: duplicate key `{key}`")));
            }
        }
        let mut r = Reader {
            sections,
            base: base.to_path_buf(),
        };

        let kind: String = r
            .parse("dataset", "kind")?
            .ok_or_else(|| Error::Config("missing dataset.kind".into()))?;
        let source = match kind.as_str() {
            "mnist" | "fmnist" => {
                let train_images = r.required_path("dataset", "train_images")?;
                let train_labels = r.required_path("dataset", "train_labels")?;
                let test = match (r.path("dataset", "test_images")?, r.path("dataset", "test_labels")?) {
                    (Some(i), Some(l)) => Some((i, l)),
                    (None, None) => None,
                    _ => return Err(Error::Config("test_images and test_labels go together".into())),
                };
                DatasetSource::Idx {
                    train_images,
                    train_labels,
                    test,
                }
            }
            "cifar10" => {
                let train = r.paths("dataset", "train_files")?;
                if train.is_empty() {
                    return Err(Error::Config("missing dataset.train_files".into()));
                }
                DatasetSource::Cifar10 {
                    train,
                    test: r.paths("dataset", "test_files")?,
                }
            }
            "csv" => DatasetSource::Csv {
                train: r.required_path("dataset", "train_csv")?,
                test: r.path("dataset", "test_csv")?,
                shape: r.parse("dataset", "shape")?,
            },
            "synthetic-digits" => DatasetSource::SyntheticDigits {
                per_class: r.parse("dataset", "per_class")?.unwrap_or(1000),
                seed: r.parse("dataset", "seed")?.unwrap_or(0),
            },
            other => return Err(Error::Config(format!("unknown dataset kind `{other}`"))),
        };
        let dataset_name = r.parse("dataset", "name")?.unwrap_or(kind);

        let classes = r.list("experiment", "classes")?.unwrap_or_else(|| (0..10).collect());
        let methods = r
            .list("experiment", "methods")?
            .unwrap_or_else(|| vec![Method::Ours, Method::Original, Method::Pca, Method::Hog, Method::Cae, Method::Cls]);
        let seeds = r.list("experiment", "seeds")?.unwrap_or_else(|| (0..5).collect());
        let split_seed = r.parse("experiment", "split_seed")?.unwrap_or(0);
        let mut experiment = ExperimentConfig::default();
        r.set("experiment", "n_train", &mut experiment.n_train)?;
        r.set("experiment", "validation_fraction", &mut experiment.validation_fraction)?;
        let mut test = TestComposition::default();
        for (key, slot) in [("test_normal", &mut test.normal), ("test_abnormal", &mut test.abnormal)] {
            if let Some((line, v)) = r.take("experiment", key) {
                *slot = count(&v).map_err(|_| Error::Config(format!("line {line}: {key} must be a count or `all`")))?;
            }
        }
        experiment.test = test;
        let output_dir = base.join(r.parse::<String>("experiment", "output_dir")?.unwrap_or_else(|| "results".into()));
        let external_features = r.path("experiment", "external_features")?;
        let external_test_features = r.path("experiment", "external_test_features")?;
        let threshold = match r.take("experiment", "threshold") {
            None => ThresholdRule::Validation,
            Some((_, v)) if v == "validation" => ThresholdRule::Validation,
            Some((_, v)) if v == "zero" => ThresholdRule::Zero,
            Some((line, v)) => return Err(Error::Config(format!("line {line}: threshold `{v}` is not `validation` or `zero`"))),
        };

        let mut train = TrainConfig::default();
        r.set("train", "batch_size", &mut train.batch_size)?;
        r.set("train", "stage1_epochs", &mut train.stage1_epochs)?;
        r.set("train", "stage3_epochs", &mut train.stage3_epochs)?;
        r.set("train", "rho", &mut train.rho)?;
        let w: &mut LossWeights = &mut train.weights;
        r.set("train", "alpha", &mut w.alpha)?;
        r.set("train", "beta1", &mut w.beta1)?;
        r.set("train", "beta2", &mut w.beta2)?;
        r.set("train", "l2", &mut train.l2)?;
        r.set("train", "latent_dim", &mut train.latent_dim)?;
        if let Some(c) = r.list::<usize>("train", "channels")? {
            train.channels = c
                .try_into()
                .map_err(|_| Error::Config("train.channels needs exactly three values".into()))?;
        }
        let a: &mut AdamConfig = &mut train.adam;
        r.set("train", "learning_rate", &mut a.learning_rate)?;
        r.set("train", "adam_beta1", &mut a.beta1)?;
        r.set("train", "adam_beta2", &mut a.beta2)?;
        r.set("train", "adam_epsilon", &mut a.epsilon)?;
        let s: &mut SsimConfig = &mut train.ssim;
        r.set("train", "ssim_window", &mut s.window)?;
        r.set("train", "ssim_k1", &mut s.k1)?;
        r.set("train", "ssim_k2", &mut s.k2)?;
        r.set("train", "ssim_dynamic_range", &mut s.dynamic_range)?;
        if let Some((line, v)) = r.take("train", "ssim_sigma") {
            s.kind = match v.as_str() {
                "uniform" => WindowKind::Uniform,
                _ => WindowKind::Gaussian {
                    sigma: v
                        .parse()
                        .map_err(|_| Error::Config(format!("line {line}: ssim_sigma must be a number or `uniform`")))?,
                },
            };
        }
        train.validate()?;

        let mut ocsvm = OcsvmParams::default();
        r.set("ocsvm", "nu", &mut ocsvm.nu)?;
        r.set("ocsvm", "tol", &mut ocsvm.tol)?;
        r.set("ocsvm", "max_iter", &mut ocsvm.max_iter)?;
        if let Some(mb) = r.parse::<usize>("ocsvm", "cache_mb")? {
            ocsvm.cache_bytes = mb << 20;
        }
        if let Some((line, v)) = r.take("ocsvm", "gamma") {
            ocsvm.gamma = if v == "auto" {
                Gamma::Auto
            } else {
                Gamma::Fixed(v.parse().map_err(|_| Error::Config(format!("line {line}: gamma must be `auto` or a number")))?)
            };
        }
        ocsvm.validate()?;
        r.finish()?;

        let manifest = Manifest {
            dataset_name,
            source,
            classes,
            methods,
            seeds,
            split_seed,
            experiment,
            train,
            ocsvm,
            threshold,
            output_dir,
            external_features,
            external_test_features,
        };
        manifest.validate()?;
        Ok(manifest)
    }

    fn validate(&self) -> Result<()> {
        if self.classes.is_empty() || self.methods.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config("classes, methods and seeds must be nonempty".into()));
        }
        if let Some(c) = self.classes.iter().find(|&&c| c > 9) {
            return Err(Error::Config(format!("class {c} outside 0..=9")));
        }
        for (name, list) in [("classes", self.classes.iter().map(|&c| c as u64).collect::<Vec<_>>()), ("seeds", self.seeds.clone())] {
            let mut sorted = list.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != list.len() {
                return Err(Error::Config(format!("{name} contains duplicates")));
            }
        }
        let mut m = self.methods.clone();
        m.sort();
        m.dedup();
        if m.len() != self.methods.len() {
            return Err(Error::Config("methods contain duplicates".into()));
        }
        if self.methods.contains(&Method::External) && self.external_features.is_none() {
            return Err(Error::Config("method `external` needs experiment.external_features".into()));
        }
        Ok(())
    }
}
