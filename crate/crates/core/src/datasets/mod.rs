//! Dataset ingestion and one-class experiment construction.
//!
//! Images are stored as `f64` in height × width × channel order, one image
//! after another. Loaders return raw byte values (0..=255); call
//! [`minmax_scale`] (or [`MinMaxScaler`]) before training.

mod cifar;
mod csv_images;
mod idx;
mod split;
pub mod synthetic;

pub use cifar::{load_cifar10, parse_cifar10};
pub use csv_images::{load_csv_images, write_csv_images};
pub use idx::{load_idx, parse_idx_images, parse_idx_labels, read_idx_images, read_idx_labels};
pub use split::{make_experiment, make_experiment_from_pools, BinarySet, ExperimentConfig, ExperimentSplit, TestComposition};

use crate::{Error, Result};

/// Height, width and channel count of every image in a set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ImageShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl ImageShape {
    pub const MNIST: ImageShape = ImageShape::new(28, 28, 1);
    pub const CIFAR10: ImageShape = ImageShape::new(32, 32, 3);

    pub const fn new(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
        }
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width * self.channels
    }
}

impl std::fmt::Display for ImageShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.height, self.width, self.channels)
    }
}

impl std::str::FromStr for ImageShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<_> = s.split('x').map(str::trim).collect();
        let parse = |p: &str| {
            p.parse::<usize>()
                .ok()
                .filter(|&v| v > 0)
                .ok_or_else(|| Error::Config(format!("bad image shape {s:?}, expected HxWxC")))
        };
        match parts.as_slice() {
            [h, w] => Ok(Self::new(parse(h)?, parse(w)?, 1)),
            [h, w, c] => Ok(Self::new(parse(h)?, parse(w)?, parse(c)?)),
            _ => Err(Error::Config(format!("bad image shape {s:?}, expected HxWxC"))),
        }
    }
}

/// Binary label used at evaluation time. The normal (training) class is the
/// negative class; every other class is positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Normal,
    Abnormal,
}

impl Label {
    pub fn is_abnormal(self) -> bool {
        matches!(self, Label::Abnormal)
    }
}

/// A labeled collection of equally shaped images.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSet {
    shape: ImageShape,
    pixels: Vec<f64>,
    labels: Vec<u8>,
}

impl ImageSet {
    pub fn new(shape: ImageShape, pixels: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if shape.pixels() == 0 {
            return Err(Error::Shape("image shape has zero pixels".into()));
        }
        if pixels.len() != labels.len() * shape.pixels() {
            return Err(Error::Shape(format!(
                "{} pixel values for {} images of shape {shape}",
                pixels.len(),
                labels.len()
            )));
        }
        Ok(Self {
            shape,
            pixels,
            labels,
        })
    }

    pub fn shape(&self) -> ImageShape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn image(&self, i: usize) -> &[f64] {
        let n = self.shape.pixels();
        &self.pixels[i * n..(i + 1) * n]
    }

    pub fn subset(&self, indices: &[usize]) -> ImageSet {
        let mut pixels = Vec::with_capacity(indices.len() * self.shape.pixels());
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            pixels.extend_from_slice(self.image(i));
            labels.push(self.labels[i]);
        }
        ImageSet {
            shape: self.shape,
            pixels,
            labels,
        }
    }

    /// Indices of images carrying class `class`, in dataset order.
    pub fn indices_of(&self, class: u8) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == class).collect()
    }

    /// Concatenate two sets of the same shape.
    pub fn concat(&self, other: &ImageSet) -> Result<ImageSet> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "cannot concatenate {} and {} images",
                self.shape, other.shape
            )));
        }
        let mut pixels = self.pixels.clone();
        pixels.extend_from_slice(&other.pixels);
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Ok(ImageSet {
            shape: self.shape,
            pixels,
            labels,
        })
    }
}

/// Global min-max scaler fitted on a training corpus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinMaxScaler {
    pub min: f64,
    pub max: f64,
}

impl MinMaxScaler {
    pub fn fit(set: &ImageSet) -> Self {
        let (min, max) = set
            .pixels
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if set.pixels.is_empty() {
            return Self { min: 0.0, max: 0.0 };
        }
        Self { min, max }
    }

    /// `(x - min) / (max - min)`; a degenerate corpus (`max == min`) maps to 0.
    pub fn apply(&self, set: &ImageSet) -> ImageSet {
        let range = self.max - self.min;
        let pixels = if range > 0.0 {
            set.pixels.iter().map(|&v| (v - self.min) / range).collect()
        } else {
            vec![0.0; set.pixels.len()]
        };
        ImageSet {
            shape: set.shape,
            pixels,
            labels: set.labels.clone(),
        }
    }
}

/// Scale a corpus to [0, 1] with its own global minimum and maximum.
pub fn minmax_scale(set: &ImageSet) -> ImageSet {
    MinMaxScaler::fit(set).apply(set)
}
