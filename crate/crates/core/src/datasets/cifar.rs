//! CIFAR-10 binary batches: records of one label byte followed by 3072 pixel
//! bytes stored channel-planar (1024 red, 1024 green, 1024 blue, row-major).

use std::path::Path;

use super::{ImageSet, ImageShape};
use crate::{Error, Result};

const RECORD: usize = 1 + 32 * 32 * 3;
const PLANE: usize = 32 * 32;

/// Parse one batch, reordering each record to height × width × channel.
pub fn parse_cifar10(bytes: &[u8]) -> Result<(Vec<f64>, Vec<u8>)> {
    if bytes.len() % RECORD != 0 {
        return Err(Error::Format(format!(
            "CIFAR-10 batch length {} is not a multiple of {RECORD}",
            bytes.len()
        )));
    }
    let n = bytes.len() / RECORD;
    let mut pixels = Vec::with_capacity(n * (RECORD - 1));
    let mut labels = Vec::with_capacity(n);
    for (i, rec) in bytes.chunks_exact(RECORD).enumerate() {
        let label = rec[0];
        if label > 9 {
            return Err(Error::Format(format!("record {i}: label byte {label} outside 0..9")));
        }
        labels.push(label);
        let planes = &rec[1..];
        for p in 0..PLANE {
            for c in 0..3 {
                pixels.push(f64::from(planes[c * PLANE + p]));
            }
        }
    }
    Ok((pixels, labels))
}

/// Load and concatenate one or more batch files.
pub fn load_cifar10<P: AsRef<Path>>(paths: &[P]) -> Result<ImageSet> {
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    for path in paths {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let (p, l) = parse_cifar10(&bytes)?;
        pixels.extend(p);
        labels.extend(l);
    }
    ImageSet::new(ImageShape::CIFAR10, pixels, labels)
}
