//! IDX container (MNIST / Fashion-MNIST distribution format).
//!
//! ```text
//! u8 0, u8 0, u8 dtype (0x08 = unsigned byte), u8 ndim
//! ndim × u32 big-endian dimension sizes
//! payload, row-major
//! ```
//! Image files carry magic `0x00000803`, label files `0x00000801`.

use std::path::Path;

use super::{ImageSet, ImageShape};
use crate::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format(format!("IDX header truncated at byte {offset}")))
}

/// Parse an IDX3 image file into `(count, rows, cols, payload)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<u8>)> {
    let magic = read_u32(bytes, 0)?;
    if magic != IMAGES_MAGIC {
        return Err(Error::Format(format!(
            "IDX image magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}"
        )));
    }
    let count = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    let need = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| Error::Format("IDX dimensions overflow".into()))?;
    let payload = &bytes[16..];
    if payload.len() < need {
        return Err(Error::Format(format!(
            "IDX image payload truncated: {} bytes, header declares {count}x{rows}x{cols} = {need}",
            payload.len()
        )));
    }
    Ok((count, rows, cols, payload[..need].to_vec()))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = read_u32(bytes, 0)?;
    if magic != LABELS_MAGIC {
        return Err(Error::Format(format!(
            "IDX label magic {magic:#010x}, expected {LABELS_MAGIC:#010x}"
        )));
    }
    let count = read_u32(bytes, 4)? as usize;
    let payload = &bytes[8..];
    if payload.len() < count {
        return Err(Error::Format(format!(
            "IDX label payload truncated: {} bytes, header declares {count}",
            payload.len()
        )));
    }
    Ok(payload[..count].to_vec())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn read_idx_images(path: impl AsRef<Path>) -> Result<(usize, usize, usize, Vec<u8>)> {
    parse_idx_images(&read(path.as_ref())?)
}

pub fn read_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    parse_idx_labels(&read(path.as_ref())?)
}

/// Load an image/label IDX pair. Pixels are raw byte values.
pub fn load_idx(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<ImageSet> {
    let (count, rows, cols, payload) = read_idx_images(images)?;
    let labels = read_idx_labels(labels)?;
    if labels.len() != count {
        return Err(Error::Format(format!(
            "image file holds {count} images but label file holds {} labels",
            labels.len()
        )));
    }
    ImageSet::new(
        ImageShape::new(rows, cols, 1),
        payload.into_iter().map(f64::from).collect(),
        labels,
    )
}

#[cfg(test)]
pub(crate) fn encode_idx_images(count: usize, rows: usize, cols: usize, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    for d in [count, rows, cols] {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend_from_slice(payload);
    out
}

#[cfg(test)]
pub(crate) fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}
