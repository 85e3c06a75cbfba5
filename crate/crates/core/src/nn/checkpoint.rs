//! Parameter checkpoints.
//!
//! A text header followed by a binary payload:
//!
//! ```text
//! INTRASPLIT-CHECKPOINT 1
//! seed <u64>
//! values <total f64 count>
//! input 28x28x1
//! latent 64
//! enc conv2d 1 8 3 2 1
//! ...
//! end
//! <little-endian f64 values of every tensor, storage order>
//! ```

use std::path::Path;

use super::arch::ArchitectureSpec;
use super::params::AutoencoderParams;
use crate::{Error, Result};

const MAGIC: &str = "INTRASPLIT-CHECKPOINT";
const VERSION: u32 = 1;

pub fn to_bytes(params: &AutoencoderParams) -> Vec<u8> {
    let values = params.parameter_count();
    let mut out = format!(
        "{MAGIC} {VERSION}\nseed {}\nvalues {values}\n{}end\n",
        params.seed,
        params.arch.describe()
    )
    .into_bytes();
    for t in &params.tensors {
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<AutoencoderParams> {
    let marker = b"\nend\n";
    let end = bytes
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| Error::Format("checkpoint header has no end marker".into()))?;
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| Error::Format("checkpoint header is not UTF-8".into()))?;
    let payload = &bytes[end + marker.len()..];

    let mut lines = header.lines();
    let first = lines.next().unwrap_or("");
    match first.split_once(' ') {
        Some((MAGIC, v)) if v.trim() == VERSION.to_string() => {}
        Some((MAGIC, v)) => return Err(Error::Format(format!("unsupported checkpoint version {v}"))),
        _ => return Err(Error::Format("not a checkpoint file".into())),
    }
    let mut field = |name: &str| -> Result<u64> {
        let line = lines.next().unwrap_or("");
        line.strip_prefix(name)
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| Error::Format(format!("checkpoint: expected `{name}` line, got {line:?}")))
    };
    let seed = field("seed")?;
    let values = field("values")? as usize;
    let arch = ArchitectureSpec::parse(&lines.collect::<Vec<_>>().join("\n"))?;

    let mut params = AutoencoderParams::zeros(&arch)?;
    params.seed = seed;
    if params.parameter_count() != values || payload.len() != values * 8 {
        return Err(Error::Format(format!(
            "checkpoint payload holds {} bytes, architecture needs {} values",
            payload.len(),
            params.parameter_count()
        )));
    }
    let mut chunks = payload.chunks_exact(8);
    for t in &mut params.tensors {
        for v in &mut t.data {
            let c = chunks.next().expect("length checked");
            *v = f64::from_le_bytes(c.try_into().expect("8 bytes"));
        }
    }
    if !params.is_finite() {
        return Err(Error::NonFinite("checkpoint holds non-finite parameters".into()));
    }
    Ok(params)
}

pub fn save(params: &AutoencoderParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_bytes(params)).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<AutoencoderParams> {
    let path = path.as_ref();
    from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::ImageShape;
    use crate::nn::init_params;

    #[test]
    fn round_trip_is_bit_exact() {
        let arch = ArchitectureSpec::desk(ImageShape::MNIST, [4, 8, 8], 16).unwrap();
        let p = init_params(&arch, 42).unwrap();
        let back = from_bytes(&to_bytes(&p)).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn truncated_payload_rejected() {
        let arch = ArchitectureSpec::desk(ImageShape::MNIST, [4, 8, 8], 16).unwrap();
        let mut bytes = to_bytes(&init_params(&arch, 1).unwrap());
        bytes.truncate(bytes.len() - 3);
        assert!(from_bytes(&bytes).is_err());
    }

    #[test]
    fn wrong_version_rejected() {
        let arch = ArchitectureSpec::desk(ImageShape::MNIST, [4, 8, 8], 16).unwrap();
        let bytes = to_bytes(&init_params(&arch, 1).unwrap());
        let text = String::from_utf8_lossy(&bytes).replacen("CHECKPOINT 1", "CHECKPOINT 9", 1);
        assert!(from_bytes(text.as_bytes()).is_err());
    }
}
