//! Versioned binary checkpoint for [`ConvDenoiserParams`].
//!
//! ```text
//! magic        8 bytes   "MVXCKPT\0"
//! version      u32 LE
//! text_len     u32 LE
//! arch text    text_len bytes of UTF-8 (`key=value` fields, incl. ema_decay)
//! params       f32 LE, every tensor in declaration order
//! ema shadow   f32 LE, same layout
//! ```

use std::fs;
use std::path::Path;

use super::conv::{Architecture, ConvDenoiserParams};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: [u8; 8] = *b"MVXCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn encode_checkpoint(p: &ConvDenoiserParams) -> Vec<u8> {
    let text = format!("{} ema_decay={}", p.arch.describe(), p.ema_decay);
    let floats = 2 * p.arch.param_count();
    let mut out = Vec::with_capacity(16 + text.len() + 4 * floats);
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(text.len() as u32).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
    for v in p.params.iter().chain(&p.ema).flatten() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<ConvDenoiserParams> {
    if bytes.len() < 16 {
        return Err(Error::Truncated {
            expected: 16,
            actual: bytes.len(),
        });
    }
    if bytes[..8] != CHECKPOINT_MAGIC {
        return Err(Error::Format {
            offset: 0,
            msg: "not a denoiser checkpoint (bad magic)".into(),
        });
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let text_len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let body = 16 + text_len;
    if bytes.len() < body {
        return Err(Error::Truncated {
            expected: body,
            actual: bytes.len(),
        });
    }
    let text = std::str::from_utf8(&bytes[16..body]).map_err(|_| Error::Format {
        offset: 16,
        msg: "architecture text is not UTF-8".into(),
    })?;
    let arch = Architecture::parse(text).map_err(|e| Error::Format {
        offset: 16,
        msg: e.to_string(),
    })?;
    let ema_decay = text
        .split_whitespace()
        .find_map(|f| f.strip_prefix("ema_decay="))
        .and_then(|v| v.parse::<f64>().ok())
        .ok_or_else(|| Error::Format {
            offset: 16,
            msg: "architecture text lacks ema_decay".into(),
        })?;
    let sizes = arch.param_sizes();
    let floats: usize = sizes.iter().sum();
    let expected = body + 8 * floats;
    if bytes.len() != expected {
        return Err(Error::Truncated {
            expected,
            actual: bytes.len(),
        });
    }
    let mut cursor = bytes[body..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64);
    let mut read = |sizes: &[usize]| -> Vec<Vec<f64>> {
        sizes.iter().map(|&n| cursor.by_ref().take(n).collect()).collect()
    };
    let params = read(&sizes);
    let ema = read(&sizes);
    ConvDenoiserParams::from_parts(arch, params, ema, ema_decay)
}

pub fn write_checkpoint(path: impl AsRef<Path>, p: &ConvDenoiserParams) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_checkpoint(p)).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<ConvDenoiserParams> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoise::NoiseLevel;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params() -> ConvDenoiserParams {
        let arch = Architecture::new(2, 4, 3, 1, NoiseLevel::new(0.9).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut p = ConvDenoiserParams::init(arch, 0.999, &mut rng).unwrap();
        p.ema[1][0] = 0.25;
        p
    }

    #[test]
    fn round_trip_to_single_precision() {
        let p = params();
        let bytes = encode_checkpoint(&p);
        let text_len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        assert_eq!(bytes.len(), 16 + text_len + 8 * p.arch.param_count());
        let q = decode_checkpoint(&bytes).unwrap();
        assert_eq!(q.arch, p.arch);
        assert_eq!(q.ema_decay, p.ema_decay);
        for (a, b) in p.params.iter().flatten().zip(q.params.iter().flatten()) {
            assert_eq!(*a as f32 as f64, *b);
        }
        assert_eq!(q.ema[1][0], 0.25);
        // a second pass is lossless
        assert_eq!(encode_checkpoint(&q), bytes);
    }

    #[test]
    fn rejects_corruption() {
        let bytes = encode_checkpoint(&params());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_checkpoint(&bad), Err(Error::Format { .. })));
        let mut bad = bytes.clone();
        bad[8] = 9;
        assert!(matches!(decode_checkpoint(&bad), Err(Error::Version { found: 9, .. })));
        assert!(matches!(
            decode_checkpoint(&bytes[..bytes.len() - 3]),
            Err(Error::Truncated { .. })
        ));
    }
}
