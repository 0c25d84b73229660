use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, VoxelGrid};

pub const GRID_MAGIC: [u8; 8] = *b"MVXGRID\0";
pub const GRID_VERSION: u32 = 1;
/// Magic, version, channels, length, resolution, atom radius.
pub const GRID_HEADER_LEN: usize = 8 + 4 + 4 + 4 + 8 + 8;

/// Serializes a grid.
///
/// ```text
/// offset  size  field
///      0     8  magic "MVXGRID\0"
///      8     4  version (u32 LE)
///     12     4  channels (u32 LE)
///     16     4  edge length (u32 LE)
///     20     8  resolution in Å (f64 LE)
///     28     8  atom radius in Å (f64 LE)
///     36     *  values, channel-major, f32 LE
/// ```
pub fn encode_grid(grid: &VoxelGrid) -> Vec<u8> {
    let spec = grid.spec();
    let mut out = Vec::with_capacity(GRID_HEADER_LEN + 4 * spec.size());
    out.extend_from_slice(&GRID_MAGIC);
    out.extend_from_slice(&GRID_VERSION.to_le_bytes());
    out.extend_from_slice(&(spec.channels as u32).to_le_bytes());
    out.extend_from_slice(&(spec.length as u32).to_le_bytes());
    out.extend_from_slice(&spec.resolution.to_le_bytes());
    out.extend_from_slice(&spec.atom_radius.to_le_bytes());
    for v in grid.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_grid(bytes: &[u8]) -> Result<VoxelGrid> {
    if bytes.len() < GRID_HEADER_LEN {
        if bytes.len() >= 8 && bytes[..8] != GRID_MAGIC {
            return Err(bad_magic());
        }
        return Err(Error::Truncated {
            expected: GRID_HEADER_LEN,
            actual: bytes.len(),
        });
    }
    if bytes[..8] != GRID_MAGIC {
        return Err(bad_magic());
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(8);
    if version != GRID_VERSION {
        return Err(Error::Version {
            found: version,
            expected: GRID_VERSION,
        });
    }
    let spec = GridSpec {
        channels: u32_at(12) as usize,
        length: u32_at(16) as usize,
        resolution: f64_at(20),
        atom_radius: f64_at(28),
    };
    spec.validate().map_err(|e| Error::Format {
        offset: 12,
        msg: e.to_string(),
    })?;
    let expected = spec
        .size()
        .checked_mul(4)
        .and_then(|n| n.checked_add(GRID_HEADER_LEN))
        .ok_or_else(|| Error::Format {
            offset: 12,
            msg: "grid dimensions overflow".into(),
        })?;
    if bytes.len() != expected {
        return Err(Error::Truncated {
            expected,
            actual: bytes.len(),
        });
    }
    let values: Vec<f32> = bytes[GRID_HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(i) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Format {
            offset: GRID_HEADER_LEN + 4 * i,
            msg: format!("occupancy {} outside [0, 1]", values[i]),
        });
    }
    VoxelGrid::new(spec, values)
}

fn bad_magic() -> Error {
    Error::Format {
        offset: 0,
        msg: "not a grid file (bad magic)".into(),
    }
}

pub fn write_grid(path: impl AsRef<Path>, grid: &VoxelGrid) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_grid(grid)).map_err(|e| Error::io(path, e))
}

pub fn read_grid(path: impl AsRef<Path>) -> Result<VoxelGrid> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_grid(&bytes)
}
