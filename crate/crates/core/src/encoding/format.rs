//! `.hsenc` binary layout, all little-endian:
//!
//! ```text
//! magic   b"HSEN"
//! version u32
//! bits    u32
//! count   u64          (must equal 2^bits)
//! coords  count * 3 f64
//! codes   count * u16  (bits <= 16) or count * u32
//! crc32   u32          over every preceding byte
//! ```

use std::path::Path;

use nalgebra::Point3;

use super::{EncodingError, SurfaceEncoding};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"HSEN";
const HEADER_LEN: usize = 4 + 4 + 4 + 8;

fn code_width(bits: u32) -> usize {
    if bits <= 16 {
        2
    } else {
        4
    }
}

pub fn encode_encoding(enc: &SurfaceEncoding) -> Vec<u8> {
    let n = enc.len();
    let width = code_width(enc.bits());
    let mut out = Vec::with_capacity(HEADER_LEN + n * (24 + width) + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&enc.bits().to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    for v in enc.vertices() {
        for c in v.coords.iter() {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    for &code in enc.codes() {
        if width == 2 {
            out.extend_from_slice(&(code as u16).to_le_bytes());
        } else {
            out.extend_from_slice(&code.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

pub fn decode_encoding(bytes: &[u8]) -> Result<SurfaceEncoding, EncodingError> {
    if bytes.len() < MAGIC.len() || &bytes[..4] != MAGIC {
        return Err(EncodingError::BadMagic);
    }
    if bytes.len() < HEADER_LEN + 4 {
        return Err(EncodingError::Truncated);
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(EncodingError::ChecksumMismatch { stored, computed });
    }

    let u32_at = |o: usize| u32::from_le_bytes(body[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != FORMAT_VERSION {
        return Err(EncodingError::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let bits = u32_at(8);
    if !(1..=super::MAX_BITS).contains(&bits) {
        return Err(EncodingError::InvalidBits(bits));
    }
    let count = u64::from_le_bytes(body[12..20].try_into().unwrap());
    let expected = 1u64 << bits;
    if count != expected {
        return Err(EncodingError::Format(format!(
            "header declares {bits} bits but {count} vertices (expected {expected})"
        )));
    }
    let n = count as usize;
    let width = code_width(bits);
    let payload = &body[HEADER_LEN..];
    if payload.len() != n * (24 + width) {
        return Err(EncodingError::Format(format!(
            "payload is {} bytes, expected {} for {n} vertices",
            payload.len(),
            n * (24 + width)
        )));
    }
    let (coord_bytes, code_bytes) = payload.split_at(n * 24);
    let f64_at = |o: usize| f64::from_le_bytes(coord_bytes[o..o + 8].try_into().unwrap());
    let vertices: Vec<Point3<f64>> = (0..n)
        .map(|i| Point3::new(f64_at(i * 24), f64_at(i * 24 + 8), f64_at(i * 24 + 16)))
        .collect();
    let codes: Vec<u32> = if width == 2 {
        code_bytes
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]) as u32)
            .collect()
    } else {
        code_bytes
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect()
    };
    SurfaceEncoding::from_parts(bits, vertices, codes)
}

pub fn save_encoding(enc: &SurfaceEncoding, path: impl AsRef<Path>) -> Result<(), EncodingError> {
    std::fs::write(path, encode_encoding(enc))?;
    Ok(())
}

pub fn load_encoding(path: impl AsRef<Path>) -> Result<SurfaceEncoding, EncodingError> {
    decode_encoding(&std::fs::read(path)?)
}
