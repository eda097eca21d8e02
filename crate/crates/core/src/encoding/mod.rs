//! Hierarchical binary surface encoding.
//!
//! Every vertex of a mesh with `N = 2^d` vertices receives a unique `d`-bit
//! code. Bit 0 is the coarsest split: a `k`-bit prefix names the sub-surface
//! made of all vertices whose code starts with that prefix. Codes are stored
//! as integers with bit 0 in the most significant of the `d` positions, so
//! the prefix of length `k` of `code` is `code >> (d - k)`.
//!
//! Because `N` is a power of two and every split is balanced, each level-`k`
//! sub-surface holds exactly `2^(d-k)` vertices.

mod bisect;
mod format;

use std::fmt;
use std::path::Path;

use nalgebra::{Point3, Vector3};
use thiserror::Error;

use crate::mesh::TriangleMesh;

pub use format::{decode_encoding, encode_encoding, load_encoding, save_encoding, FORMAT_VERSION};

/// Largest supported bit depth (about one million vertices).
pub const MAX_BITS: u32 = 20;

#[derive(Debug, Error)]
pub enum EncodingError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bit depth {0} is outside 1..={MAX_BITS}")]
    InvalidBits(u32),
    #[error("encoding needs exactly {expected} vertices, got {found}")]
    VertexCount { expected: usize, found: usize },
    #[error("prefix of length {len} exceeds bit depth {bits}")]
    PrefixTooLong { len: u32, bits: u32 },
    #[error("not an encoding file (bad magic)")]
    BadMagic,
    #[error("unsupported encoding version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("file is truncated")]
    Truncated,
    #[error("malformed encoding: {0}")]
    Format(String),
}

/// A bit string of length `len` stored right-aligned in `value`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Prefix {
    len: u32,
    value: u32,
}

impl Prefix {
    pub const EMPTY: Prefix = Prefix { len: 0, value: 0 };

    /// Builds a prefix from explicit bits, coarsest first.
    pub fn from_bits(bits: &[u8]) -> Prefix {
        assert!(bits.len() <= 32, "prefix longer than 32 bits");
        let value = bits.iter().fold(0u32, |acc, &b| (acc << 1) | u32::from(b != 0));
        Prefix {
            len: bits.len() as u32,
            value,
        }
    }

    /// The first `len` bits of a `bits`-deep code.
    pub fn of_code(code: u32, bits: u32, len: u32) -> Prefix {
        assert!(len <= bits);
        let value = if len == 0 { 0 } else { code >> (bits - len) };
        Prefix { len, value }
    }

    pub fn len(&self) -> u32 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn value(&self) -> u32 {
        self.value
    }

    /// The prefix extended by one bit.
    pub fn child(&self, bit: u8) -> Prefix {
        Prefix {
            len: self.len + 1,
            value: (self.value << 1) | u32::from(bit != 0),
        }
    }
}

impl fmt::Display for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for k in (0..self.len).rev() {
            write!(f, "{}", (self.value >> k) & 1)?;
        }
        Ok(())
    }
}

/// One entry of a level table.
#[derive(Debug, Clone, Copy)]
pub struct Surface<'a> {
    /// Member vertex ids, ascending.
    pub vertex_ids: &'a [u32],
    /// Arithmetic mean of the member vertices, model frame.
    pub centroid: Point3<f64>,
}

/// Per-vertex codes plus prefix tables for every level `0..=d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceEncoding {
    bits: u32,
    vertices: Vec<Point3<f64>>,
    codes: Vec<u32>,
    by_code: Vec<u32>,
    /// `members[k]` lists vertex ids grouped by `k`-bit prefix, ascending
    /// within each group of `2^(d-k)`.
    members: Vec<Vec<u32>>,
    centroids: Vec<Vec<Point3<f64>>>,
}

/// Builds the encoding of a mesh that already has exactly `2^bits` vertices.
pub fn build_encoding(mesh: &TriangleMesh, bits: u32, seed: u64) -> Result<SurfaceEncoding, EncodingError> {
    SurfaceEncoding::build(mesh.vertices().to_vec(), bits, seed)
}

impl SurfaceEncoding {
    /// Recursive balanced bisection of `vertices`; deterministic for a seed.
    pub fn build(vertices: Vec<Point3<f64>>, bits: u32, seed: u64) -> Result<SurfaceEncoding, EncodingError> {
        check_bits(bits)?;
        let expected = 1usize << bits;
        if vertices.len() != expected {
            return Err(EncodingError::VertexCount {
                expected,
                found: vertices.len(),
            });
        }
        let mut order: Vec<u32> = (0..expected as u32).collect();
        bisect::assign_codes(&vertices, &mut order, bits, seed);
        let mut codes = vec![0u32; expected];
        for (code, &v) in order.iter().enumerate() {
            codes[v as usize] = code as u32;
        }
        Ok(Self::assemble(bits, vertices, codes, order))
    }

    /// Rebuilds the tables from stored codes, checking that they form a bijection.
    pub fn from_parts(
        bits: u32,
        vertices: Vec<Point3<f64>>,
        codes: Vec<u32>,
    ) -> Result<SurfaceEncoding, EncodingError> {
        check_bits(bits)?;
        let expected = 1usize << bits;
        if vertices.len() != expected || codes.len() != expected {
            return Err(EncodingError::VertexCount {
                expected,
                found: vertices.len().min(codes.len()),
            });
        }
        let mut by_code = vec![u32::MAX; expected];
        for (v, &code) in codes.iter().enumerate() {
            let slot = by_code
                .get_mut(code as usize)
                .ok_or_else(|| EncodingError::Format(format!("code {code} exceeds {bits} bits")))?;
            if *slot != u32::MAX {
                return Err(EncodingError::Format(format!(
                    "code {code} assigned to vertices {} and {v}",
                    *slot
                )));
            }
            *slot = v as u32;
        }
        if let Some(v) = vertices.iter().position(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(EncodingError::Format(format!("vertex {v} is not finite")));
        }
        Ok(Self::assemble(bits, vertices, codes, by_code))
    }

    fn assemble(bits: u32, vertices: Vec<Point3<f64>>, codes: Vec<u32>, by_code: Vec<u32>) -> SurfaceEncoding {
        let mut members = Vec::with_capacity(bits as usize + 1);
        let mut centroids = Vec::with_capacity(bits as usize + 1);
        for level in 0..=bits {
            let group = 1usize << (bits - level);
            let mut table = by_code.clone();
            let mut level_centroids = Vec::with_capacity(by_code.len() / group);
            for chunk in table.chunks_mut(group) {
                chunk.sort_unstable();
                let sum = chunk
                    .iter()
                    .fold(Vector3::zeros(), |acc, &v| acc + vertices[v as usize].coords);
                level_centroids.push(Point3::from(sum / group as f64));
            }
            members.push(table);
            centroids.push(level_centroids);
        }
        SurfaceEncoding {
            bits,
            vertices,
            codes,
            by_code,
            members,
            centroids,
        }
    }

    /// Bit depth `d`.
    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Vertex count `N = 2^d`.
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn codes(&self) -> &[u32] {
        &self.codes
    }

    pub fn code_of(&self, vertex: usize) -> u32 {
        self.codes[vertex]
    }

    /// Inverse of [`code_of`](Self::code_of).
    pub fn vertex_of_code(&self, code: u32) -> usize {
        self.by_code[code as usize] as usize
    }

    /// Level-table entry for a prefix.
    pub fn surface_lookup(&self, prefix: Prefix) -> Result<Surface<'_>, EncodingError> {
        if prefix.len() > self.bits {
            return Err(EncodingError::PrefixTooLong {
                len: prefix.len(),
                bits: self.bits,
            });
        }
        Ok(self.surface(prefix.len(), prefix.value()))
    }

    /// Unchecked variant of [`surface_lookup`](Self::surface_lookup) for hot loops.
    pub(crate) fn surface(&self, level: u32, prefix: u32) -> Surface<'_> {
        let group = 1usize << (self.bits - level);
        let start = prefix as usize * group;
        Surface {
            vertex_ids: &self.members[level as usize][start..start + group],
            centroid: self.centroids[level as usize][prefix as usize],
        }
    }

    /// Number of prefixes present at `level` (always `2^level`).
    pub fn surfaces_at(&self, level: u32) -> usize {
        self.centroids[level as usize].len()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), EncodingError> {
        save_encoding(self, path)
    }
}

fn check_bits(bits: u32) -> Result<(), EncodingError> {
    if (1..=MAX_BITS).contains(&bits) {
        Ok(())
    } else {
        Err(EncodingError::InvalidBits(bits))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::TriangleMesh;

    fn cube_encoding(seed: u64) -> SurfaceEncoding {
        let cube = TriangleMesh::cuboid(10.0, 10.0, 10.0).unwrap();
        build_encoding(&cube, 3, seed).unwrap()
    }

    #[test]
    fn two_points_one_bit() {
        let v = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)];
        let enc = SurfaceEncoding::build(v, 1, 0).unwrap();
        let mut codes = enc.codes().to_vec();
        codes.sort_unstable();
        assert_eq!(codes, vec![0, 1]);
        for code in 0..2 {
            let s = enc.surface_lookup(Prefix::of_code(code, 1, 1)).unwrap();
            assert_eq!(s.vertex_ids.len(), 1);
            assert_eq!(s.centroid, enc.vertices()[s.vertex_ids[0] as usize]);
        }
    }

    #[test]
    fn cube_halves_and_prefix_partition() {
        let enc = cube_encoding(0);
        for b in 0..2u8 {
            let s = enc.surface_lookup(Prefix::from_bits(&[b])).unwrap();
            assert_eq!(s.vertex_ids.len(), 4);
        }
        for level in 0..3 {
            for p in 0..(1u32 << level) {
                let parent = enc.surface(level, p);
                let mut union: Vec<u32> = enc.surface(level + 1, p << 1).vertex_ids.to_vec();
                union.extend_from_slice(enc.surface(level + 1, (p << 1) | 1).vertex_ids);
                union.sort_unstable();
                assert_eq!(union, parent.vertex_ids);
            }
        }
        // cube halves are opposite faces: the 4 vertices share one coordinate sign
        let half = enc.surface_lookup(Prefix::from_bits(&[0])).unwrap();
        let pts: Vec<_> = half.vertex_ids.iter().map(|&i| enc.vertices()[i as usize]).collect();
        let shared_axis = (0..3).any(|a| pts.iter().all(|p| p[a].signum() == pts[0][a].signum()));
        assert!(shared_axis);
    }

    #[test]
    fn lookup_edges() {
        let enc = cube_encoding(1);
        let root = enc.surface_lookup(Prefix::EMPTY).unwrap();
        assert_eq!(root.vertex_ids, &[0, 1, 2, 3, 4, 5, 6, 7]);
        assert!(root.centroid.coords.norm() < 1e-12);
        for v in 0..8 {
            let code = enc.code_of(v);
            let s = enc.surface_lookup(Prefix::of_code(code, 3, 3)).unwrap();
            assert_eq!(s.vertex_ids, &[v as u32]);
            assert_eq!(s.centroid, enc.vertices()[v]);
            assert_eq!(enc.vertex_of_code(code), v);
        }
        assert!(matches!(
            enc.surface_lookup(Prefix::from_bits(&[0, 0, 0, 0])),
            Err(EncodingError::PrefixTooLong { len: 4, bits: 3 })
        ));
    }

    #[test]
    fn wrong_vertex_count() {
        let cube = TriangleMesh::cuboid(1.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            build_encoding(&cube, 4, 0),
            Err(EncodingError::VertexCount { expected: 16, found: 8 })
        ));
        assert!(matches!(
            build_encoding(&cube, 0, 0),
            Err(EncodingError::InvalidBits(0))
        ));
    }

    #[test]
    fn from_parts_rejects_duplicate_codes() {
        let enc = cube_encoding(2);
        let mut codes = enc.codes().to_vec();
        codes[1] = codes[0];
        assert!(matches!(
            SurfaceEncoding::from_parts(3, enc.vertices().to_vec(), codes),
            Err(EncodingError::Format(_))
        ));
    }

    #[test]
    fn prefix_display() {
        assert_eq!(Prefix::from_bits(&[1, 0, 1]).to_string(), "101");
        assert_eq!(Prefix::of_code(0b1011, 4, 2).to_string(), "10");
        assert_eq!(Prefix::from_bits(&[1]).child(0), Prefix::from_bits(&[1, 0]));
    }
}
