//! Object model meshes: loading, validation and surface upsampling.
//!
//! All coordinates are millimeters. Only vertices are consumed downstream;
//! faces are kept for area-weighted sampling and dropped after upsampling.

mod obj;
mod ply;
mod upsample;

use std::path::Path;

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;
use thiserror::Error;

pub use obj::parse_obj;
pub use ply::parse_ply;
pub use upsample::upsample_mesh;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("failed to read mesh file: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported mesh format: {0}")]
    Unsupported(String),
    #[error("face {face} references vertex {index} but the mesh has {count} vertices")]
    FaceIndexOutOfRange { face: usize, index: i64, count: usize },
    #[error("vertex {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("degenerate mesh: {0}")]
    Degenerate(String),
    #[error("cannot upsample {current} vertices to {target}: target is smaller than the mesh")]
    BitDepthTooSmall { current: usize, target: usize },
}

impl MeshError {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        MeshError::Parse {
            line,
            message: message.into(),
        }
    }
}

/// Triangle mesh of an object model with its cached diameter.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3<f64>>,
    faces: Vec<[u32; 3]>,
    diameter: f64,
}

impl TriangleMesh {
    /// Validates the geometry and caches the diameter.
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[u32; 3]>) -> Result<Self, MeshError> {
        validate(&vertices, &faces)?;
        let diameter = max_pairwise_distance(&vertices);
        if !(diameter > 0.0) {
            return Err(MeshError::Degenerate("zero diameter".into()));
        }
        Ok(TriangleMesh {
            vertices,
            faces,
            diameter,
        })
    }

    /// Builds a mesh whose diameter is already known, skipping the quadratic scan.
    pub(crate) fn with_diameter(vertices: Vec<Point3<f64>>, faces: Vec<[u32; 3]>, diameter: f64) -> Self {
        TriangleMesh {
            vertices,
            faces,
            diameter,
        }
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    /// Maximum pairwise vertex distance.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn into_vertices(self) -> Vec<Point3<f64>> {
        self.vertices
    }

    /// Axis-aligned box centered on the origin with the given side lengths.
    pub fn cuboid(sx: f64, sy: f64, sz: f64) -> Result<Self, MeshError> {
        let (hx, hy, hz) = (sx / 2.0, sy / 2.0, sz / 2.0);
        let mut vertices = Vec::with_capacity(8);
        for i in 0..8u32 {
            vertices.push(Point3::new(
                if i & 1 == 0 { -hx } else { hx },
                if i & 2 == 0 { -hy } else { hy },
                if i & 4 == 0 { -hz } else { hz },
            ));
        }
        let faces = vec![
            [0, 2, 1],
            [1, 2, 3],
            [4, 5, 6],
            [5, 7, 6],
            [0, 1, 4],
            [1, 5, 4],
            [2, 6, 3],
            [3, 6, 7],
            [0, 4, 2],
            [2, 4, 6],
            [1, 3, 5],
            [3, 7, 5],
        ];
        TriangleMesh::new(vertices, faces)
    }

    /// Latitude/longitude sphere. `rings` >= 2, `segments` >= 3.
    pub fn uv_sphere(radius: f64, rings: u32, segments: u32) -> Result<Self, MeshError> {
        if rings < 2 || segments < 3 {
            return Err(MeshError::Degenerate(
                "sphere needs at least 2 rings and 3 segments".into(),
            ));
        }
        let mut vertices = vec![Point3::new(0.0, 0.0, radius)];
        for r in 1..rings {
            let theta = std::f64::consts::PI * r as f64 / rings as f64;
            for s in 0..segments {
                let phi = 2.0 * std::f64::consts::PI * s as f64 / segments as f64;
                vertices.push(Point3::new(
                    radius * theta.sin() * phi.cos(),
                    radius * theta.sin() * phi.sin(),
                    radius * theta.cos(),
                ));
            }
        }
        let south = vertices.len() as u32;
        vertices.push(Point3::new(0.0, 0.0, -radius));

        let ring_start = |r: u32| 1 + (r - 1) * segments;
        let mut faces = Vec::new();
        for s in 0..segments {
            let next = (s + 1) % segments;
            faces.push([0, ring_start(1) + s, ring_start(1) + next]);
            faces.push([south, ring_start(rings - 1) + next, ring_start(rings - 1) + s]);
        }
        for r in 1..rings - 1 {
            for s in 0..segments {
                let next = (s + 1) % segments;
                let (a, b) = (ring_start(r) + s, ring_start(r) + next);
                let (c, d) = (ring_start(r + 1) + s, ring_start(r + 1) + next);
                faces.push([a, c, b]);
                faces.push([b, c, d]);
            }
        }
        TriangleMesh::new(vertices, faces)
    }
}

/// Loads an ASCII PLY or OBJ mesh, chosen by file extension.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh, MeshError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("ply") => parse_ply(&text),
        Some("obj") => parse_obj(&text),
        other => Err(MeshError::Unsupported(format!(
            "extension {:?} (expected .ply or .obj)",
            other.unwrap_or("")
        ))),
    }
}

fn validate(vertices: &[Point3<f64>], faces: &[[u32; 3]]) -> Result<(), MeshError> {
    if let Some(i) = vertices.iter().position(|v| !v.coords.iter().all(|c| c.is_finite())) {
        return Err(MeshError::NonFinite(i));
    }
    for (f, face) in faces.iter().enumerate() {
        if let Some(&idx) = face.iter().find(|&&i| i as usize >= vertices.len()) {
            return Err(MeshError::FaceIndexOutOfRange {
                face: f,
                index: idx as i64,
                count: vertices.len(),
            });
        }
    }
    if vertices.len() < 4 {
        return Err(MeshError::Degenerate(format!(
            "{} vertices, need at least 4",
            vertices.len()
        )));
    }
    if !spans_volume(vertices) {
        return Err(MeshError::Degenerate("all vertices are coplanar".into()));
    }
    Ok(())
}

/// Greedy extreme-point tetrahedron test for four non-coplanar vertices.
fn spans_volume(vertices: &[Point3<f64>]) -> bool {
    let p0 = vertices[0];
    let far = |score: &dyn Fn(&Point3<f64>) -> f64| {
        vertices
            .iter()
            .map(|v| (score(v), v))
            .fold((0.0, &p0), |acc, x| if x.0 > acc.0 { x } else { acc })
    };
    let (d1, p1) = far(&|v| (v - p0).norm());
    if d1 == 0.0 {
        return false;
    }
    let axis = (p1 - p0) / d1;
    let (d2, p2) = far(&|v| (v - p0).cross(&axis).norm());
    if d2 <= 1e-12 * d1 {
        return false;
    }
    let normal = axis.cross(&(p2 - p0)).normalize();
    let (d3, _) = far(&|v| (v - p0).dot(&normal).abs());
    d3 > 1e-12 * d1
}

/// Exact diameter. Vertices are visited by decreasing distance from the
/// centroid so that the triangle-inequality bound `r_i + r_j` can cut the scan.
pub fn max_pairwise_distance(vertices: &[Point3<f64>]) -> f64 {
    if vertices.len() < 2 {
        return 0.0;
    }
    let centroid = vertices.iter().fold(Vector3::zeros(), |acc, v| acc + v.coords) / vertices.len() as f64;
    let mut by_radius: Vec<(f64, Point3<f64>)> = vertices.iter().map(|v| ((v.coords - centroid).norm(), *v)).collect();
    by_radius.sort_by(|a, b| b.0.total_cmp(&a.0));

    // A cheap lower bound from the farthest point seeds the pruning.
    let seed = by_radius[0].1;
    let lower = by_radius
        .iter()
        .map(|(_, v)| (v - seed).norm_squared())
        .fold(0.0, f64::max);

    let best_sq = by_radius
        .par_iter()
        .enumerate()
        .map(|(i, (ri, vi))| {
            let mut best = lower;
            for (rj, vj) in &by_radius[i + 1..] {
                let bound = ri + rj;
                if bound * bound < best {
                    break;
                }
                best = best.max((vi - vj).norm_squared());
            }
            best
        })
        .reduce(|| lower, f64::max);
    best_sq.sqrt()
}
