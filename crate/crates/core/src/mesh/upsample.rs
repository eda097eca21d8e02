use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{MeshError, TriangleMesh};

/// Fixed sampling seed so that a given mesh always upsamples identically.
const UPSAMPLE_SEED: u64 = 0x5eed_u64;

/// Grows the vertex set to exactly `2^bits` by area-weighted uniform sampling
/// on the faces. Original vertices keep their indices; faces are dropped.
pub fn upsample_mesh(mesh: &TriangleMesh, bits: u32) -> Result<TriangleMesh, MeshError> {
    if bits >= usize::BITS {
        return Err(MeshError::Degenerate(format!("bit depth {bits} is too large")));
    }
    let target = 1usize << bits;
    let current = mesh.vertices().len();
    if target < current {
        return Err(MeshError::BitDepthTooSmall { current, target });
    }
    if target == current {
        return Ok(mesh.clone());
    }

    let verts = mesh.vertices();
    let mut cumulative = Vec::with_capacity(mesh.faces().len());
    let mut total = 0.0;
    for f in mesh.faces() {
        let [a, b, c] = f.map(|i| verts[i as usize]);
        total += (b - a).cross(&(c - a)).norm() / 2.0;
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(MeshError::Degenerate("mesh has no face area to sample from".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(UPSAMPLE_SEED);
    let mut vertices = Vec::with_capacity(target);
    vertices.extend_from_slice(verts);
    while vertices.len() < target {
        let pick = rng.random::<f64>() * total;
        let face = cumulative.partition_point(|&c| c <= pick).min(cumulative.len() - 1);
        let [a, b, c] = mesh.faces()[face].map(|i| verts[i as usize]);
        // Uniform barycentric sample via the square-root warp.
        let r1: f64 = rng.random::<f64>().sqrt();
        let r2: f64 = rng.random();
        let p = a.coords * (1.0 - r1) + b.coords * (r1 * (1.0 - r2)) + c.coords * (r1 * r2);
        vertices.push(Point3::from(p));
    }

    // Every sample is a convex combination of original vertices, so the
    // farthest pair is still a pair of original vertices.
    Ok(TriangleMesh::with_diameter(vertices, Vec::new(), mesh.diameter()))
}
