//! Balanced 2-means bisection used to assign one code bit per level.

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MAX_LLOYD_ITERATIONS: usize = 20;
const RELATIVE_TOLERANCE: f64 = 1e-6;
/// Below this many vertices the recursion stays on the current thread.
const PARALLEL_CUTOFF: usize = 4096;

/// Recursively reorders `ids` so that the position of each vertex id equals
/// its code. `ids` must be sorted ascending on entry.
pub(crate) fn assign_codes(vertices: &[Point3<f64>], ids: &mut [u32], bits: u32, seed: u64) {
    recurse(vertices, ids, 0, 0, bits, seed);
}

fn recurse(vertices: &[Point3<f64>], ids: &mut [u32], level: u32, prefix: u64, bits: u32, seed: u64) {
    if level == bits || ids.len() <= 1 {
        return;
    }
    let lower = split(vertices, ids, node_stream(level, prefix), seed);
    let (left, right) = ids.split_at_mut(lower);
    let go_left = |l: &mut [u32]| recurse(vertices, l, level + 1, prefix << 1, bits, seed);
    let go_right = |r: &mut [u32]| recurse(vertices, r, level + 1, (prefix << 1) | 1, bits, seed);
    if left.len() + right.len() >= PARALLEL_CUTOFF {
        rayon::join(|| go_left(left), || go_right(right));
    } else {
        go_left(left);
        go_right(right);
    }
}

/// Heap-style node index, unique per (level, prefix).
fn node_stream(level: u32, prefix: u64) -> u64 {
    (1u64 << level) | prefix
}

/// Splits `ids` in place into a first half of `floor(L/2)` ids and a second
/// half of the rest, each sorted ascending. Returns the size of the first half.
pub(crate) fn split(vertices: &[Point3<f64>], ids: &mut [u32], stream: u64, seed: u64) -> usize {
    let n = ids.len();
    let lower = n / 2;
    let points: Vec<Vector3<f64>> = ids.iter().map(|&i| vertices[i as usize].coords).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let (mut c0, mut c1) = seed_centers(&points, &mut rng);

    let mean = points.iter().sum::<Vector3<f64>>() / n as f64;
    let spread = (points.iter().map(|p| (p - mean).norm_squared()).sum::<f64>() / n as f64).sqrt();

    if spread > 0.0 {
        for _ in 0..MAX_LLOYD_ITERATIONS {
            let (mut s0, mut s1) = (Vector3::zeros(), Vector3::zeros());
            let (mut n0, mut n1) = (0usize, 0usize);
            for p in &points {
                if (p - c0).norm_squared() <= (p - c1).norm_squared() {
                    s0 += p;
                    n0 += 1;
                } else {
                    s1 += p;
                    n1 += 1;
                }
            }
            let next0 = if n0 > 0 { s0 / n0 as f64 } else { c0 };
            let next1 = if n1 > 0 { s1 / n1 as f64 } else { c1 };
            let moved = (next0 - c0).norm().max((next1 - c1).norm());
            c0 = next0;
            c1 = next1;
            if moved <= RELATIVE_TOLERANCE * spread {
                break;
            }
        }
    }

    // Rebalance: rank by how much closer each vertex is to the first center.
    // The ranking keeps Lloyd's assignment wherever sizes allow and moves the
    // vertices nearest to the opposite center first; ties go by vertex index.
    let mut ranked: Vec<(f64, u32)> = points
        .iter()
        .zip(ids.iter())
        .map(|(p, &id)| ((p - c0).norm_squared() - (p - c1).norm_squared(), id))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let (first, second) = ranked.split_at(lower);
    let mut first: Vec<u32> = first.iter().map(|&(_, id)| id).collect();
    let mut second: Vec<u32> = second.iter().map(|&(_, id)| id).collect();
    first.sort_unstable();
    second.sort_unstable();
    ids[..lower].copy_from_slice(&first);
    ids[lower..].copy_from_slice(&second);
    lower
}

/// k-means++ seeding for two centers.
fn seed_centers(points: &[Vector3<f64>], rng: &mut ChaCha8Rng) -> (Vector3<f64>, Vector3<f64>) {
    let c0 = points[rng.random_range(0..points.len())];
    let weights: Vec<f64> = points.iter().map(|p| (p - c0).norm_squared()).collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return (c0, c0);
    }
    let mut target = rng.random::<f64>() * total;
    for (p, w) in points.iter().zip(&weights) {
        if target < *w {
            return (c0, *p);
        }
        target -= w;
    }
    // Rounding can exhaust the weights; fall back to the farthest point.
    let far = weights
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    (c0, points[far])
}
