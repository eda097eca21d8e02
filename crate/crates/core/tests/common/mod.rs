//! Oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use hipose::encoding::Prefix;
use hipose::solver::Pose;
use hipose::SurfaceEncoding;
use nalgebra::Point3;

/// Every prefix at every level checked against a recomputation from the
/// raw codes. Returns the number of violations.
pub fn violations(enc: &SurfaceEncoding) -> usize {
    let d = enc.bits();
    let n = enc.len();
    let mut bad = 0;

    let mut seen = vec![false; n];
    for &c in enc.codes() {
        if (c as usize) >= n || std::mem::replace(&mut seen[c as usize], true) {
            bad += 1;
        }
    }
    for v in 0..n {
        if enc.vertex_of_code(enc.code_of(v)) != v {
            bad += 1;
        }
    }

    for k in 0..=d {
        if enc.surfaces_at(k) != 1 << k {
            bad += 1;
        }
        let mut covered = vec![0u32; n];
        for value in 0..(1u32 << k) {
            let bits: Vec<u8> = (0..k).map(|i| ((value >> (k - 1 - i)) & 1) as u8).collect();
            let surface = enc.surface_lookup(Prefix::from_bits(&bits)).unwrap();

            let mut expected: Vec<u32> = (0..n as u32)
                .filter(|&v| k == 0 || enc.code_of(v as usize) >> (d - k) == value)
                .collect();
            expected.sort_unstable();
            if surface.vertex_ids != expected.as_slice() || expected.len() != 1 << (d - k) {
                bad += 1;
            }
            for &v in surface.vertex_ids {
                covered[v as usize] += 1;
            }

            let mean = expected.iter().fold(nalgebra::Vector3::zeros(), |acc, &v| {
                acc + enc.vertices()[v as usize].coords
            }) / expected.len() as f64;
            if (surface.centroid.coords - mean).norm() > 1e-9 * (1.0 + mean.norm()) {
                bad += 1;
            }

            if k < d {
                let c0 = enc
                    .surface_lookup(Prefix::from_bits(&[bits.clone(), vec![0]].concat()))
                    .unwrap();
                let c1 = enc
                    .surface_lookup(Prefix::from_bits(&[bits.clone(), vec![1]].concat()))
                    .unwrap();
                let len = surface.vertex_ids.len();
                if c0.vertex_ids.len() != len / 2 || c1.vertex_ids.len() != len - len / 2 {
                    bad += 1;
                }
                let weighted = (c0.centroid.coords * c0.vertex_ids.len() as f64
                    + c1.centroid.coords * c1.vertex_ids.len() as f64)
                    / len as f64;
                if (weighted - surface.centroid.coords).norm() > 1e-9 * (1.0 + mean.norm()) {
                    bad += 1;
                }
            }
        }
        // prefix partition: every vertex in exactly one surface per level
        bad += covered.iter().filter(|&&c| c != 1).count();
    }
    bad
}

/// Scalar re-derivation of `min_v |R v + t - p|` in a fixed operation order.
pub fn brute_distance(point: &Point3<f64>, surface: &[Point3<f64>], pose: &Pose) -> f64 {
    let r = &pose.rotation;
    let mut best = f64::INFINITY;
    for v in surface {
        let mut sq = 0.0;
        for i in 0..3 {
            let rotated = r[(i, 0)] * v.x + r[(i, 1)] * v.y + r[(i, 2)] * v.z;
            let diff = rotated + pose.translation[i] - point[i];
            sq += diff * diff;
        }
        best = best.min(sq.sqrt());
    }
    best
}
