//! Coarse-to-fine correspondence pruning.
//!
//! Each point starts matched to the sub-surface named by the first
//! `max(j, m_default)` bits of its quantized code (`j` is its trust bit).
//! The first solve pairs every point with its sub-surface centroid. Then,
//! for `n = d - m_default` iterations:
//!
//! 1. measure each active point's distance to its current sub-surface posed
//!    by the latest estimate,
//! 2. drop points whose distance exceeds `beta * center(distances)`,
//! 3. move every surviving point one level finer, except points whose trust
//!    bit still exceeds the current level,
//! 4. re-solve over the survivors' centroids.
//!
//! After the loop every surface is a single vertex; a final solve runs over
//! all correspondences that were never flagged.

use nalgebra::Point3;
use rayon::prelude::*;

use super::{
    check_code_lengths, kabsch, point_surface_distance, InlierRule, IterationRecord, Pose, SolveError, SolveReport,
    SolverConfig, Stage,
};
use crate::correspondence::{confidence, initial_bit, quantized_code, trust_bit, Correspondence};
use crate::encoding::SurfaceEncoding;

/// Absolute slack on the pruning threshold so that exact data (all
/// distances at rounding level) is not pruned by noise in the last ulp.
const DISTANCE_SLACK: f64 = 1e-9;

struct Decoded {
    code: u32,
    start_level: u32,
}

pub fn hierarchical_solve(
    enc: &SurfaceEncoding,
    corrs: &[Correspondence],
    cfg: &SolverConfig,
) -> Result<SolveReport, SolveError> {
    let bits = enc.bits();
    cfg.validate(bits)?;
    check_code_lengths(enc, corrs)?;
    if corrs.len() < cfg.min_inliers {
        return Err(SolveError::TooFewCorrespondences {
            found: corrs.len(),
            required: cfg.min_inliers,
        });
    }

    let decoded: Vec<Decoded> = corrs
        .iter()
        .map(|c| {
            let j = trust_bit(&confidence(&c.code), cfg.trust_margin);
            Decoded {
                code: quantized_code(&c.code),
                start_level: initial_bit(j, cfg.m_default, bits),
            }
        })
        .collect();

    // Level of point `i` after `descents` completed partition steps.
    let level = |d: &Decoded, descents: u32| d.start_level.max(cfg.m_default + descents).min(bits);

    let centroid_solve = |active: &[usize], descents: u32| -> Result<Pose, SolveError> {
        let (model, camera): (Vec<Point3<f64>>, Vec<Point3<f64>>) = active
            .iter()
            .map(|&i| {
                let k = level(&decoded[i], descents);
                let prefix = prefix_of(decoded[i].code, bits, k);
                (enc.surface(k, prefix).centroid, corrs[i].point)
            })
            .unzip();
        kabsch(&model, &camera, None)
    };

    let mut active: Vec<usize> = (0..corrs.len()).collect();
    let mut outlier_step: Vec<Option<u32>> = vec![None; corrs.len()];
    let mut pose = centroid_solve(&active, 0)?;
    let mut records = vec![IterationRecord {
        step: 0,
        stage: Stage::Initial,
        inliers: active.len(),
        median_distance: None,
        threshold: None,
        distances: None,
        pose,
    }];

    let iterations = bits - cfg.m_default;
    for it in 0..iterations {
        let step = it as usize + 1;
        let distances: Vec<f64> = active
            .par_iter()
            .map(|&i| {
                let k = level(&decoded[i], it);
                let surface = enc.surface(k, prefix_of(decoded[i].code, bits, k));
                let vertices = enc.vertices();
                point_surface_distance(
                    &corrs[i].point,
                    surface.vertex_ids.iter().map(|&v| &vertices[v as usize]),
                    &pose,
                )
            })
            .collect();

        let median = median(&distances);
        let center = match cfg.inlier_rule {
            InlierRule::Median => median,
            InlierRule::Mean => distances.iter().sum::<f64>() / distances.len() as f64,
        };
        let threshold = cfg.inlier_multiplier * center + DISTANCE_SLACK;

        let mut kept = Vec::with_capacity(active.len());
        for (&i, &l) in active.iter().zip(&distances) {
            if l > threshold {
                outlier_step[i] = Some(step as u32);
            } else {
                kept.push(i);
            }
        }
        if kept.len() < cfg.min_inliers {
            return Err(SolveError::InlierCollapse {
                iteration: step,
                remaining: kept.len(),
                required: cfg.min_inliers,
            });
        }
        active = kept;
        pose = centroid_solve(&active, it + 1)?;
        records.push(IterationRecord {
            step,
            stage: Stage::Prune,
            inliers: active.len(),
            median_distance: Some(median),
            threshold: Some(threshold),
            distances: cfg.record_distances.then_some(distances),
            pose,
        });
    }

    // Point-to-point over the never-flagged set.
    let (model, camera): (Vec<Point3<f64>>, Vec<Point3<f64>>) = active
        .iter()
        .map(|&i| (enc.vertices()[enc.vertex_of_code(decoded[i].code)], corrs[i].point))
        .unzip();
    let final_pose = kabsch(&model, &camera, None)?;
    records.push(IterationRecord {
        step: iterations as usize + 1,
        stage: Stage::Final,
        inliers: active.len(),
        median_distance: None,
        threshold: None,
        distances: None,
        pose: final_pose,
    });

    Ok(SolveReport {
        solver: "hierarchical".into(),
        pose: final_pose,
        iterations: records,
        inliers: active.iter().map(|&i| i as u32).collect(),
        outlier_step,
    })
}

fn prefix_of(code: u32, bits: u32, level: u32) -> u32 {
    if level == 0 {
        0
    } else {
        code >> (bits - level)
    }
}

/// Median with the mean of the two middle values for even lengths.
fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}
