use nalgebra::Point3;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_code_lengths, kabsch, IterationRecord, Pose, SolveError, SolveReport, Stage};
use crate::correspondence::{quantized_code, Correspondence};
use crate::encoding::SurfaceEncoding;

/// Model points and the camera points paired with them.
type Pairs = (Vec<Point3<f64>>, Vec<Point3<f64>>);

/// Full-depth decode: each point paired with the vertex of its quantized code.
fn decode_pairs(enc: &SurfaceEncoding, corrs: &[Correspondence]) -> Result<Pairs, SolveError> {
    check_code_lengths(enc, corrs)?;
    Ok(corrs
        .iter()
        .map(|c| (enc.vertices()[enc.vertex_of_code(quantized_code(&c.code))], c.point))
        .unzip())
}

/// One Kabsch solve over every fully decoded correspondence.
pub fn plain_kabsch_solve(enc: &SurfaceEncoding, corrs: &[Correspondence]) -> Result<Pose, SolveError> {
    let (model, camera) = decode_pairs(enc, corrs)?;
    kabsch(&model, &camera, None)
}

pub fn plain_kabsch_report(enc: &SurfaceEncoding, corrs: &[Correspondence]) -> Result<SolveReport, SolveError> {
    let pose = plain_kabsch_solve(enc, corrs)?;
    Ok(single_step_report(
        "plain",
        pose,
        (0..corrs.len() as u32).collect(),
        corrs.len(),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RansacParams {
    /// Correspondences per hypothesis.
    pub sample_size: usize,
    pub iterations: usize,
    /// Inlier distance between posed model point and observed point, mm.
    pub inlier_distance: f64,
    pub min_inliers: usize,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        RansacParams {
            sample_size: 10,
            iterations: 1000,
            inlier_distance: 20.0,
            min_inliers: 4,
            seed: 0,
        }
    }
}

/// Hypothesize-and-verify over full-depth correspondences, then a refit on
/// the best hypothesis' inliers.
pub fn ransac_kabsch_solve(
    enc: &SurfaceEncoding,
    corrs: &[Correspondence],
    params: &RansacParams,
) -> Result<Pose, SolveError> {
    ransac_kabsch_report(enc, corrs, params).map(|r| r.pose)
}

pub fn ransac_kabsch_report(
    enc: &SurfaceEncoding,
    corrs: &[Correspondence],
    params: &RansacParams,
) -> Result<SolveReport, SolveError> {
    if params.sample_size < 3 {
        return Err(SolveError::InvalidConfig(format!(
            "sample size {} < 3",
            params.sample_size
        )));
    }
    let (model, camera) = decode_pairs(enc, corrs)?;
    let n = model.len();
    if n < params.sample_size {
        return Err(SolveError::TooFewCorrespondences {
            found: n,
            required: params.sample_size,
        });
    }

    let max_sq = params.inlier_distance * params.inlier_distance;
    let count_inliers = |pose: &Pose| {
        model
            .iter()
            .zip(&camera)
            .filter(|(m, c)| (pose.transform(m) - *c).norm_squared() <= max_sq)
            .count()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<(usize, Pose)> = None;
    let mut sample_model = Vec::with_capacity(params.sample_size);
    let mut sample_camera = Vec::with_capacity(params.sample_size);
    for _ in 0..params.iterations {
        sample_model.clear();
        sample_camera.clear();
        for i in index::sample(&mut rng, n, params.sample_size) {
            sample_model.push(model[i]);
            sample_camera.push(camera[i]);
        }
        let Ok(pose) = kabsch(&sample_model, &sample_camera, None) else {
            continue;
        };
        let count = count_inliers(&pose);
        if best.as_ref().is_none_or(|(b, _)| count > *b) {
            best = Some((count, pose));
        }
    }

    let (best_count, hypothesis) = best.unwrap_or((0, Pose::identity()));
    let required = params.min_inliers.max(3);
    if best_count < required {
        return Err(SolveError::NoConsensus {
            best: best_count,
            required,
        });
    }
    let inliers: Vec<u32> = (0..n)
        .filter(|&i| (hypothesis.transform(&model[i]) - camera[i]).norm_squared() <= max_sq)
        .map(|i| i as u32)
        .collect();
    let refit_model: Vec<_> = inliers.iter().map(|&i| model[i as usize]).collect();
    let refit_camera: Vec<_> = inliers.iter().map(|&i| camera[i as usize]).collect();
    let pose = kabsch(&refit_model, &refit_camera, None).unwrap_or(hypothesis);
    Ok(single_step_report("ransac", pose, inliers, n))
}

fn single_step_report(solver: &str, pose: Pose, inliers: Vec<u32>, total: usize) -> SolveReport {
    let mut outlier_step = vec![Some(0); total];
    for &i in &inliers {
        outlier_step[i as usize] = None;
    }
    SolveReport {
        solver: solver.into(),
        pose,
        iterations: vec![IterationRecord {
            step: 0,
            stage: Stage::Final,
            inliers: inliers.len(),
            median_distance: None,
            threshold: None,
            distances: None,
            pose,
        }],
        inliers,
        outlier_step,
    }
}
