use kiddo::{ImmutableKdTree, SquaredEuclidean};
use nalgebra::Point3;

use super::BenchError;
use crate::correspondence::{quantized_code, Correspondence, Truth};
use crate::encoding::SurfaceEncoding;
use crate::solver::{Pose, SolveReport};

/// Decoded vertices within this distance of the true vertex count as correct, mm.
pub const PRECISION_RADIUS: f64 = 10.0;
/// Error cap of the area-under-curve summary, mm.
pub const AUC_MAX: f64 = 100.0;

/// Upper bound on the number of model points the pose metrics average over.
pub const METRIC_POINTS: usize = 4096;

/// Model points with a nearest-neighbour index for the symmetric metric.
/// Both metrics average over an evenly strided subset of at most
/// [`METRIC_POINTS`] points; the index covers every point.
pub struct ModelPoints {
    points: Vec<Point3<f64>>,
    tree: ImmutableKdTree<f64, 3>,
}

impl ModelPoints {
    pub fn new(all: Vec<Point3<f64>>) -> Self {
        let raw: Vec<[f64; 3]> = all.iter().map(|p| [p.x, p.y, p.z]).collect();
        let tree = ImmutableKdTree::new_from_slice(&raw).expect("finite model points");
        let stride = all.len().div_ceil(METRIC_POINTS).max(1);
        let points = all.into_iter().step_by(stride).collect();
        ModelPoints { points, tree }
    }

    /// The points the metrics average over.
    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    /// Mean distance between model points under the two poses.
    pub fn add(&self, est: &Pose, gt: &Pose) -> f64 {
        let total: f64 = self
            .points
            .iter()
            .map(|v| (est.transform(v) - gt.transform(v)).norm())
            .sum();
        total / self.points.len() as f64
    }

    /// Mean distance from each estimated model point to the closest
    /// ground-truth model point, searched over the full point set.
    pub fn add_s(&self, est: &Pose, gt: &Pose) -> f64 {
        let back = gt.inverse().compose(est);
        let total: f64 = self
            .points
            .iter()
            .map(|v| {
                let q = back.transform(v);
                self.tree
                    .query(&[q.x, q.y, q.z])
                    .nearest_one::<SquaredEuclidean<f64>>()
                    .execute()
                    .distance
                    .sqrt()
            })
            .sum();
        total / self.points.len() as f64
    }
}

/// An estimate is correct when its error is strictly below a tenth of the
/// object diameter.
pub fn is_success(error: f64, diameter: f64) -> bool {
    error < 0.1 * diameter
}

/// Fraction of errors passing [`is_success`].
pub fn recall(errors: &[f64], diameter: f64) -> f64 {
    if errors.is_empty() {
        return 0.0;
    }
    errors.iter().filter(|&&e| is_success(e, diameter)).count() as f64 / errors.len() as f64
}

/// Area under the accuracy-threshold curve over thresholds in `[0, max]`,
/// normalized to 1. Equals the mean of `max(0, 1 - e / max)`.
pub fn auc(errors: &[f64], max: f64) -> f64 {
    if errors.is_empty() {
        return 0.0;
    }
    errors.iter().map(|&e| (1.0 - e / max).max(0.0)).sum::<f64>() / errors.len() as f64
}

/// For every iteration record, the fraction of that record's active
/// correspondences whose full-depth decoded vertex lies within
/// [`PRECISION_RADIUS`] of the true vertex. Gross outliers never count as
/// correct.
pub fn outlier_precision(
    report: &SolveReport,
    corrs: &[Correspondence],
    enc: &SurfaceEncoding,
) -> Result<Vec<f64>, BenchError> {
    let correct: Vec<bool> = corrs
        .iter()
        .enumerate()
        .map(|(i, c)| match c.truth {
            Some(Truth::Vertex(v)) => {
                let decoded = enc.vertices()[enc.vertex_of_code(quantized_code(&c.code))];
                let truth = enc.vertices().get(v as usize).ok_or(BenchError::MissingTruth(i))?;
                Ok((decoded - truth).norm() <= PRECISION_RADIUS)
            }
            Some(Truth::Outlier) => Ok(false),
            None => Err(BenchError::MissingTruth(i)),
        })
        .collect::<Result<_, _>>()?;
    Ok(report
        .iterations
        .iter()
        .map(|rec| {
            let active = report.active_at(rec.step);
            if active.is_empty() {
                return 0.0;
            }
            active.iter().filter(|&&i| correct[i as usize]).count() as f64 / active.len() as f64
        })
        .collect())
}
