//! Rigid pose estimation from point-to-surface correspondences.
//!
//! [`hierarchical_solve`] is the coarse-to-fine pruning solver. The plain and
//! RANSAC solvers decode every soft code to its full-depth vertex and serve
//! as baselines.

mod baseline;
mod hierarchical;
mod kabsch;
mod pose;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use baseline::{plain_kabsch_report, plain_kabsch_solve, ransac_kabsch_report, ransac_kabsch_solve, RansacParams};
pub use hierarchical::hierarchical_solve;
pub use kabsch::{alignment_cost, kabsch};
pub use pose::Pose;

use crate::correspondence::Correspondence;
use crate::encoding::SurfaceEncoding;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("{found} correspondences, at least {required} required")]
    TooFewCorrespondences { found: usize, required: usize },
    #[error("inliers collapsed to {remaining} (< {required}) at iteration {iteration}")]
    InlierCollapse {
        iteration: usize,
        remaining: usize,
        required: usize,
    },
    #[error("soft code has {found} bits but the encoding has {expected}")]
    CodeLength { expected: u32, found: usize },
    #[error("no RANSAC hypothesis reached {required} inliers (best {best})")]
    NoConsensus { best: usize, required: usize },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

/// How the pruning threshold is centered on the per-iteration distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InlierRule {
    #[default]
    Median,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Coarsest level any point starts matching at.
    pub m_default: u32,
    /// A bit is trusted when its confidence is at least `0.5 + trust_margin`.
    pub trust_margin: f64,
    pub inlier_rule: InlierRule,
    /// Outlier iff `l > inlier_multiplier * center(l)`.
    pub inlier_multiplier: f64,
    pub min_inliers: usize,
    /// Keep every per-iteration distance vector in the report.
    pub record_distances: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            m_default: 10,
            trust_margin: 0.02,
            inlier_rule: InlierRule::Median,
            inlier_multiplier: 3.0,
            min_inliers: 4,
            record_distances: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, bits: u32) -> Result<(), SolveError> {
        let bad = |m: String| Err(SolveError::InvalidConfig(m));
        if self.m_default < 1 || self.m_default > bits {
            return bad(format!("m_default {} outside 1..={bits}", self.m_default));
        }
        if !(self.trust_margin > 0.0 && self.trust_margin < 0.5) {
            return bad(format!("trust_margin {} outside (0, 0.5)", self.trust_margin));
        }
        if !(self.inlier_multiplier >= 1.0) || !self.inlier_multiplier.is_finite() {
            return bad(format!("inlier_multiplier {} < 1", self.inlier_multiplier));
        }
        if self.min_inliers < 3 {
            return bad(format!("min_inliers {} < 3", self.min_inliers));
        }
        Ok(())
    }
}

/// Which stage produced an iteration record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Initial,
    Prune,
    Final,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub step: usize,
    pub stage: Stage,
    /// Correspondences used by this record's Kabsch solve.
    pub inliers: usize,
    /// Median of the distances evaluated in this step (prune steps only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub median_distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub threshold: Option<f64>,
    /// Distances of the previously active points, in index order.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub distances: Option<Vec<f64>>,
    pub pose: Pose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub solver: String,
    pub pose: Pose,
    pub iterations: Vec<IterationRecord>,
    /// Indices of correspondences used by the final solve.
    pub inliers: Vec<u32>,
    /// For each correspondence, the step at which it was flagged an outlier.
    /// A point is part of the solve at step `s` iff this is `None` or `> s`.
    pub outlier_step: Vec<Option<u32>>,
}

impl SolveReport {
    /// Indices active in the solve of record `step`.
    pub fn active_at(&self, step: usize) -> Vec<u32> {
        self.outlier_step
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_none_or(|s| s as usize > step))
            .map(|(i, _)| i as u32)
            .collect()
    }
}

/// Minimum distance between `point` and the posed surface vertices:
/// `min_v |R v + t - P|`. Returns infinity for an empty surface.
pub fn point_surface_distance<'a, I>(point: &Point3<f64>, surface: I, pose: &Pose) -> f64
where
    I: IntoIterator<Item = &'a Point3<f64>>,
{
    surface
        .into_iter()
        .map(|v| (pose.rotation * v.coords + pose.translation - point.coords).norm())
        .fold(f64::INFINITY, f64::min)
}

/// Every soft code must be exactly `enc.bits()` long.
pub(crate) fn check_code_lengths(enc: &SurfaceEncoding, corrs: &[Correspondence]) -> Result<(), SolveError> {
    match corrs.iter().find(|c| c.code.len() != enc.bits() as usize) {
        Some(c) => Err(SolveError::CodeLength {
            expected: enc.bits(),
            found: c.code.len(),
        }),
        None => Ok(()),
    }
}
