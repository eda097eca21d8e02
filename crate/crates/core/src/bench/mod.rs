//! Synthetic benchmark: corrupted correspondence scenes, pose metrics and
//! multi-seed solver comparisons.

pub mod metrics;
mod run;
mod scenario;

use thiserror::Error;

pub use metrics::{auc, is_success, outlier_precision, recall, ModelPoints, AUC_MAX, PRECISION_RADIUS};
pub use run::{
    run_benchmark, summarize, write_precision_csv, write_rows_csv, write_sweep_csv, BenchFile, BenchPlan, BenchRow,
    Preset, ScenarioVariant, SolverEntry, SolverKind, SolverName, SolverSpec, SolverSummary, BETA_SWEEP, FIG4_LEVELS,
};
pub use scenario::{
    generate_scenario, load_ground_truth, load_scenario, save_scenario, GroundTruth, Scenario, ScenarioConfig,
};

use crate::correspondence::CorrespondenceError;
use crate::encoding::{EncodingError, SurfaceEncoding};
use crate::mesh::{max_pairwise_distance, upsample_mesh, MeshError, TriangleMesh};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    Correspondence(#[from] CorrespondenceError),
    #[error("invalid benchmark configuration: {0}")]
    Config(String),
    #[error("correspondence {0} has no usable ground-truth label")]
    MissingTruth(usize),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    TomlRead(#[from] toml::de::Error),
    #[error(transparent)]
    TomlWrite(#[from] toml::ser::Error),
}

/// Encoded object together with the data the metrics need.
pub struct BenchObject {
    pub encoding: SurfaceEncoding,
    pub diameter: f64,
    pub model: ModelPoints,
}

impl BenchObject {
    pub fn new(encoding: SurfaceEncoding, diameter: f64) -> Self {
        let model = ModelPoints::new(encoding.vertices().to_vec());
        BenchObject {
            encoding,
            diameter,
            model,
        }
    }

    /// Upsamples `mesh` to `2^bits` vertices and encodes it.
    pub fn from_mesh(mesh: &TriangleMesh, bits: u32, seed: u64) -> Result<Self, BenchError> {
        let up = upsample_mesh(mesh, bits)?;
        let diameter = up.diameter();
        let encoding = SurfaceEncoding::build(up.into_vertices(), bits, seed)?;
        Ok(BenchObject::new(encoding, diameter))
    }

    /// Diameter measured on the encoded vertices.
    pub fn from_encoding(encoding: SurfaceEncoding) -> Self {
        let diameter = max_pairwise_distance(encoding.vertices());
        BenchObject::new(encoding, diameter)
    }

    /// The default benchmark object: a 120 x 80 x 50 mm box at 16 bits.
    pub fn default_object() -> Result<Self, BenchError> {
        BenchObject::from_mesh(&TriangleMesh::cuboid(120.0, 80.0, 50.0)?, 16, 0)
    }
}
