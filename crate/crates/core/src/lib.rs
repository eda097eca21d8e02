//! Hierarchical binary surface encoding and a RANSAC-free, render-free
//! coarse-to-fine 6DoF pose solver for dense 3D-3D correspondences.
//!
//! - [`mesh`]: object model loading (ASCII PLY / OBJ) and upsampling to `2^d` vertices.
//! - [`encoding`]: balanced recursive bisection into per-vertex binary codes,
//!   prefix lookups and the `.hsenc` file format.
//! - [`correspondence`]: soft code predictions, bit confidences and trust bits.
//! - [`solver`]: Kabsch alignment, the hierarchical pruning solver and baselines.
//! - [`bench`]: synthetic corruption scenarios, ADD(-S) metrics and benchmark runs.
//! - [`cli`]: the `hipose` command-line front end.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod cli;
pub mod correspondence;
pub mod encoding;
pub mod mesh;
pub mod solver;

pub use correspondence::{Correspondence, SoftCode, Truth};
pub use encoding::{build_encoding, Prefix, SurfaceEncoding};
pub use mesh::{load_mesh, upsample_mesh, TriangleMesh};
pub use solver::{hierarchical_solve, kabsch, Pose, SolveReport, SolverConfig};
