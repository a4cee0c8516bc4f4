//! polardet-core — the geometric, supervision and evaluation core of
//! polar-representation polygon detection.
//!
//! An instance contour is encoded as a starting point plus K radial
//! distances along uniformly spaced rays; the polygon is rebuilt by placing
//! a vertex at each ray-distance endpoint. This crate provides:
//!
//! - analytic polygon geometry (reconstruction, ray-contour intersection,
//!   point-in-polygon, exact polygon IoU) in [`geometry`];
//! - soft-mask rasterization and IoU in [`raster`];
//! - position-aware supervision targets, the distance / rasterized-mask
//!   losses and a finite-difference gradient harness in [`supervision`];
//! - cost-matrix assembly with the inner (start-outside) penalty, Hungarian
//!   matching and one-to-many assignment in [`matching`];
//! - the fan-shaped sampling geometry of polar deformable attention in
//!   [`sampling`];
//! - per-instance polygon approximability scoring in [`approx_score`];
//! - COCO-style annotation ingestion and mask AP evaluation in [`dataset`].
//!
//! Everything is pure CPU code with no learned parameters; rasterized
//! quantities are validated against exact clipping oracles in the test
//! suites.

pub mod approx_score;
pub mod config;
pub mod dataset;
pub mod error;
pub mod geometry;
pub mod matching;
pub mod raster;
pub mod sampling;
pub mod supervision;
pub mod synthetic;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use geometry::{AngleSet, Contour, Point2, Polygon, PolarParams};
pub use raster::{Frame, SoftMask};
pub use supervision::CostWeights;
