//! Perspective ↔ equirectangular projection toolkit.
//!
//! A perspective image is placed as the tangent plane of the unit sphere at a chosen
//! tangent point, mapped onto the sphere by inverse gnomonic projection and written
//! into an equirectangular raster. The crate also extracts tangent-plane views back
//! out of equirectangular images, builds φ-sweep segmentation datasets, and scores
//! segmentation output with per-class and mean IoU.
//!
//! Modules:
//! - [`geom`]: sphere ↔ pixel mapping, tangent grids, gnomonic projection.
//! - [`warp`]: dense resampling (project, extract, resize, crop).
//! - [`dataset`]: batch φ-sweep and test-set construction with a JSON-lines manifest.
//! - [`eval`]: confusion matrices, IoU reports and result tables.

pub mod angle;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod geom;
pub mod par;
pub mod raster;
pub mod warp;

pub use angle::Angle;
pub use error::{Error, Result};
pub use geom::{EquirectSpec, PixelCoord, PlanePoint, SphereCoord, TangentGridSpec};
pub use raster::{LabelMap, RasterImage, ValidMask, IGNORE_ID};
pub use warp::{Interp, ProjectionJob, ProjectionPlan, WarpMode};
