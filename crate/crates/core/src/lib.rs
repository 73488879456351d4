//! Tropical-cyclone detection and tracking on gridded reanalysis fields.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`data`] stores two-variable (RV850, MSLP) grids, tiles them into 40×40
//!    patches and builds labelled training sets.
//! 2. [`detect`] turns each 6-hourly map into scored storm-center candidates,
//!    either with the two-stage network of [`nn`] or with a physics baseline.
//! 3. [`track`] links candidates into tracks with BYTE association and then
//!    applies the physical post-filters.
//! 4. [`eval`] scores tracks against best-track observations, and [`tune`]
//!    searches tracker configurations on the resulting Pareto frontier.
//!
//! [`synth`] generates closed-loop scenarios with known ground truth, and
//! [`exec`] selects between the rayon-backed and sequential execution paths.

pub mod data;
pub mod detect;
pub mod eval;
pub mod exec;
pub mod formats;
pub mod geo;
pub mod nn;
pub mod synth;
pub mod time;
pub mod track;
pub mod tune;

pub use exec::Exec;
pub use geo::{GeoPoint, GridSpec};
pub use time::Timestamp;
