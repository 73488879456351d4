//! On-disk formats: portable grids, best-track / detection / track CSVs,
//! patch datasets and report tables.

mod csvs;
mod dataset;
mod grid;
mod report;

pub use csvs::{
    read_best_track, read_detections, read_tracks, write_best_track, write_detections, write_track_summary,
    write_tracks,
};
pub use dataset::{read_dataset, write_dataset};
pub use grid::{read_grid, read_land_mask, read_series, write_grid, write_land_mask, write_series, GridFile};
pub use report::{read_tuning_candidates, write_metrics_report, write_overlays, write_tuning_report};

use std::path::PathBuf;

use thiserror::Error;

use crate::data::DataError;
use crate::geo::GeoError;
use crate::time::TimeError;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Time(#[from] TimeError),
}

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> FormatError + '_ {
    move |source| FormatError::Io { path: path.to_path_buf(), source }
}

pub(crate) fn parse_err(path: &std::path::Path, msg: impl Into<String>) -> FormatError {
    FormatError::Parse { path: path.to_path_buf(), msg: msg.into() }
}

/// Fixed-point rendering used by every CSV writer.
pub(crate) fn fx(v: f64) -> String {
    let s = format!("{v:.6}");
    // Avoid "-0.000000" so that output does not depend on the sign of zero.
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}
