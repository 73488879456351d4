//! Gridded fields, best-track records and training-set construction.

mod besttrack;
mod patch;
mod split;

pub use besttrack::{observed_tracks, Basin, BestTrackPoint, Nature, TrackType};
pub use patch::{
    assemble_dataset, augment, label_patches, patchify, reassemble, select_training_patches,
    Augmentation, LabeledMap, PatchKind, PatchSample, PATCH, PATCH_PIXELS,
};
pub use split::{split_dataset, DatasetSplit, SplitName};

use crate::geo::{GeoError, GridSpec};
use crate::time::{self, TimeError, Timestamp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Variable order of every two-channel grid.
pub const VARS: [&str; 2] = ["rv850", "mslp"];
pub const RV850: usize = 0;
pub const MSLP: usize = 1;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("map {rows}x{cols} cannot be tiled into {PATCH}x{PATCH} patches")]
    DimensionMismatch { rows: usize, cols: usize },
    #[error("augmentation requires a positive sample")]
    NegativeSample,
    #[error("timestamps must be strictly increasing ({0})")]
    NonIncreasing(String),
    #[error("expected variables {expected:?}, got {got:?}")]
    Variables { expected: Vec<String>, got: Vec<String> },
    #[error("frame shape {got} does not match grid {expected}")]
    Shape { expected: String, got: String },
    #[error("invalid record: {0}")]
    Record(String),
    #[error(transparent)]
    Time(#[from] TimeError),
    #[error(transparent)]
    Geo(#[from] GeoError),
}

/// One timestep of an `nvars × rows × cols` field, variable-major then
/// row-major from the north-west corner.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub nvars: usize,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl Frame {
    pub fn zeros(nvars: usize, rows: usize, cols: usize) -> Self {
        Self { nvars, rows, cols, data: vec![0.0; nvars * rows * cols] }
    }

    pub fn from_vec(nvars: usize, rows: usize, cols: usize, data: Vec<f32>) -> Result<Self, DataError> {
        if data.len() != nvars * rows * cols {
            return Err(DataError::Shape {
                expected: format!("{nvars}x{rows}x{cols}"),
                got: format!("{} values", data.len()),
            });
        }
        Ok(Self { nvars, rows, cols, data })
    }

    #[inline]
    pub fn idx(&self, var: usize, row: usize, col: usize) -> usize {
        (var * self.rows + row) * self.cols + col
    }

    #[inline]
    pub fn get(&self, var: usize, row: usize, col: usize) -> f32 {
        self.data[self.idx(var, row, col)]
    }

    #[inline]
    pub fn set(&mut self, var: usize, row: usize, col: usize, v: f32) {
        let i = self.idx(var, row, col);
        self.data[i] = v;
    }

    pub fn plane(&self, var: usize) -> &[f32] {
        let n = self.rows * self.cols;
        &self.data[var * n..(var + 1) * n]
    }
}

/// Time-ordered stack of (RV850, MSLP) grids.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSeries {
    pub spec: GridSpec,
    pub timestamps: Vec<Timestamp>,
    pub frames: Vec<Frame>,
}

impl GridSeries {
    pub fn new(spec: GridSpec, timestamps: Vec<Timestamp>, frames: Vec<Frame>) -> Result<Self, DataError> {
        let s = Self { spec, timestamps, frames };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        self.spec.validate()?;
        if self.timestamps.len() != self.frames.len() {
            return Err(DataError::Shape {
                expected: format!("{} frames", self.timestamps.len()),
                got: format!("{} frames", self.frames.len()),
            });
        }
        for w in self.timestamps.windows(2) {
            if w[1] <= w[0] {
                return Err(DataError::NonIncreasing(time::format_iso(&w[1])));
            }
        }
        for t in &self.timestamps {
            time::check_synoptic(t)?;
        }
        for f in &self.frames {
            if f.nvars != VARS.len() || f.rows != self.spec.rows || f.cols != self.spec.cols {
                return Err(DataError::Shape {
                    expected: format!("{}x{}x{}", VARS.len(), self.spec.rows, self.spec.cols),
                    got: format!("{}x{}x{}", f.nvars, f.rows, f.cols),
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Per-variable standardization constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: [f64; 2],
    pub std: [f64; 2],
}

impl Default for NormStats {
    fn default() -> Self {
        Self { mean: [0.0; 2], std: [1.0; 2] }
    }
}

impl NormStats {
    /// Mean and population standard deviation of each channel over all
    /// pixels of the given patches. Zero spread maps to std 1.
    pub fn fit<'a, I: IntoIterator<Item = &'a PatchSample>>(samples: I) -> Self {
        let mut sum = [0.0f64; 2];
        let mut sq = [0.0f64; 2];
        let mut n = 0usize;
        let samples: Vec<&PatchSample> = samples.into_iter().collect();
        for s in &samples {
            for v in 0..2 {
                for &x in s.channel(v) {
                    sum[v] += x as f64;
                }
            }
            n += PATCH * PATCH;
        }
        if n == 0 {
            return Self::default();
        }
        let mean = [sum[0] / n as f64, sum[1] / n as f64];
        for s in &samples {
            for v in 0..2 {
                for &x in s.channel(v) {
                    sq[v] += (x as f64 - mean[v]).powi(2);
                }
            }
        }
        let std = [0, 1].map(|v| {
            let sd = (sq[v] / n as f64).sqrt();
            if sd > 0.0 && sd.is_finite() {
                sd
            } else {
                1.0
            }
        });
        Self { mean, std }
    }

    /// Standardized copy of a `2 × 40 × 40` pixel block.
    pub fn apply(&self, pixels: &[f32]) -> Vec<f64> {
        let n = PATCH * PATCH;
        pixels
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let v = i / n;
                (x as f64 - self.mean[v]) / self.std[v]
            })
            .collect()
    }
}

/// Boolean land/sea mask on a grid; cells outside the grid count as sea.
#[derive(Debug, Clone, PartialEq)]
pub struct LandMask {
    pub spec: GridSpec,
    pub land: Vec<bool>,
}

impl LandMask {
    /// From a one-variable frame where values above 0.5 mean land.
    pub fn from_frame(spec: GridSpec, frame: &Frame) -> Result<Self, DataError> {
        if frame.nvars != 1 || frame.rows != spec.rows || frame.cols != spec.cols {
            return Err(DataError::Shape {
                expected: format!("1x{}x{}", spec.rows, spec.cols),
                got: format!("{}x{}x{}", frame.nvars, frame.rows, frame.cols),
            });
        }
        Ok(Self { spec, land: frame.data.iter().map(|&v| v > 0.5).collect() })
    }

    pub fn to_frame(&self) -> Frame {
        let data = self.land.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        Frame { nvars: 1, rows: self.spec.rows, cols: self.spec.cols, data }
    }

    pub fn is_land(&self, p: crate::geo::GeoPoint) -> bool {
        match self.spec.geo_to_grid(p) {
            Ok((r, c)) => self.land[r * self.spec.cols + c],
            Err(_) => false,
        }
    }
}
