//! Storm-center detectors producing per-timestep [`Detection`]s.

mod neural;
mod physics;

pub use neural::NeuralDetector;
pub use physics::PhysicsDetector;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, Frame, GridSeries};
use crate::exec::Exec;
use crate::geo::{GeoPoint, GridSpec};
use crate::nn::NnError;
use crate::time::Timestamp;
use crate::track::BBox;

#[derive(Debug, Error)]
pub enum DetectError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("invalid detector parameters: {0}")]
    Params(String),
    #[error("classification and localization networks use different input scaling")]
    NormMismatch,
}

/// One scored storm-center candidate in global grid coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub time: Timestamp,
    pub row: f64,
    pub col: f64,
    pub geo: GeoPoint,
    pub score: f64,
}

impl Detection {
    pub fn new(time: Timestamp, row: f64, col: f64, score: f64, spec: &GridSpec) -> Self {
        Self { time, row, col, geo: spec.cell_to_geo(row, col), score }
    }

    pub fn bbox(&self, size: u32) -> BBox {
        BBox::new(self.row, self.col, size)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorParams {
    /// Patches scoring at or above this probability are localized.
    pub class_threshold: f64,
    pub bbox_size: u32,
    /// Suppression radius (Chebyshev, cells) between detections of one map.
    pub dedupe_radius_cells: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self { class_threshold: 0.5, bbox_size: 21, dedupe_radius_cells: 8.0 }
    }
}

impl DetectorParams {
    pub const BBOX_SIZES: [u32; 5] = [15, 21, 25, 31, 35];

    pub fn validate(&self) -> Result<(), DetectError> {
        if !(self.class_threshold > 0.0 && self.class_threshold < 1.0) {
            return Err(DetectError::Params("class_threshold must lie in (0, 1)".into()));
        }
        if !Self::BBOX_SIZES.contains(&self.bbox_size) {
            return Err(DetectError::Params(format!("bbox_size must be one of {:?}", Self::BBOX_SIZES)));
        }
        if !(self.dedupe_radius_cells >= 0.0) {
            return Err(DetectError::Params("dedupe radius must be non-negative".into()));
        }
        Ok(())
    }
}

/// Something that finds storm centers in one map.
pub trait Detector: Sync {
    fn detect_frame(&self, time: Timestamp, frame: &Frame, spec: &GridSpec) -> Result<Vec<Detection>, DetectError>;
}

/// Greedy score-ordered suppression: a detection survives when no
/// higher-ranked survivor lies within `radius_cells` (Chebyshev). Ties in
/// score go to the lexicographically smaller `(row, col)`.
pub fn dedupe(mut dets: Vec<Detection>, radius_cells: f64) -> Vec<Detection> {
    dets.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.row.total_cmp(&b.row))
            .then(a.col.total_cmp(&b.col))
    });
    let mut kept: Vec<Detection> = Vec::with_capacity(dets.len());
    for d in dets {
        if kept.iter().all(|k| (k.row - d.row).abs().max((k.col - d.col).abs()) > radius_cells) {
            kept.push(d);
        }
    }
    kept
}

/// Runs `detector` on every map of `series`, one task per timestep.
pub fn detect_series<D: Detector + ?Sized>(
    detector: &D,
    series: &GridSeries,
    exec: Exec,
) -> Result<Vec<(Timestamp, Vec<Detection>)>, DetectError> {
    exec.map_range(series.len(), |k| {
        let t = series.timestamps[k];
        detector.detect_frame(t, &series.frames[k], &series.spec).map(|d| (t, d))
    })
    .into_iter()
    .collect()
}

/// Replays detections read from a file.
#[derive(Debug, Clone, Default)]
pub struct FileDetector {
    by_time: BTreeMap<Timestamp, Vec<Detection>>,
}

impl FileDetector {
    pub fn new(dets: Vec<Detection>) -> Self {
        let mut by_time: BTreeMap<Timestamp, Vec<Detection>> = BTreeMap::new();
        for d in dets {
            by_time.entry(d.time).or_default().push(d);
        }
        Self { by_time }
    }

    /// Frames in time order, as consumed by the tracker: one per 6-hourly
    /// step from the first to the last detection, empty where the file has
    /// no records (a detector that found nothing writes no rows).
    pub fn frames(&self) -> Vec<(Timestamp, Vec<Detection>)> {
        let (Some(first), Some(last)) = (self.by_time.keys().next(), self.by_time.keys().next_back()) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        let mut t = *first;
        while t <= *last {
            out.push((t, self.by_time.get(&t).cloned().unwrap_or_default()));
            t += crate::time::step();
        }
        out
    }
}

impl Detector for FileDetector {
    fn detect_frame(&self, time: Timestamp, _frame: &Frame, _spec: &GridSpec) -> Result<Vec<Detection>, DetectError> {
        Ok(self.by_time.get(&time).cloned().unwrap_or_default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::ymdh;

    fn d(row: f64, col: f64, score: f64) -> Detection {
        Detection::new(ymdh(2000, 8, 1, 0), row, col, score, &GridSpec::default())
    }

    #[test]
    fn file_frames_fill_missing_steps() {
        let spec = GridSpec::default();
        let dets = vec![
            Detection::new(ymdh(2000, 8, 1, 18), 1.0, 1.0, 0.9, &spec),
            Detection::new(ymdh(2000, 8, 1, 0), 1.0, 1.0, 0.9, &spec),
        ];
        let frames = FileDetector::new(dets).frames();
        let sizes: Vec<usize> = frames.iter().map(|f| f.1.len()).collect();
        assert_eq!(sizes, [1, 0, 0, 1]);
        assert_eq!(frames[2].0, ymdh(2000, 8, 1, 12));
        assert!(FileDetector::new(Vec::new()).frames().is_empty());
    }

    #[test]
    fn dedupe_goldens() {
        let k = dedupe(vec![d(100.0, 100.0, 0.7), d(103.0, 100.0, 0.9)], 8.0);
        assert_eq!(k, vec![d(103.0, 100.0, 0.9)]);
        let k = dedupe(vec![d(100.0, 100.0, 0.7), d(120.0, 100.0, 0.9)], 8.0);
        assert_eq!(k.len(), 2);
        let k = dedupe(vec![d(100.0, 104.0, 0.8), d(100.0, 100.0, 0.8)], 8.0);
        assert_eq!(k, vec![d(100.0, 100.0, 0.8)]);
    }

    #[test]
    fn dedupe_separation_invariant() {
        let dets: Vec<_> = (0..200).map(|i| d((i * 37 % 97) as f64, (i * 53 % 89) as f64, (i * 7 % 13) as f64 / 13.0)).collect();
        let kept = dedupe(dets, 8.0);
        for (i, a) in kept.iter().enumerate() {
            for b in &kept[i + 1..] {
                assert!((a.row - b.row).abs().max((a.col - b.col).abs()) > 8.0);
            }
        }
    }

    #[test]
    fn params_validation() {
        assert!(DetectorParams::default().validate().is_ok());
        assert!(DetectorParams { bbox_size: 20, ..Default::default() }.validate().is_err());
        assert!(DetectorParams { class_threshold: 1.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn file_detector_replays() {
        let a = d(10.0, 10.0, 0.9);
        let fd = FileDetector::new(vec![a.clone()]);
        let f = Frame::zeros(2, 1, 1);
        assert_eq!(fd.detect_frame(a.time, &f, &GridSpec::default()).unwrap(), vec![a.clone()]);
        assert!(fd.detect_frame(ymdh(2000, 8, 2, 0), &f, &GridSpec::default()).unwrap().is_empty());
    }
}
