//! BYTE association of per-timestep detections into storm tracks.

mod assignment;
mod byte;
mod filters;
mod iou;

pub use assignment::{solve_assignment, AssignmentResult};
pub use byte::{predict_box, run_tracker, ByteTracker};
pub use filters::apply_physical_filters;
pub use iou::{iou, BBox};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Basin;
use crate::geo::GeoPoint;
use crate::time::Timestamp;

#[derive(Debug, Error, PartialEq)]
pub enum TrackError {
    #[error("invalid tracker parameters: {0}")]
    Params(String),
    #[error("detections at {got} do not follow {last}")]
    OutOfOrder { last: String, got: String },
    #[error("timestamps {0} and {1} are not on a 6-hourly cadence")]
    Cadence(String, String),
    #[error("track {id} moves {km:.1} km in one step (limit {limit} km)")]
    Displacement { id: String, km: f64, limit: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionModel {
    /// Predict the box where the track was last seen.
    None,
    /// Extrapolate the box center from the last two matched points.
    #[default]
    ConstantVelocity,
}

/// Tracker configuration plus the physical post-filters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ByteParams {
    /// Detections at or above this score are "high".
    pub track_threshold: f64,
    /// Largest admissible association cost `1 - IoU`.
    pub match_threshold: f64,
    /// Frames a track may stay unmatched before it is finished.
    pub track_buffer: u32,
    /// Detections below this score are ignored.
    pub low_score_floor: f64,
    /// Box side in cells, odd.
    pub bbox_size: u32,
    pub max_displacement_km: f64,
    pub min_track_steps: usize,
    /// Tracks born north of this latitude are dropped; `None` disables.
    /// Serialized as the string `"none"` so that "no limit" survives a
    /// round trip through formats that omit absent values.
    #[serde(with = "lat_limit")]
    pub genesis_lat_max: Option<f64>,
    /// Drop tracks whose first point is over land (needs a land mask).
    pub reject_land_genesis: bool,
    pub motion: MotionModel,
}

mod lat_limit {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Lat(f64),
        Word(String),
    }

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => Repr::Lat(*x),
            None => Repr::Word("none".into()),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Lat(x) => Ok(Some(x)),
            Repr::Word(w) if w == "none" => Ok(None),
            Repr::Word(w) => Err(serde::de::Error::custom(format!("genesis_lat_max must be a latitude or \"none\", got `{w}`"))),
        }
    }
}

impl Default for ByteParams {
    fn default() -> Self {
        Self {
            track_threshold: 0.7,
            match_threshold: 0.8,
            track_buffer: 1,
            low_score_floor: 0.5,
            bbox_size: 21,
            max_displacement_km: 400.0,
            min_track_steps: 12,
            genesis_lat_max: Some(30.0),
            reject_land_genesis: false,
            motion: MotionModel::ConstantVelocity,
        }
    }
}

impl ByteParams {
    pub fn validate(&self) -> Result<(), TrackError> {
        let bad = |m: &str| Err(TrackError::Params(m.to_string()));
        if !(self.low_score_floor > 0.0 && self.low_score_floor <= self.track_threshold && self.track_threshold < 1.0) {
            return bad("need 0 < low_score_floor <= track_threshold < 1");
        }
        if !(self.match_threshold > 0.0 && self.match_threshold <= 1.0) {
            return bad("match_threshold must lie in (0, 1]");
        }
        // 0 is accepted so that the no-buffer behaviour can be exercised.
        if self.track_buffer > 4 {
            return bad("track_buffer must be at most 4");
        }
        if self.min_track_steps == 0 {
            return bad("min_track_steps must be at least 1");
        }
        if self.bbox_size == 0 || self.bbox_size.is_multiple_of(2) {
            return bad("bbox_size must be odd and positive");
        }
        if !(self.max_displacement_km > 0.0) {
            return bad("max_displacement_km must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackState {
    Active,
    Lost,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub time: Timestamp,
    pub geo: GeoPoint,
    /// Global grid position in cell units.
    pub row: f64,
    pub col: f64,
    pub score: f64,
    /// Maximum sustained wind (knots), observed tracks only.
    pub msw: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub id: String,
    pub basin: Option<Basin>,
    pub points: Vec<TrackPoint>,
    pub state: TrackState,
    pub frames_since_match: u32,
}

impl Track {
    pub fn genesis(&self) -> Option<&TrackPoint> {
        self.points.first()
    }

    pub fn last(&self) -> Option<&TrackPoint> {
        self.points.last()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn geo_points(&self) -> Vec<GeoPoint> {
        self.points.iter().map(|p| p.geo).collect()
    }

    /// Stored basin, else the genesis-longitude rule.
    pub fn basin_or_genesis(&self) -> Option<Basin> {
        match self.basin {
            Some(b @ (Basin::EP | Basin::WP)) => Some(b),
            _ => self.genesis().and_then(|g| Basin::from_genesis_lon(g.geo.lon)),
        }
    }
}
