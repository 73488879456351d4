use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geo::{GeoPoint, GridSpec};
use crate::time::Timestamp;
use crate::track::{Track, TrackPoint, TrackState};

/// Storm nature as recorded in the best-track archive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Nature {
    NR,
    MX,
    DS,
    TS,
    ET,
    SS,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackType {
    Main,
    Provisional,
    Spur,
    ProvisionalSpur,
}

/// Ocean basin codes as used by IBTrACS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Basin {
    EP,
    WP,
    NA,
    NI,
    SI,
    SP,
    SA,
}

impl Basin {
    /// Basin of a storm from its genesis longitude: [100, 180) is the
    /// western North Pacific, [180, 320) the eastern North Pacific.
    pub fn from_genesis_lon(lon: f64) -> Option<Basin> {
        let lon = crate::geo::normalize_lon(lon);
        if (100.0..180.0).contains(&lon) {
            Some(Basin::WP)
        } else if (180.0..320.0).contains(&lon) {
            Some(Basin::EP)
        } else {
            None
        }
    }
}

/// One best-track observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestTrackPoint {
    pub storm_id: String,
    pub timestamp: Timestamp,
    pub center: GeoPoint,
    pub msw: Option<f64>,
    pub nature: Nature,
    pub track_type: TrackType,
    pub basin: Option<Basin>,
}

/// Groups main-type best-track points into observed tracks, ordered by
/// storm id. Points are sorted by time and duplicate timestamps keep the
/// first record.
pub fn observed_tracks(points: &[BestTrackPoint], spec: &GridSpec) -> Vec<Track> {
    let mut by_storm: BTreeMap<&str, Vec<&BestTrackPoint>> = BTreeMap::new();
    for p in points.iter().filter(|p| p.track_type == TrackType::Main) {
        by_storm.entry(p.storm_id.as_str()).or_default().push(p);
    }
    by_storm
        .into_iter()
        .map(|(id, mut pts)| {
            pts.sort_by_key(|p| p.timestamp);
            pts.dedup_by_key(|p| p.timestamp);
            let basin = pts.iter().find_map(|p| p.basin);
            let points = pts
                .iter()
                .map(|p| {
                    let (row, col) = spec.geo_to_cell(p.center);
                    TrackPoint { time: p.timestamp, geo: p.center, row, col, score: 1.0, msw: p.msw }
                })
                .collect();
            Track { id: id.to_string(), basin, points, state: TrackState::Finished, frames_since_match: 0 }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::ymdh;

    fn pt(id: &str, h: u32, tt: TrackType) -> BestTrackPoint {
        BestTrackPoint {
            storm_id: id.into(),
            timestamp: ymdh(2001, 8, 1, h),
            center: GeoPoint::new(15.0, 140.0).unwrap(),
            msw: Some(35.0),
            nature: Nature::TS,
            track_type: tt,
            basin: Some(Basin::WP),
        }
    }

    #[test]
    fn groups_main_tracks_only() {
        let pts = vec![
            pt("B", 6, TrackType::Main),
            pt("A", 12, TrackType::Main),
            pt("A", 0, TrackType::Main),
            pt("C", 0, TrackType::Spur),
            pt("A", 0, TrackType::Main),
        ];
        let tracks = observed_tracks(&pts, &GridSpec::default());
        assert_eq!(tracks.len(), 2);
        assert_eq!(tracks[0].id, "A");
        assert_eq!(tracks[0].points.len(), 2);
        assert!(tracks[0].points[0].time < tracks[0].points[1].time);
        assert_eq!(tracks[0].points[0].msw, Some(35.0));
    }

    #[test]
    fn basin_rule() {
        assert_eq!(Basin::from_genesis_lon(120.0), Some(Basin::WP));
        assert_eq!(Basin::from_genesis_lon(180.0), Some(Basin::EP));
        assert_eq!(Basin::from_genesis_lon(-100.0), Some(Basin::EP));
        assert_eq!(Basin::from_genesis_lon(330.0), None);
    }
}
