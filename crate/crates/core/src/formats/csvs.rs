//! CSV tables: best tracks, detections and tracks.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::Deserialize;

use super::{fx, io_err, parse_err, FormatError};
use crate::data::{Basin, BestTrackPoint, Nature, TrackType};
use crate::detect::Detection;
use crate::eval::duration_days;
use crate::geo::{GeoPoint, GridSpec};
use crate::time::{format_iso, parse_iso};
use crate::track::{Track, TrackPoint, TrackState};

const BEST_TRACK_HEADER: [&str; 8] = ["storm_id", "iso_time", "lat", "lon", "msw", "nature", "track_type", "basin"];
const DETECTION_HEADER: [&str; 6] = ["iso_time", "row", "col", "lat", "lon", "score"];
const TRACK_HEADER: [&str; 5] = ["track_id", "iso_time", "lat", "lon", "score"];

fn create(path: &Path) -> Result<BufWriter<File>, FormatError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

fn reader(path: &Path, header: &[&str]) -> Result<csv::Reader<File>, FormatError> {
    let mut r = csv::Reader::from_reader(File::open(path).map_err(io_err(path))?);
    let got: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if got != header {
        return Err(parse_err(path, format!("expected header {}, found {}", header.join(","), got.join(","))));
    }
    Ok(r)
}

pub(super) fn enum_from_str<T: for<'de> Deserialize<'de>>(path: &Path, s: &str, what: &str) -> Result<T, FormatError> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| parse_err(path, format!("unknown {what} `{s}`")))
}

pub(super) fn enum_to_str<T: serde::Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        _ => unreachable!("unit enum variants serialize as strings"),
    }
}

fn num(path: &Path, s: &str, what: &str) -> Result<f64, FormatError> {
    s.trim().parse().map_err(|_| parse_err(path, format!("bad {what} `{s}`")))
}

pub fn read_best_track(path: &Path) -> Result<Vec<BestTrackPoint>, FormatError> {
    let mut r = reader(path, &BEST_TRACK_HEADER)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let f = |i: usize| rec.get(i).unwrap_or("").trim();
        let center = GeoPoint::new(num(path, f(2), "lat")?, num(path, f(3), "lon")?)?;
        out.push(BestTrackPoint {
            storm_id: f(0).to_string(),
            timestamp: parse_iso(f(1))?,
            center,
            msw: if f(4).is_empty() { None } else { Some(num(path, f(4), "msw")?) },
            nature: enum_from_str::<Nature>(path, f(5), "nature")?,
            track_type: enum_from_str::<TrackType>(path, f(6), "track_type")?,
            basin: if f(7).is_empty() { None } else { Some(enum_from_str::<Basin>(path, f(7), "basin")?) },
        });
    }
    Ok(out)
}

pub fn write_best_track(path: &Path, points: &[BestTrackPoint]) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(BEST_TRACK_HEADER)?;
    for p in points {
        w.write_record([
            p.storm_id.clone(),
            format_iso(&p.timestamp),
            fx(p.center.lat),
            fx(p.center.lon),
            p.msw.map(fx).unwrap_or_default(),
            enum_to_str(&p.nature),
            enum_to_str(&p.track_type),
            p.basin.as_ref().map(enum_to_str).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes detections sorted by `(time, row, col)`.
pub fn write_detections(path: &Path, dets: &[Detection]) -> Result<(), FormatError> {
    let mut sorted: Vec<&Detection> = dets.iter().collect();
    sorted.sort_by(|a, b| a.time.cmp(&b.time).then(a.row.total_cmp(&b.row)).then(a.col.total_cmp(&b.col)));
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(DETECTION_HEADER)?;
    for d in sorted {
        w.write_record([format_iso(&d.time), fx(d.row), fx(d.col), fx(d.geo.lat), fx(d.geo.lon), fx(d.score)])?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_detections(path: &Path) -> Result<Vec<Detection>, FormatError> {
    let mut r = reader(path, &DETECTION_HEADER)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let f = |i: usize| rec.get(i).unwrap_or("");
        out.push(Detection {
            time: parse_iso(f(0).trim())?,
            row: num(path, f(1), "row")?,
            col: num(path, f(2), "col")?,
            geo: GeoPoint::new(num(path, f(3), "lat")?, num(path, f(4), "lon")?)?,
            score: num(path, f(5), "score")?,
        });
    }
    Ok(out)
}

/// Writes track points sorted by `(track_id, iso_time)`.
pub fn write_tracks(path: &Path, tracks: &[Track]) -> Result<(), FormatError> {
    let mut sorted: Vec<&Track> = tracks.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(TRACK_HEADER)?;
    for t in sorted {
        for p in &t.points {
            w.write_record([t.id.clone(), format_iso(&p.time), fx(p.geo.lat), fx(p.geo.lon), fx(p.score)])?;
        }
    }
    w.flush().map_err(io_err(path))
}

/// One line per track: basin, lifetime and genesis position.
pub fn write_track_summary(path: &Path, tracks: &[Track]) -> Result<(), FormatError> {
    let mut sorted: Vec<&Track> = tracks.iter().filter(|t| !t.is_empty()).collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["track_id", "basin", "genesis_time", "lysis_time", "points", "genesis_lat", "genesis_lon", "duration_days"])?;
    for t in sorted {
        let (g, l) = (&t.points[0], &t.points[t.len() - 1]);
        w.write_record([
            t.id.clone(),
            t.basin_or_genesis().as_ref().map(enum_to_str).unwrap_or_default(),
            format_iso(&g.time),
            format_iso(&l.time),
            t.len().to_string(),
            fx(g.geo.lat),
            fx(g.geo.lon),
            duration_days(t).to_string(),
        ])?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads a tracks table; grid positions are recomputed from `spec`.
pub fn read_tracks(path: &Path, spec: &GridSpec) -> Result<Vec<Track>, FormatError> {
    let mut r = reader(path, &TRACK_HEADER)?;
    let mut by_id: BTreeMap<String, Vec<TrackPoint>> = BTreeMap::new();
    for rec in r.records() {
        let rec = rec?;
        let f = |i: usize| rec.get(i).unwrap_or("");
        let geo = GeoPoint::new(num(path, f(2), "lat")?, num(path, f(3), "lon")?)?;
        let (row, col) = spec.geo_to_cell(geo);
        let p = TrackPoint { time: parse_iso(f(1).trim())?, geo, row, col, score: num(path, f(4), "score")?, msw: None };
        by_id.entry(f(0).trim().to_string()).or_default().push(p);
    }
    let mut out = Vec::with_capacity(by_id.len());
    for (id, points) in by_id {
        if points.windows(2).any(|w| w[1].time <= w[0].time) {
            return Err(parse_err(path, format!("track {id} is not in strictly increasing time order")));
        }
        out.push(Track { id, basin: None, points, state: TrackState::Finished, frames_since_match: 0 });
    }
    Ok(out)
}
