//! Spherical geodesy and grid georeferencing.
//!
//! Distances use a spherical Earth of radius [`EARTH_RADIUS_KM`]. Bearings are
//! initial great-circle bearings in degrees clockwise from north.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const EARTH_RADIUS_KM: f64 = 6371.0;

#[derive(Debug, Error, PartialEq)]
pub enum GeoError {
    #[error("latitude {0} outside [-90, 90]")]
    Latitude(f64),
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("bearing undefined between coincident or antipodal points")]
    DegeneratePair,
    #[error("track smoothness needs at least 4 distinct points, got {0}")]
    TooFewPoints(usize),
    #[error("grid index ({row}, {col}) outside {rows}x{cols}")]
    OutOfBounds { row: i64, col: i64, rows: usize, cols: usize },
    #[error("invalid grid spec: {0}")]
    InvalidGrid(String),
}

/// A position on the sphere; longitude is kept in `[0, 360)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

pub fn normalize_lon(lon: f64) -> f64 {
    let l = lon.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if l >= 360.0 {
        0.0
    } else {
        l
    }
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        if !lat.is_finite() || !lon.is_finite() {
            return Err(GeoError::NonFinite);
        }
        if !(-90.0..=90.0).contains(&lat) {
            return Err(GeoError::Latitude(lat));
        }
        Ok(Self { lat, lon: normalize_lon(lon) })
    }
}

/// Great-circle distance in kilometres (haversine form).
pub fn haversine_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Initial bearing from `a` to `b`, in `[0, 360)`.
pub fn bearing_deg(a: GeoPoint, b: GeoPoint) -> Result<f64, GeoError> {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlambda = (b.lon - a.lon).to_radians();
    let y = dlambda.sin() * phi2.cos();
    let x = phi1.cos() * phi2.sin() - phi1.sin() * phi2.cos() * dlambda.cos();
    // Both components vanish for coincident and antipodal pairs.
    if y.abs() < 1e-15 && x.abs() < 1e-15 {
        return Err(GeoError::DegeneratePair);
    }
    let theta = y.atan2(x).to_degrees();
    Ok(normalize_lon(theta))
}

/// Smallest angle between two headings, in `[0, 180]`.
pub fn bearing_variation_deg(t1: f64, t2: f64) -> f64 {
    let d = (t2 - t1).abs().rem_euclid(360.0);
    d.min(360.0 - d)
}

/// Standard deviation of successive bearing changes along a track, with
/// divisor `N - 2` where `N` is the number of points.
///
/// Consecutive duplicate points carry no heading and are dropped first, so
/// a storm that stalls for a step does not make the track degenerate.
pub fn track_smoothness_deg(points: &[GeoPoint]) -> Result<f64, GeoError> {
    let mut pts: Vec<GeoPoint> = Vec::with_capacity(points.len());
    for p in points {
        if pts.last() != Some(p) {
            pts.push(*p);
        }
    }
    let n = pts.len();
    if n < 4 {
        return Err(GeoError::TooFewPoints(n));
    }
    let bearings = pts
        .windows(2)
        .map(|w| bearing_deg(w[0], w[1]))
        .collect::<Result<Vec<_>, _>>()?;
    let variations: Vec<f64> = bearings
        .windows(2)
        .map(|w| bearing_variation_deg(w[0], w[1]))
        .collect();
    let m = variations.len() as f64;
    let mean = variations.iter().sum::<f64>() / m;
    let var = variations.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m;
    Ok(var.sqrt())
}

/// Point reached after travelling `dist_km` along the great circle that
/// leaves `p` at heading `bearing`.
pub fn destination(p: GeoPoint, bearing: f64, dist_km: f64) -> GeoPoint {
    let delta = dist_km / EARTH_RADIUS_KM;
    let theta = bearing.to_radians();
    let phi1 = p.lat.to_radians();
    let lambda1 = p.lon.to_radians();
    let sin_phi2 = phi1.sin() * delta.cos() + phi1.cos() * delta.sin() * theta.cos();
    let phi2 = sin_phi2.clamp(-1.0, 1.0).asin();
    let lambda2 = lambda1
        + (theta.sin() * delta.sin() * phi1.cos()).atan2(delta.cos() - phi1.sin() * sin_phi2);
    GeoPoint { lat: phi2.to_degrees(), lon: normalize_lon(lambda2.to_degrees()) }
}

/// Regular lat/lon grid. Row 0 is the northernmost band, column 0 the
/// westernmost; `(lat0, lon0)` is the center of cell `(0, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lat0: f64,
    pub lon0: f64,
    pub d: f64,
    pub rows: usize,
    pub cols: usize,
}

impl Default for GridSpec {
    /// 0.25° grid over 0–70°N, 100–320°E.
    fn default() -> Self {
        Self { lat0: 70.0, lon0: 100.0, d: 0.25, rows: 280, cols: 880 }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), GeoError> {
        if !(self.d > 0.0) || !self.d.is_finite() {
            return Err(GeoError::InvalidGrid(format!("cell size {} must be positive", self.d)));
        }
        if self.rows == 0 || self.cols == 0 {
            return Err(GeoError::InvalidGrid("empty grid".into()));
        }
        let south = self.lat0 - (self.rows - 1) as f64 * self.d;
        if self.lat0 > 90.0 || south < -90.0 {
            return Err(GeoError::InvalidGrid("latitude span leaves [-90, 90]".into()));
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.rows * self.cols
    }

    fn check(&self, row: i64, col: i64) -> Result<(), GeoError> {
        if row < 0 || col < 0 || row as usize >= self.rows || col as usize >= self.cols {
            return Err(GeoError::OutOfBounds { row, col, rows: self.rows, cols: self.cols });
        }
        Ok(())
    }

    /// Center of cell `(row, col)`.
    pub fn grid_to_geo(&self, row: usize, col: usize) -> Result<GeoPoint, GeoError> {
        self.check(row as i64, col as i64)?;
        Ok(self.cell_to_geo(row as f64, col as f64))
    }

    /// Fractional cell coordinates to geographic; no bounds check.
    pub fn cell_to_geo(&self, row: f64, col: f64) -> GeoPoint {
        GeoPoint { lat: self.lat0 - row * self.d, lon: normalize_lon(self.lon0 + col * self.d) }
    }

    /// Geographic to fractional cell coordinates; no bounds check.
    pub fn geo_to_cell(&self, p: GeoPoint) -> (f64, f64) {
        let row = (self.lat0 - p.lat) / self.d;
        let col = normalize_lon(p.lon - self.lon0) / self.d;
        (row, col)
    }

    /// Nearest cell (round half up on both axes).
    pub fn geo_to_grid(&self, p: GeoPoint) -> Result<(usize, usize), GeoError> {
        let (r, c) = self.geo_to_cell(p);
        let (ri, ci) = ((r + 0.5).floor() as i64, (c + 0.5).floor() as i64);
        self.check(ri, ci)?;
        Ok((ri as usize, ci as usize))
    }

    pub fn contains_cell(&self, row: f64, col: f64) -> bool {
        row >= 0.0 && col >= 0.0 && row < self.rows as f64 && col < self.cols as f64
    }
}
