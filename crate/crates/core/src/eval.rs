//! Track matching against observations and the verification metrics:
//! probability of detection, false-alarm rate, inter-annual variability,
//! duration and smoothness distributions, seasonal genesis counts.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use chrono::Datelike;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Basin;
use crate::geo::{haversine_km, track_smoothness_deg, GeoPoint};
use crate::time::Timestamp;
use crate::track::Track;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("{0} is undefined: its denominator is zero")]
    Undefined(&'static str),
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 3 values, got {0}")]
    TooShort(usize),
    #[error("a series has zero variance after detrending")]
    ZeroVariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchConfig {
    /// Largest distance between coincident points that still counts as a match.
    pub radius_km: f64,
    /// Coincident matched points required before two tracks are paired.
    pub min_matched_steps: usize,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self { radius_km: 300.0, min_matched_steps: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackPair {
    pub obs_index: usize,
    pub det_index: usize,
    pub obs_id: String,
    pub det_id: String,
    pub matched_steps: usize,
    pub mean_distance_km: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MatchReport {
    pub hits: usize,
    pub misses: usize,
    pub false_alarms: usize,
    pub pairs: Vec<TrackPair>,
}

/// Coincident point pairs of two tracks lying within `radius_km`, as
/// `(obs point index, det point index, distance)`.
fn coincident(obs: &Track, det: &Track, radius_km: f64) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < obs.points.len() && j < det.points.len() {
        let (a, b) = (&obs.points[i], &det.points[j]);
        match a.time.cmp(&b.time) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                let d = haversine_km(a.geo, b.geo);
                if d <= radius_km {
                    out.push((i, j, d));
                }
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// Many-to-many matching: an observed track is a hit when at least one
/// detected track shares `min_matched_steps` coincident points within
/// `radius_km` of it; a detected track pairing with no observed track is a
/// false alarm.
pub fn match_tracks(observed: &[Track], detected: &[Track], cfg: &MatchConfig) -> MatchReport {
    let need = cfg.min_matched_steps.max(1);
    let mut pairs = Vec::new();
    let mut det_used = vec![false; detected.len()];
    let mut hits = 0;
    for (oi, o) in observed.iter().enumerate() {
        let mut hit = false;
        for (di, d) in detected.iter().enumerate() {
            let c = coincident(o, d, cfg.radius_km);
            if c.len() >= need {
                hit = true;
                det_used[di] = true;
                pairs.push(TrackPair {
                    obs_index: oi,
                    det_index: di,
                    obs_id: o.id.clone(),
                    det_id: d.id.clone(),
                    matched_steps: c.len(),
                    mean_distance_km: c.iter().map(|x| x.2).sum::<f64>() / c.len() as f64,
                });
            }
        }
        hits += hit as usize;
    }
    MatchReport {
        hits,
        misses: observed.len() - hits,
        false_alarms: det_used.iter().filter(|u| !**u).count(),
        pairs,
    }
}

/// Probability of detection, percent.
pub fn pod(r: &MatchReport) -> Result<f64, EvalError> {
    let n = r.hits + r.misses;
    if n == 0 {
        return Err(EvalError::Undefined("POD"));
    }
    Ok(100.0 * r.hits as f64 / n as f64)
}

/// False-alarm rate, percent.
pub fn far(r: &MatchReport) -> Result<f64, EvalError> {
    let n = r.hits + r.false_alarms;
    if n == 0 {
        return Err(EvalError::Undefined("FAR"));
    }
    Ok(100.0 * r.false_alarms as f64 / n as f64)
}

/// Tracks whose genesis falls in `month` of each year of `years`.
pub fn iav_series(tracks: &[Track], month: u32, years: RangeInclusive<i32>) -> Vec<(i32, usize)> {
    let mut counts: BTreeMap<i32, usize> = years.map(|y| (y, 0)).collect();
    for t in tracks {
        if let Some(g) = t.genesis() {
            if g.time.month() == month {
                if let Some(c) = counts.get_mut(&g.time.year()) {
                    *c += 1;
                }
            }
        }
    }
    counts.into_iter().collect()
}

fn detrend(y: &[f64]) -> Vec<f64> {
    let n = y.len() as f64;
    let xm = (n - 1.0) / 2.0;
    let ym = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, v) in y.iter().enumerate() {
        let dx = i as f64 - xm;
        sxy += dx * (v - ym);
        sxx += dx * dx;
    }
    let slope = sxy / sxx;
    y.iter().enumerate().map(|(i, v)| v - ym - slope * (i as f64 - xm)).collect()
}

/// Pearson correlation of the residuals after removing each series'
/// least-squares linear trend.
pub fn detrended_pearson(a: &[f64], b: &[f64]) -> Result<f64, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 3 {
        return Err(EvalError::TooShort(a.len()));
    }
    let (ra, rb) = (detrend(a), detrend(b));
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    let (saa, sbb) = (dot(&ra, &ra), dot(&rb, &rb));
    // Residuals of an exactly linear series are rounding noise.
    let scale = |y: &[f64]| y.iter().map(|v| v * v).sum::<f64>().max(1.0);
    if saa <= 1e-20 * scale(a) || sbb <= 1e-20 * scale(b) {
        return Err(EvalError::ZeroVariance);
    }
    Ok((dot(&ra, &rb) / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Whole days spanned by a track: `(points - 1) * 6 h`, floored.
pub fn duration_days(t: &Track) -> usize {
    t.len().saturating_sub(1) / 4
}

/// Track counts per whole-day duration bin.
pub fn duration_histogram(tracks: &[Track]) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for t in tracks {
        *h.entry(duration_days(t)).or_insert(0) += 1;
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl Quartiles {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Self { q1: quantile(&v, 0.25), median: quantile(&v, 0.5), q3: quantile(&v, 0.75) })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SmoothnessStats {
    pub per_track: Vec<(String, f64)>,
    /// Tracks too short (or degenerate) to have a smoothness value.
    pub excluded: usize,
    pub quartiles: Option<Quartiles>,
}

pub fn smoothness_stats(tracks: &[Track]) -> SmoothnessStats {
    let mut per_track = Vec::new();
    let mut excluded = 0;
    for t in tracks {
        match track_smoothness_deg(&t.geo_points()) {
            Ok(s) => per_track.push((t.id.clone(), s)),
            Err(_) => excluded += 1,
        }
    }
    let values: Vec<f64> = per_track.iter().map(|p| p.1).collect();
    SmoothnessStats { quartiles: Quartiles::of(&values), per_track, excluded }
}

/// Genesis counts per calendar month; index 0 is January.
pub fn seasonal_distribution(tracks: &[Track]) -> [usize; 12] {
    let mut m = [0; 12];
    for t in tracks {
        if let Some(g) = t.genesis() {
            m[g.time.month0() as usize] += 1;
        }
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatLonPair {
    pub time: Timestamp,
    pub observed: GeoPoint,
    pub predicted: GeoPoint,
    pub msw: Option<f64>,
}

/// Every matched point pair of every matched track pair.
pub fn latlon_scatter(report: &MatchReport, observed: &[Track], detected: &[Track], radius_km: f64) -> Vec<LatLonPair> {
    let mut out = Vec::new();
    for p in &report.pairs {
        let (o, d) = (&observed[p.obs_index], &detected[p.det_index]);
        for (i, j, _) in coincident(o, d, radius_km) {
            out.push(LatLonPair {
                time: o.points[i].time,
                observed: o.points[i].geo,
                predicted: d.points[j].geo,
                msw: o.points[i].msw,
            });
        }
    }
    out
}

/// Region over which POD, FAR and IAV are reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// Eastern and western North Pacific together.
    Joint,
    Enp,
    Wnp,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::Joint, Region::Enp, Region::Wnp];

    pub fn as_str(self) -> &'static str {
        match self {
            Region::Joint => "joint",
            Region::Enp => "enp",
            Region::Wnp => "wnp",
        }
    }

    pub fn contains(self, t: &Track) -> bool {
        match self {
            Region::Joint => true,
            Region::Enp => t.basin_or_genesis() == Some(Basin::EP),
            Region::Wnp => t.basin_or_genesis() == Some(Basin::WP),
        }
    }

    pub fn select(self, tracks: &[Track]) -> Vec<Track> {
        tracks.iter().filter(|t| self.contains(t)).cloned().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub matching: MatchConfig,
    /// Calendar month whose yearly genesis counts form the IAV series.
    pub iav_month: u32,
    /// Year span of the IAV series; defaults to the span of the data.
    pub iav_years: Option<(i32, i32)>,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self { matching: MatchConfig::default(), iav_month: 8, iav_years: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMetrics {
    pub region: Region,
    pub observed: usize,
    pub detected: usize,
    pub hits: usize,
    pub misses: usize,
    pub false_alarms: usize,
    pub pod: Option<f64>,
    pub far: Option<f64>,
    /// `(year, observed count, detected count)`.
    pub iav: Vec<(i32, usize, usize)>,
    pub iav_pearson_detrended: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub regions: Vec<RegionMetrics>,
    pub duration_hist_observed: BTreeMap<usize, usize>,
    pub duration_hist_detected: BTreeMap<usize, usize>,
    pub smoothness_observed: SmoothnessStats,
    pub smoothness_detected: SmoothnessStats,
    pub seasonal_observed: [usize; 12],
    pub seasonal_detected: [usize; 12],
    pub latlon_pairs: Vec<LatLonPair>,
}

impl MetricsReport {
    pub fn region(&self, r: Region) -> &RegionMetrics {
        self.regions.iter().find(|m| m.region == r).expect("all regions are computed")
    }
}

fn year_span(a: &[Track], b: &[Track]) -> Option<(i32, i32)> {
    let years: Vec<i32> = a.iter().chain(b).filter_map(|t| t.genesis()).map(|g| g.time.year()).collect();
    Some((*years.iter().min()?, *years.iter().max()?))
}

pub fn region_metrics(region: Region, observed: &[Track], detected: &[Track], cfg: &MetricsConfig) -> RegionMetrics {
    let (obs, det) = (region.select(observed), region.select(detected));
    let rep = match_tracks(&obs, &det, &cfg.matching);
    let (iav, r) = match cfg.iav_years.or_else(|| year_span(observed, detected)) {
        Some((y0, y1)) => {
            let a = iav_series(&obs, cfg.iav_month, y0..=y1);
            let b = iav_series(&det, cfg.iav_month, y0..=y1);
            let xa: Vec<f64> = a.iter().map(|x| x.1 as f64).collect();
            let xb: Vec<f64> = b.iter().map(|x| x.1 as f64).collect();
            let iav = a.iter().zip(&b).map(|(p, q)| (p.0, p.1, q.1)).collect();
            (iav, detrended_pearson(&xa, &xb).ok())
        }
        None => (vec![], None),
    };
    RegionMetrics {
        region,
        observed: obs.len(),
        detected: det.len(),
        hits: rep.hits,
        misses: rep.misses,
        false_alarms: rep.false_alarms,
        pod: pod(&rep).ok(),
        far: far(&rep).ok(),
        iav,
        iav_pearson_detrended: r,
    }
}

/// The full metric suite of `detected` against `observed`.
pub fn evaluate(observed: &[Track], detected: &[Track], cfg: &MetricsConfig) -> MetricsReport {
    let rep = match_tracks(observed, detected, &cfg.matching);
    MetricsReport {
        regions: Region::ALL.iter().map(|&r| region_metrics(r, observed, detected, cfg)).collect(),
        duration_hist_observed: duration_histogram(observed),
        duration_hist_detected: duration_histogram(detected),
        smoothness_observed: smoothness_stats(observed),
        smoothness_detected: smoothness_stats(detected),
        seasonal_observed: seasonal_distribution(observed),
        seasonal_detected: seasonal_distribution(detected),
        latlon_pairs: latlon_scatter(&rep, observed, detected, cfg.matching.radius_km),
    }
}
