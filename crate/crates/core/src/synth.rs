//! Synthetic cyclone scenarios with exact ground truth.
//!
//! Each storm walks along great-circle segments with a slowly wandering
//! heading. Its signature is a Gaussian pressure well in MSLP and a
//! Gaussian vorticity bump in RV850, superimposed on a smooth background
//! that has no interior pressure minima of its own.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{
    BestTrackPoint, DataError, Frame, GridSeries, Nature, PatchKind, PatchSample, TrackType, MSLP, PATCH, PATCH_PIXELS, RV850,
    VARS,
};
use crate::exec::Exec;
use crate::geo::{destination, GridSpec};
use crate::time::{self, Timestamp};
use crate::track::{Track, TrackPoint, TrackState};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Storm centers closer than this to the grid edge are not recorded.
const EDGE_MARGIN: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_storms: usize,
    pub steps: usize,
    /// Mean translation speed.
    pub speed_kmh: f64,
    /// Standard deviation of the per-step heading change, degrees.
    pub turn_rate_deg: f64,
    /// Mean initial heading, degrees clockwise from north.
    pub heading_deg: f64,
    /// Central pressure deficit, hPa.
    pub well_depth: f64,
    /// Gaussian radius (standard deviation) of the signatures, cells.
    pub well_radius_cells: f64,
    /// Peak vorticity of the storm signature, 1/s.
    pub vorticity_peak: f64,
    /// Background MSLP noise, Pa; RV850 noise is scaled by 1e-7 per Pa.
    pub noise_std: f64,
    /// Probability that a storm's signature is missing at a given step.
    pub dropout_prob: f64,
    /// Latitude band for storm genesis, degrees north.
    pub genesis_lat: (f64, f64),
    pub start: String,
    pub seed: u64,
    /// Not part of the serialized scenario: callers supply the grid they
    /// analyse on, so a run configuration names it once.
    #[serde(skip)]
    pub grid: GridSpec,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_storms: 3,
            steps: 40,
            speed_kmh: 18.0,
            turn_rate_deg: 5.0,
            heading_deg: 295.0,
            well_depth: 20.0,
            well_radius_cells: 4.0,
            vorticity_peak: 2e-4,
            noise_std: 0.0,
            dropout_prob: 0.0,
            genesis_lat: (8.0, 22.0),
            start: "2005-08-01T00:00:00Z".into(),
            seed: 1,
            grid: GridSpec::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<Timestamp, SynthError> {
        let bad = |m: String| Err(SynthError::Config(m));
        self.grid.validate().map_err(|e| SynthError::Config(e.to_string()))?;
        if self.steps == 0 {
            return bad("steps must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.dropout_prob) {
            return bad(format!("dropout_prob {} outside [0, 1]", self.dropout_prob));
        }
        if !(self.speed_kmh >= 0.0 && self.turn_rate_deg >= 0.0 && self.noise_std >= 0.0) {
            return bad("speed, turn rate and noise must be non-negative".into());
        }
        if !(self.well_radius_cells > 0.0 && self.well_depth > 0.0) {
            return bad("well depth and radius must be positive".into());
        }
        if !(self.genesis_lat.0 <= self.genesis_lat.1) {
            return bad("genesis_lat must be an ordered pair".into());
        }
        let t = time::parse_iso(&self.start).map_err(|e| SynthError::Config(e.to_string()))?;
        time::check_synoptic(&t).map_err(|e| SynthError::Config(e.to_string()))?;
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticStorm {
    /// Exact centers, including steps where the signature is hidden.
    pub truth: Track,
    /// Indices into `truth.points` whose signature was dropped.
    pub hidden: Vec<usize>,
    /// The storm left the domain before the last step.
    pub truncated: bool,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub series: GridSeries,
    pub storms: Vec<SyntheticStorm>,
}

impl Scenario {
    pub fn truth(&self) -> Vec<Track> {
        self.storms.iter().map(|s| s.truth.clone()).collect()
    }

    /// The truth tracks as main-type best-track records (nature TS, no wind).
    pub fn best_track(&self) -> Vec<BestTrackPoint> {
        self.storms
            .iter()
            .flat_map(|s| {
                let basin = s.truth.basin_or_genesis();
                s.truth.points.iter().map(move |p| BestTrackPoint {
                    storm_id: s.truth.id.clone(),
                    timestamp: p.time,
                    center: p.geo,
                    msw: None,
                    nature: Nature::TS,
                    track_type: TrackType::Main,
                    basin,
                })
            })
            .collect()
    }
}

fn inside(spec: &GridSpec, row: f64, col: f64) -> bool {
    row >= EDGE_MARGIN
        && col >= EDGE_MARGIN
        && row <= spec.rows as f64 - 1.0 - EDGE_MARGIN
        && col <= spec.cols as f64 - 1.0 - EDGE_MARGIN
}

fn walk(cfg: &ScenarioConfig, k: usize, t0: Timestamp) -> SyntheticStorm {
    let spec = &cfg.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(k as u64);
    let turn = Normal::new(0.0, cfg.turn_rate_deg.max(1e-12)).expect("finite std");
    // Storms start in the eastern part of their own longitude band so that
    // westward motion keeps them apart.
    let band = (spec.cols as f64 - 2.0 * EDGE_MARGIN) / cfg.n_storms as f64;
    let col0 = EDGE_MARGIN + band * (k as f64 + rng.random_range(0.6..0.9));
    let lat = rng.random_range(cfg.genesis_lat.0..=cfg.genesis_lat.1);
    let mut pos = spec.cell_to_geo(0.0, col0);
    pos.lat = lat;
    let mut heading = cfg.heading_deg + turn.sample(&mut rng);
    let (mut points, mut hidden) = (Vec::new(), Vec::new());
    let mut truncated = false;
    for s in 0..cfg.steps {
        let (row, col) = spec.geo_to_cell(pos);
        if !inside(spec, row, col) {
            truncated = true;
            break;
        }
        if rng.random::<f64>() < cfg.dropout_prob {
            hidden.push(points.len());
        }
        points.push(TrackPoint { time: t0 + time::step() * s as i32, geo: pos, row, col, score: 1.0, msw: None });
        pos = destination(pos, heading, cfg.speed_kmh * time::STEP_HOURS as f64);
        heading += turn.sample(&mut rng);
    }
    let truth = Track {
        id: format!("S{:03}", k + 1),
        basin: None,
        points,
        state: TrackState::Finished,
        frames_since_match: 0,
    };
    SyntheticStorm { truth, hidden, truncated }
}

/// Smooth background: pressure rises monotonically towards the pole, so
/// it has no interior minima; vorticity is zero.
fn background(spec: &GridSpec, row: usize, col: usize) -> (f64, f64) {
    let lat = spec.lat0 - row as f64 * spec.d;
    let lon = spec.lon0 + col as f64 * spec.d;
    (100_900.0 + 8.0 * lat + 60.0 * (lon.to_radians() * 3.0).sin(), 0.0)
}

fn render(cfg: &ScenarioConfig, storms: &[SyntheticStorm], step: usize, t: Timestamp) -> Frame {
    let spec = &cfg.grid;
    let mut f = Frame::zeros(VARS.len(), spec.rows, spec.cols);
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            let (p, v) = background(spec, r, c);
            f.set(MSLP, r, c, p as f32);
            f.set(RV850, r, c, v as f32);
        }
    }
    let sig = cfg.well_radius_cells;
    let reach = (4.0 * sig).ceil() as i64;
    for s in storms {
        let Some(k) = s.truth.points.iter().position(|p| p.time == t) else { continue };
        if s.hidden.contains(&k) {
            continue;
        }
        let p = &s.truth.points[k];
        let (r0, c0) = (p.row.round() as i64, p.col.round() as i64);
        for r in (r0 - reach).max(0)..=(r0 + reach).min(spec.rows as i64 - 1) {
            for c in (c0 - reach).max(0)..=(c0 + reach).min(spec.cols as i64 - 1) {
                let d2 = (r as f64 - p.row).powi(2) + (c as f64 - p.col).powi(2);
                let g = (-d2 / (2.0 * sig * sig)).exp();
                let (ru, cu) = (r as usize, c as usize);
                f.set(MSLP, ru, cu, (f.get(MSLP, ru, cu) as f64 - 100.0 * cfg.well_depth * g) as f32);
                f.set(RV850, ru, cu, (f.get(RV850, ru, cu) as f64 + cfg.vorticity_peak * g) as f32);
            }
        }
    }
    if cfg.noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream((1 << 32) + step as u64);
        let n = Normal::new(0.0, cfg.noise_std).expect("finite std");
        for r in 0..spec.rows {
            for c in 0..spec.cols {
                let (dp, dv) = (n.sample(&mut rng), n.sample(&mut rng) * 1e-7);
                f.set(MSLP, r, c, (f.get(MSLP, r, c) as f64 + dp) as f32);
                f.set(RV850, r, c, (f.get(RV850, r, c) as f64 + dv) as f32);
            }
        }
    }
    f
}

/// Builds the scenario; identical configs give bit-identical output in
/// either execution mode.
pub fn generate(cfg: &ScenarioConfig, exec: Exec) -> Result<Scenario, SynthError> {
    let t0 = cfg.validate()?;
    let storms: Vec<SyntheticStorm> = (0..cfg.n_storms).map(|k| walk(cfg, k, t0)).collect();
    let times: Vec<Timestamp> = (0..cfg.steps).map(|s| t0 + time::step() * s as i32).collect();
    let frames = exec.map_range(cfg.steps, |s| render(cfg, &storms, s, times[s]));
    let series = GridSeries::new(cfg.grid, times, frames)?;
    Ok(Scenario { series, storms })
}

/// Stand-alone training patches: even indices hold a storm signature at a
/// random in-patch center (negative MSLP bump, positive RV850 bump of
/// radius 3 cells), odd indices only background noise of std 0.1. Values
/// are already on a standardized scale.
pub fn synthetic_patches(n: usize, seed: u64) -> Vec<PatchSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.1).expect("finite std");
    let t = time::ymdh(2000, 1, 1, 0);
    (0..n)
        .map(|i| {
            let mut px: Vec<f32> = (0..PATCH_PIXELS).map(|_| noise.sample(&mut rng) as f32).collect();
            let (pr, pc) = (i / 22 % 7, i % 22);
            if i % 2 == 1 {
                return PatchSample { kind: PatchKind::Random, ..PatchSample::background(t, pr, pc, px) };
            }
            let (cr, cc) = (rng.random_range(2..38usize), rng.random_range(2..38usize));
            for r in 0..PATCH {
                for c in 0..PATCH {
                    let d2 = (r as f64 - cr as f64).powi(2) + (c as f64 - cc as f64).powi(2);
                    let g = (-d2 / 18.0).exp() as f32;
                    px[(RV850 * PATCH + r) * PATCH + c] += 2.0 * g;
                    px[(MSLP * PATCH + r) * PATCH + c] -= 2.0 * g;
                }
            }
            PatchSample {
                center: Some((cr as u8, cc as u8)),
                kind: PatchKind::Cyclone,
                ..PatchSample::background(t, pr, pc, px)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::haversine_km;

    fn small() -> ScenarioConfig {
        ScenarioConfig {
            grid: GridSpec { lat0: 40.0, lon0: 120.0, d: 0.25, rows: 160, cols: 400 },
            steps: 12,
            n_storms: 2,
            ..Default::default()
        }
    }

    #[test]
    fn no_storms_means_no_truth_and_smooth_fields() {
        let sc = generate(&ScenarioConfig { n_storms: 0, ..small() }, Exec::Sequential).unwrap();
        assert!(sc.storms.is_empty());
        let f = &sc.series.frames[0];
        assert!(f.plane(RV850).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn field_minimum_tracks_truth() {
        let cfg = ScenarioConfig { n_storms: 1, ..small() };
        let sc = generate(&cfg, Exec::Sequential).unwrap();
        let truth = &sc.storms[0].truth;
        assert_eq!(truth.len(), cfg.steps);
        for (p, f) in truth.points.iter().zip(&sc.series.frames) {
            let plane = f.plane(MSLP);
            // Minimum of the anomaly relative to the background.
            let (mut best, mut at) = (f64::INFINITY, 0);
            for (i, v) in plane.iter().enumerate() {
                let (r, c) = (i / cfg.grid.cols, i % cfg.grid.cols);
                let a = *v as f64 - background(&cfg.grid, r, c).0;
                if a < best {
                    best = a;
                    at = i;
                }
            }
            let (r, c) = ((at / cfg.grid.cols) as f64, (at % cfg.grid.cols) as f64);
            assert!((r - p.row).abs() <= 1.0 && (c - p.col).abs() <= 1.0);
        }
    }

    #[test]
    fn deterministic_across_modes() {
        let cfg = ScenarioConfig { noise_std: 30.0, dropout_prob: 0.2, ..small() };
        let a = generate(&cfg, Exec::Sequential).unwrap();
        let b = generate(&cfg, Exec::Parallel).unwrap();
        assert_eq!(a.series, b.series);
        assert_eq!(a.storms, b.storms);
    }

    #[test]
    fn displacements_follow_speed() {
        let cfg = small();
        let sc = generate(&cfg, Exec::Sequential).unwrap();
        for s in &sc.storms {
            assert!(s.truth.points[0].geo.lat < 30.0);
            for w in s.truth.points.windows(2) {
                let km = haversine_km(w[0].geo, w[1].geo);
                assert!((km - cfg.speed_kmh * 6.0).abs() < 1e-6, "{km}");
            }
        }
    }

    #[test]
    fn leaving_domain_truncates() {
        let cfg = ScenarioConfig { n_storms: 1, speed_kmh: 90.0, steps: 60, ..small() };
        let s = &generate(&cfg, Exec::Sequential).unwrap().storms[0];
        assert!(s.truncated && s.truth.len() < 60);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(generate(&ScenarioConfig { dropout_prob: 1.5, ..small() }, Exec::Sequential).is_err());
        assert!(generate(&ScenarioConfig { start: "2005-08-01T03:00:00Z".into(), ..small() }, Exec::Sequential).is_err());
    }
}
