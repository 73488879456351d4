//! Tracker hyperparameter search: grid enumeration, per-candidate
//! evaluation on cached detections, Pareto frontier and weighted selection.

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::LandMask;
use crate::detect::Detection;
use crate::eval::{self, MetricsConfig, Region};
use crate::exec::Exec;
use crate::time::Timestamp;
use crate::track::{apply_physical_filters, run_tracker, ByteParams, Track, TrackError};

#[derive(Debug, Error, PartialEq)]
pub enum TuneError {
    #[error(transparent)]
    Track(#[from] TrackError),
    #[error("the Pareto frontier is empty")]
    EmptyFrontier,
    #[error("candidate {0} has no evaluated metrics")]
    Unevaluated(usize),
    #[error("invalid tuner configuration: {0}")]
    Config(String),
}

/// Genesis constraints applied after tracking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintSet {
    None,
    NoLandGenesis,
    #[serde(rename = "lat_le_30")]
    LatLe30,
    #[serde(rename = "lat_le_50")]
    LatLe50,
    #[serde(rename = "no_land_lat_le_30")]
    NoLandLatLe30,
    #[serde(rename = "no_land_lat_le_50")]
    NoLandLatLe50,
}

impl ConstraintSet {
    pub const ALL: [ConstraintSet; 6] = [
        ConstraintSet::None,
        ConstraintSet::NoLandGenesis,
        ConstraintSet::LatLe30,
        ConstraintSet::LatLe50,
        ConstraintSet::NoLandLatLe30,
        ConstraintSet::NoLandLatLe50,
    ];

    pub fn genesis_lat_max(self) -> Option<f64> {
        match self {
            ConstraintSet::LatLe30 | ConstraintSet::NoLandLatLe30 => Some(30.0),
            ConstraintSet::LatLe50 | ConstraintSet::NoLandLatLe50 => Some(50.0),
            _ => None,
        }
    }

    pub fn rejects_land(self) -> bool {
        matches!(self, ConstraintSet::NoLandGenesis | ConstraintSet::NoLandLatLe30 | ConstraintSet::NoLandLatLe50)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ConstraintSet::None => "none",
            ConstraintSet::NoLandGenesis => "no_land_genesis",
            ConstraintSet::LatLe30 => "lat_le_30",
            ConstraintSet::LatLe50 => "lat_le_50",
            ConstraintSet::NoLandLatLe30 => "no_land_lat_le_30",
            ConstraintSet::NoLandLatLe50 => "no_land_lat_le_50",
        }
    }
}

/// The four tuning objectives; POD and the correlations are maximized,
/// FAR is minimized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objectives {
    pub pod: f64,
    pub far: f64,
    pub r_enp: f64,
    pub r_wnp: f64,
}

impl Objectives {
    /// Values substituted for undefined metrics.
    pub const WORST: Objectives = Objectives { pod: 0.0, far: 100.0, r_enp: -1.0, r_wnp: -1.0 };

    /// All four objectives oriented so that larger is better.
    pub fn oriented(&self) -> [f64; 4] {
        [self.pod, -self.far, self.r_enp, self.r_wnp]
    }

    /// `self` is at least as good everywhere and strictly better somewhere.
    pub fn dominates(&self, other: &Objectives) -> bool {
        let (a, b) = (self.oriented(), other.oriented());
        a.iter().zip(&b).all(|(x, y)| x >= y) && a.iter().zip(&b).any(|(x, y)| x > y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunerCandidate {
    pub bbox_size: u32,
    pub track_buffer: u32,
    pub match_threshold: f64,
    pub track_threshold: f64,
    pub constraint_set: ConstraintSet,
    pub metrics: Option<Objectives>,
}

impl TunerCandidate {
    /// `base` with this candidate's settings applied.
    pub fn byte_params(&self, base: &ByteParams) -> ByteParams {
        ByteParams {
            bbox_size: self.bbox_size,
            track_buffer: self.track_buffer,
            match_threshold: self.match_threshold,
            track_threshold: self.track_threshold,
            genesis_lat_max: self.constraint_set.genesis_lat_max(),
            reject_land_genesis: self.constraint_set.rejects_land(),
            ..base.clone()
        }
    }

    fn objectives(&self, index: usize) -> Result<Objectives, TuneError> {
        self.metrics.ok_or(TuneError::Unevaluated(index))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Weights {
    pub pod: f64,
    pub far: f64,
    pub enp: f64,
    pub wnp: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self { pod: 0.4, far: 0.3, enp: 0.15, wnp: 0.15 }
    }
}

impl Weights {
    pub fn validate(&self) -> Result<(), TuneError> {
        let w = [self.pod, self.far, self.enp, self.wnp];
        if w.iter().any(|x| !(*x >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(TuneError::Config("weights must be non-negative and sum to 1".into()));
        }
        Ok(())
    }
}

/// Value sets spanned by the candidate grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TunerGrid {
    pub bbox_sizes: Vec<u32>,
    pub track_buffers: Vec<u32>,
    pub constraint_sets: Vec<ConstraintSet>,
    pub match_threshold: f64,
    pub track_threshold: f64,
    /// Values for the preliminary threshold sweep.
    pub sweep_match_thresholds: Vec<f64>,
    pub sweep_track_thresholds: Vec<f64>,
}

impl Default for TunerGrid {
    fn default() -> Self {
        Self {
            bbox_sizes: vec![15, 21, 25, 31, 35],
            track_buffers: vec![1, 2, 3, 4],
            constraint_sets: ConstraintSet::ALL.to_vec(),
            match_threshold: 0.8,
            track_threshold: 0.7,
            sweep_match_thresholds: vec![0.6, 0.7, 0.8, 0.9],
            sweep_track_thresholds: vec![0.5, 0.6, 0.7, 0.8],
        }
    }
}

fn dedup_sorted<T: PartialOrd + Copy>(v: &[T]) -> Vec<T> {
    let mut out = v.to_vec();
    out.sort_by(|a, b| a.partial_cmp(b).expect("grid values are comparable"));
    out.dedup_by(|a, b| a == b);
    out
}

/// Cartesian product bbox × buffer × constraint set at fixed thresholds,
/// with duplicate values removed and a deterministic order.
pub fn enumerate_candidates(grid: &TunerGrid) -> Vec<TunerCandidate> {
    let mut out = Vec::new();
    for &bbox_size in &dedup_sorted(&grid.bbox_sizes) {
        for &track_buffer in &dedup_sorted(&grid.track_buffers) {
            for &constraint_set in &dedup_sorted(&grid.constraint_sets) {
                out.push(TunerCandidate {
                    bbox_size,
                    track_buffer,
                    match_threshold: grid.match_threshold,
                    track_threshold: grid.track_threshold,
                    constraint_set,
                    metrics: None,
                });
            }
        }
    }
    out
}

/// Indices of the non-dominated objective vectors, in input order.
pub fn pareto_indices(objs: &[Objectives]) -> Vec<usize> {
    (0..objs.len()).filter(|&i| !objs.iter().any(|o| o.dominates(&objs[i]))).collect()
}

pub fn pareto_frontier(candidates: &[TunerCandidate]) -> Result<Vec<TunerCandidate>, TuneError> {
    let objs = candidates.iter().enumerate().map(|(i, c)| c.objectives(i)).collect::<Result<Vec<_>, _>>()?;
    Ok(pareto_indices(&objs).into_iter().map(|i| candidates[i].clone()).collect())
}

/// Index of the best candidate of `frontier` by the weighted sum of
/// min-max-normalized objectives (FAR inverted). Ties go to the smaller
/// FAR, then the smaller box, then the earlier entry.
pub fn weighted_select(frontier: &[TunerCandidate], w: &Weights) -> Result<usize, TuneError> {
    if frontier.is_empty() {
        return Err(TuneError::EmptyFrontier);
    }
    let objs = frontier.iter().enumerate().map(|(i, c)| c.objectives(i)).collect::<Result<Vec<_>, _>>()?;
    let wv = [w.pod, w.far, w.enp, w.wnp];
    let mut lo = [f64::INFINITY; 4];
    let mut hi = [f64::NEG_INFINITY; 4];
    for o in &objs {
        for (k, v) in o.oriented().into_iter().enumerate() {
            lo[k] = lo[k].min(v);
            hi[k] = hi[k].max(v);
        }
    }
    let score = |o: &Objectives| -> f64 {
        o.oriented()
            .iter()
            .enumerate()
            .map(|(k, v)| if hi[k] > lo[k] { wv[k] * (v - lo[k]) / (hi[k] - lo[k]) } else { 0.0 })
            .sum()
    };
    let scores: Vec<f64> = objs.iter().map(score).collect();
    let best = (0..frontier.len())
        .min_by(|&a, &b| {
            scores[b]
                .total_cmp(&scores[a])
                .then(objs[a].far.total_cmp(&objs[b].far))
                .then(frontier[a].bbox_size.cmp(&frontier[b].bbox_size))
                .then(a.cmp(&b))
        })
        .expect("frontier is non-empty");
    Ok(best)
}

/// Observations, cached detections and fixed settings shared by every
/// candidate evaluation.
#[derive(Debug, Clone, Copy)]
pub struct TuningInputs<'a> {
    pub frames: &'a [(Timestamp, Vec<Detection>)],
    pub observed: &'a [Track],
    pub base: &'a ByteParams,
    pub land: Option<&'a LandMask>,
    pub metrics: &'a MetricsConfig,
}

/// Tracks produced by the candidate's tracker settings and filters.
pub fn candidate_tracks(c: &TunerCandidate, inp: &TuningInputs) -> Result<Vec<Track>, TuneError> {
    let params = c.byte_params(inp.base);
    let raw = run_tracker(inp.frames, &params)?;
    Ok(apply_physical_filters(raw, &params, inp.land)?)
}

/// POD and FAR over the joint basin, detrended IAV correlation per basin;
/// undefined values become [`Objectives::WORST`] entries.
pub fn evaluate_candidate(c: &TunerCandidate, inp: &TuningInputs) -> Result<Objectives, TuneError> {
    let tracks = candidate_tracks(c, inp)?;
    let w = Objectives::WORST;
    let joint = eval::region_metrics(Region::Joint, inp.observed, &tracks, inp.metrics);
    let enp = eval::region_metrics(Region::Enp, inp.observed, &tracks, inp.metrics);
    let wnp = eval::region_metrics(Region::Wnp, inp.observed, &tracks, inp.metrics);
    Ok(Objectives {
        pod: joint.pod.unwrap_or(w.pod),
        far: joint.far.unwrap_or(w.far),
        r_enp: enp.iav_pearson_detrended.unwrap_or(w.r_enp),
        r_wnp: wnp.iav_pearson_detrended.unwrap_or(w.r_wnp),
    })
}

fn evaluate_all(mut cands: Vec<TunerCandidate>, inp: &TuningInputs, exec: Exec) -> Result<Vec<TunerCandidate>, TuneError> {
    let metrics = exec.map(&cands, |c| evaluate_candidate(c, inp));
    for (c, m) in cands.iter_mut().zip(metrics) {
        c.metrics = Some(m?);
    }
    Ok(cands)
}

/// First tuning phase: every (match, track) threshold pair of the grid on
/// top of `template`.
pub fn threshold_sweep(
    grid: &TunerGrid,
    template: &TunerCandidate,
    inp: &TuningInputs,
    exec: Exec,
) -> Result<Vec<TunerCandidate>, TuneError> {
    let mut cands = Vec::new();
    for &m in &dedup_sorted(&grid.sweep_match_thresholds) {
        for &t in &dedup_sorted(&grid.sweep_track_thresholds) {
            if t < inp.base.low_score_floor || t >= 1.0 {
                continue;
            }
            cands.push(TunerCandidate { match_threshold: m, track_threshold: t, metrics: None, ..template.clone() });
        }
    }
    evaluate_all(cands, inp, exec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningReport {
    pub candidates: Vec<TunerCandidate>,
    pub on_frontier: Vec<bool>,
    /// Index into `candidates`.
    pub selected: usize,
    /// Constraint sets dropped for lack of a land mask.
    pub skipped: Vec<ConstraintSet>,
}

/// Second tuning phase: evaluate the whole grid, take the frontier and
/// pick the weighted optimum.
pub fn run_tuning(grid: &TunerGrid, weights: &Weights, inp: &TuningInputs, exec: Exec) -> Result<TuningReport, TuneError> {
    weights.validate()?;
    let mut g = grid.clone();
    let mut skipped = Vec::new();
    if inp.land.is_none() {
        skipped = dedup_sorted(&g.constraint_sets).into_iter().filter(|c| c.rejects_land()).collect();
        if !skipped.is_empty() {
            warn!("no land mask given; skipping constraint sets {:?}", skipped.iter().map(|c| c.as_str()).collect::<Vec<_>>());
        }
        g.constraint_sets.retain(|c| !c.rejects_land());
    }
    let candidates = evaluate_all(enumerate_candidates(&g), inp, exec)?;
    rank_candidates(candidates, weights, skipped)
}

/// Frontier flags and weighted selection over already evaluated candidates.
pub fn rank_candidates(
    candidates: Vec<TunerCandidate>,
    weights: &Weights,
    skipped: Vec<ConstraintSet>,
) -> Result<TuningReport, TuneError> {
    weights.validate()?;
    if candidates.is_empty() {
        return Err(TuneError::EmptyFrontier);
    }
    let objs = candidates.iter().enumerate().map(|(i, c)| c.objectives(i)).collect::<Result<Vec<_>, _>>()?;
    let front = pareto_indices(&objs);
    let mut on_frontier = vec![false; candidates.len()];
    front.iter().for_each(|&i| on_frontier[i] = true);
    let fc: Vec<TunerCandidate> = front.iter().map(|&i| candidates[i].clone()).collect();
    let selected = front[weighted_select(&fc, weights)?];
    Ok(TuningReport { candidates, on_frontier, selected, skipped })
}
