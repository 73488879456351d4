//! The nine pipeline stages. Each reads its declared inputs from the paths
//! in [`RunConfig`] and writes its outputs there; nothing else is touched.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use tctrack_core::data::{assemble_dataset, observed_tracks, split_dataset, NormStats, PatchSample};
use tctrack_core::detect::{detect_series, Detector, FileDetector, NeuralDetector, PhysicsDetector};
use tctrack_core::eval::{evaluate, match_tracks, Region};
use tctrack_core::formats;
use tctrack_core::nn::{fit, load_network, save_network, AdamW, FitConfig, FitReport, Head, Network};
use tctrack_core::synth::{generate, ScenarioConfig};
use tctrack_core::track::{apply_physical_filters, run_tracker, Track};
use tctrack_core::tune::{rank_candidates, run_tuning, TuningInputs};
use tctrack_core::Exec;

use crate::config::{DetectorKind, RunConfig};
use crate::error::{CliError, ErrorKind};

pub const CLASSIFIER_FILE: &str = "classifier.model";
pub const LOCALIZER_FILE: &str = "localizer.model";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";
pub const MATCH_FILE: &str = "match.csv";
pub const METRICS_DIR: &str = "metrics";
pub const TUNING_DIR: &str = "tuning";
pub const OVERLAY_DIR: &str = "overlays";

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => {
            fs::create_dir_all(p).map_err(|e| CliError::io(format!("{}: {e}", p.display())))
        }
        _ => Ok(()),
    }
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    ensure_parent(path)?;
    fs::write(path, text).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

/// Sidecar holding one summary row per track next to the tracks file.
pub fn summary_path(tracks: &Path) -> PathBuf {
    tracks.with_extension("summary.csv")
}

/// Observations: the best-track CSV when it exists, else the truth tracks.
fn load_observed(cfg: &RunConfig) -> Result<Vec<Track>, CliError> {
    let p = &cfg.paths;
    if p.best_track.exists() {
        Ok(observed_tracks(&formats::read_best_track(&p.best_track)?, &cfg.grid))
    } else if p.truth_tracks.exists() {
        Ok(formats::read_tracks(&p.truth_tracks, &cfg.grid)?)
    } else {
        Err(CliError::io(format!(
            "no observations: neither {} nor {} exists",
            p.best_track.display(),
            p.truth_tracks.display()
        )))
    }
}

fn load_land(cfg: &RunConfig) -> Result<Option<tctrack_core::data::LandMask>, CliError> {
    cfg.paths.land_mask.as_deref().map(formats::read_land_mask).transpose().map_err(CliError::from)
}

fn load_frames(cfg: &RunConfig) -> Result<Vec<(tctrack_core::Timestamp, Vec<tctrack_core::detect::Detection>)>, CliError> {
    Ok(FileDetector::new(formats::read_detections(&cfg.paths.detections)?).frames())
}

/// Synthetic grids, truth tracks and the matching best-track CSV.
pub fn synth(cfg: &RunConfig, exec: Exec) -> Result<(), CliError> {
    let sc = ScenarioConfig { grid: cfg.grid, ..cfg.synth.clone() };
    let scenario = generate(&sc, exec)?;
    formats::write_series(&cfg.paths.grids, &scenario.series)?;
    ensure_parent(&cfg.paths.truth_tracks)?;
    formats::write_tracks(&cfg.paths.truth_tracks, &scenario.truth())?;
    ensure_parent(&cfg.paths.best_track)?;
    formats::write_best_track(&cfg.paths.best_track, &scenario.best_track())?;
    let hidden: usize = scenario.storms.iter().map(|s| s.hidden.len()).sum();
    info!("synth: {} storms over {} steps, {hidden} hidden signatures", scenario.storms.len(), scenario.series.len());
    Ok(())
}

/// Labeled, selected and augmented training patches.
pub fn patchify(cfg: &RunConfig, exec: Exec) -> Result<(), CliError> {
    let series = formats::read_series(&cfg.paths.grids)?;
    let best = formats::read_best_track(&cfg.paths.best_track)?;
    let (samples, skipped) = assemble_dataset(&series, &best, cfg.seed, exec)?;
    if skipped > 0 {
        warn!("patchify: {skipped} best-track centers fall outside the grid");
    }
    formats::write_dataset(&cfg.paths.dataset, &samples)?;
    info!("patchify: {} samples", samples.len());
    Ok(())
}

fn train_head(
    cfg: &RunConfig,
    head: Head,
    samples: &[PatchSample],
    norm: NormStats,
    fit_cfg: &FitConfig,
    exec: Exec,
) -> Result<(Network, FitReport), CliError> {
    if samples.is_empty() {
        return Err(CliError::compute(format!("no {} training samples", head.as_str())));
    }
    let mut net = Network::build(cfg.train.arch.config(head), fit_cfg.seed)?;
    net.norm = norm;
    let mut opt = AdamW::new(cfg.train.optimizer, net.param_count());
    let report = fit(&mut net, samples, fit_cfg, &mut opt, exec)?;
    info!("train: {} head, {} steps, final loss {:.6}", head.as_str(), report.losses.len(), report.final_loss);
    Ok((net, report))
}

/// Classifier on all training patches, localizer on the positives; both
/// share the standardization fitted on the training patches.
pub fn train(cfg: &RunConfig, exec: Exec) -> Result<(), CliError> {
    let all = formats::read_dataset(&cfg.paths.dataset)?;
    let samples = if cfg.train.use_all_splits {
        all
    } else {
        let split = split_dataset(all, |s| s.map_timestamp);
        if split.train.is_empty() {
            return Err(CliError::config(
                "the training years hold no samples; set train.use_all_splits = true to train on everything",
            ));
        }
        split.train
    };
    let norm = NormStats::fit(&samples);
    let positives: Vec<PatchSample> = samples.iter().filter(|s| s.center.is_some()).cloned().collect();
    let (cls, cls_report) = train_head(cfg, Head::Classification, &samples, norm, &cfg.train.classifier, exec)?;
    let (loc, loc_report) = train_head(cfg, Head::Localization, &positives, norm, &cfg.train.localizer, exec)?;
    let dir = &cfg.paths.models;
    create_dir(dir)?;
    save_network(&cls, &dir.join(CLASSIFIER_FILE))?;
    save_network(&loc, &dir.join(LOCALIZER_FILE))?;
    let mut log = String::from("head,step,loss\n");
    for (head, r) in [(Head::Classification, &cls_report), (Head::Localization, &loc_report)] {
        for (i, l) in r.losses.iter().enumerate() {
            let _ = writeln!(log, "{},{},{l:.9}", head.as_str(), i + 1);
        }
        let _ = writeln!(log, "{},final,{:.9}", head.as_str(), r.final_loss);
    }
    write_text(&dir.join(TRAIN_LOG_FILE), &log)
}

/// Storm-center candidates for every map of the series.
pub fn detect(cfg: &RunConfig, exec: Exec) -> Result<(), CliError> {
    let series = formats::read_series(&cfg.paths.grids)?;
    let params = cfg.detector.params;
    let detector: Box<dyn Detector + Sync> = match cfg.detector.kind {
        DetectorKind::Physics => Box::new(PhysicsDetector::new(params)?),
        DetectorKind::Neural => {
            let cls = load_network(&cfg.paths.models.join(CLASSIFIER_FILE))?;
            let loc = load_network(&cfg.paths.models.join(LOCALIZER_FILE))?;
            Box::new(NeuralDetector::new(cls, loc, params)?)
        }
    };
    let frames = detect_series(detector.as_ref(), &series, exec)?;
    let dets: Vec<_> = frames.into_iter().flat_map(|(_, d)| d).collect();
    ensure_parent(&cfg.paths.detections)?;
    formats::write_detections(&cfg.paths.detections, &dets)?;
    info!("detect: {} detections over {} maps", dets.len(), series.len());
    Ok(())
}

/// BYTE association followed by the physical filters.
pub fn track(cfg: &RunConfig) -> Result<(), CliError> {
    let frames = load_frames(cfg)?;
    let land = load_land(cfg)?;
    if cfg.tracker.reject_land_genesis && land.is_none() {
        return Err(CliError::config("tracker.reject_land_genesis needs paths.land_mask"));
    }
    let raw = run_tracker(&frames, &cfg.tracker)?;
    let tracks = apply_physical_filters(raw, &cfg.tracker, land.as_ref())?;
    ensure_parent(&cfg.paths.tracks)?;
    formats::write_tracks(&cfg.paths.tracks, &tracks)?;
    formats::write_track_summary(&summary_path(&cfg.paths.tracks), &tracks)?;
    info!("track: {} tracks", tracks.len());
    Ok(())
}

/// Observed ↔ detected track pairs within the matching radius.
pub fn match_cmd(cfg: &RunConfig) -> Result<(), CliError> {
    let observed = load_observed(cfg)?;
    let detected = formats::read_tracks(&cfg.paths.tracks, &cfg.grid)?;
    let r = match_tracks(&observed, &detected, &cfg.metrics.matching);
    let mut out = String::from("observed_id,detected_id,matched_steps,mean_distance_km\n");
    for p in &r.pairs {
        let _ = writeln!(out, "{},{},{},{:.6}", p.obs_id, p.det_id, p.matched_steps, p.mean_distance_km);
    }
    write_text(&cfg.paths.reports.join(MATCH_FILE), &out)?;
    info!("match: {} hits, {} misses, {} false alarms", r.hits, r.misses, r.false_alarms);
    Ok(())
}

/// Full metric suite; the report is written even when POD or FAR is
/// undefined, which is then signalled through the exit status.
pub fn metrics(cfg: &RunConfig) -> Result<(), CliError> {
    let observed = load_observed(cfg)?;
    let detected = formats::read_tracks(&cfg.paths.tracks, &cfg.grid)?;
    let report = evaluate(&observed, &detected, &cfg.metrics);
    formats::write_metrics_report(&cfg.paths.reports.join(METRICS_DIR), &report)?;
    let joint = report.region(Region::Joint);
    let undefined: Vec<&str> = [("pod", joint.pod), ("far", joint.far)]
        .into_iter()
        .filter(|(_, v)| v.is_none())
        .map(|(k, _)| k)
        .collect();
    if !undefined.is_empty() {
        return Err(CliError::new(
            ErrorKind::UndefinedMetric,
            format!("{} undefined (zero denominator); report written", undefined.join(" and ")),
        ));
    }
    info!("metrics: POD {:.2}% FAR {:.2}%", joint.pod.unwrap_or_default(), joint.far.unwrap_or_default());
    Ok(())
}

/// Grid search, Pareto frontier and weighted selection. With
/// `paths.tune_candidates` set, the precomputed table is ranked instead.
pub fn tune(cfg: &RunConfig, exec: Exec) -> Result<(), CliError> {
    let report = match &cfg.paths.tune_candidates {
        Some(p) => rank_candidates(formats::read_tuning_candidates(p)?, &cfg.weights, Vec::new())?,
        None => {
            let frames = load_frames(cfg)?;
            let observed = load_observed(cfg)?;
            let land = load_land(cfg)?;
            let inp = TuningInputs {
                frames: &frames,
                observed: &observed,
                base: &cfg.tracker,
                land: land.as_ref(),
                metrics: &cfg.metrics,
            };
            run_tuning(&cfg.tuner, &cfg.weights, &inp, exec)?
        }
    };
    formats::write_tuning_report(&cfg.paths.reports.join(TUNING_DIR), &report)?;
    info!("tune: selected candidate {} of {}", report.selected, report.candidates.len());
    Ok(())
}

/// Per-track overlay bundles for the plotting scripts.
pub fn report(cfg: &RunConfig) -> Result<(), CliError> {
    let series = formats::read_series(&cfg.paths.grids)?;
    let tracks = formats::read_tracks(&cfg.paths.tracks, &series.spec)?;
    formats::write_overlays(&cfg.paths.reports.join(OVERLAY_DIR), &series, &tracks, cfg.overlay_margin_cells)?;
    info!("report: {} overlays", tracks.len());
    Ok(())
}
