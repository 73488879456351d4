//! Run configuration: one TOML file plus command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tctrack_core::detect::DetectorParams;
use tctrack_core::eval::MetricsConfig;
use tctrack_core::nn::{ArchConfig, FitConfig, Head, OptimConfig};
use tctrack_core::synth::ScenarioConfig;
use tctrack_core::track::ByteParams;
use tctrack_core::tune::{TunerGrid, Weights};
use tctrack_core::GridSpec;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Portable grid directory of the (RV850, MSLP) fields.
    pub grids: PathBuf,
    /// Best-track CSV; used as the observations when present.
    pub best_track: PathBuf,
    /// Tracks-format file of observations, used when `best_track` is absent.
    pub truth_tracks: PathBuf,
    pub dataset: PathBuf,
    pub models: PathBuf,
    pub detections: PathBuf,
    pub tracks: PathBuf,
    pub reports: PathBuf,
    pub land_mask: Option<PathBuf>,
    /// Candidate table with precomputed metrics; `tune` then skips evaluation.
    pub tune_candidates: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            grids: "grids".into(),
            best_track: "best_track.csv".into(),
            truth_tracks: "truth_tracks.csv".into(),
            dataset: "dataset".into(),
            models: "models".into(),
            detections: "detections.csv".into(),
            tracks: "tracks.csv".into(),
            reports: "reports".into(),
            land_mask: None,
            tune_candidates: None,
        }
    }
}

impl Paths {
    /// Resolves relative paths against `base`.
    pub fn rebase(&mut self, base: &Path) {
        for p in [
            &mut self.grids,
            &mut self.best_track,
            &mut self.truth_tracks,
            &mut self.dataset,
            &mut self.models,
            &mut self.detections,
            &mut self.tracks,
            &mut self.reports,
        ] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        for p in [&mut self.land_mask, &mut self.tune_candidates].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    Neural,
    Physics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub kind: DetectorKind,
    #[serde(flatten)]
    pub params: DetectorParams,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self { kind: DetectorKind::Neural, params: DetectorParams::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchPreset {
    Desk,
    Paper,
}

impl ArchPreset {
    pub fn config(self, head: Head) -> ArchConfig {
        match self {
            ArchPreset::Desk => ArchConfig::desk(head),
            ArchPreset::Paper => ArchConfig::paper(head),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub arch: ArchPreset,
    pub optimizer: OptimConfig,
    pub classifier: FitConfig,
    pub localizer: FitConfig,
    /// Train on every split instead of only the training years.
    pub use_all_splits: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            arch: ArchPreset::Desk,
            optimizer: OptimConfig::default(),
            classifier: FitConfig::default(),
            localizer: FitConfig { seed: 1, ..FitConfig::default() },
            use_all_splits: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seed of every random choice outside the scenario and training blocks.
    pub seed: u64,
    /// Margin around each track in the overlay export, cells.
    pub overlay_margin_cells: usize,
    /// Analysis grid; also the grid synthetic scenarios are generated on.
    pub grid: GridSpec,
    pub paths: Paths,
    pub synth: ScenarioConfig,
    pub detector: DetectorConfig,
    pub tracker: ByteParams,
    pub metrics: MetricsConfig,
    pub train: TrainConfig,
    pub tuner: TunerGrid,
    pub weights: Weights,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            overlay_margin_cells: 40,
            grid: GridSpec::default(),
            paths: Paths::default(),
            synth: ScenarioConfig::default(),
            detector: DetectorConfig::default(),
            tracker: ByteParams::default(),
            metrics: MetricsConfig::default(),
            train: TrainConfig::default(),
            tuner: TunerGrid::default(),
            weights: Weights::default(),
        }
    }
}

/// Sets `dotted.key` in a TOML table, creating intermediate tables.
fn set_dotted(root: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), CliError> {
    let parts: Vec<&str> = key.split('.').collect();
    let mut t = root;
    for p in &parts[..parts.len() - 1] {
        let entry = t.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        t = entry.as_table_mut().ok_or_else(|| CliError::config(format!("`{p}` in `{key}` is not a table")))?;
    }
    t.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Parses an override value as TOML, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

impl RunConfig {
    #[cfg(test)]
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::config(e.to_string()))
    }

    /// Loads `file` (if any), applies `key=value` overrides, then resolves
    /// relative paths against the config file's directory.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let (mut table, base) = match file {
            Some(f) => {
                let text = std::fs::read_to_string(f).map_err(|e| CliError::io(format!("{}: {e}", f.display())))?;
                let t: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::config(e.to_string()))?;
                (t, f.parent().map(Path::to_path_buf).unwrap_or_default())
            }
            None => (toml::Table::new(), PathBuf::new()),
        };
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| CliError::config(format!("override `{o}` is not key=value")))?;
            set_dotted(&mut table, k.trim(), parse_value(v.trim()))?;
        }
        let mut cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| CliError::config(e.to_string()))?;
        cfg.paths.rebase(&base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.detector.params.validate().map_err(|e| CliError::config(e.to_string()))?;
        self.tracker.validate().map_err(|e| CliError::config(e.to_string()))?;
        self.weights.validate().map_err(|e| CliError::config(e.to_string()))?;
        self.synth.validate().map_err(|e| CliError::config(e.to_string()))?;
        self.grid.validate().map_err(|e| CliError::config(e.to_string()))?;
        if !(1..=12).contains(&self.metrics.iav_month) {
            return Err(CliError::config(format!("iav_month {} is not a month", self.metrics.iav_month)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let c = RunConfig::default();
        let text = c.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn customized_round_trips() {
        let mut c = RunConfig::default();
        c.paths.land_mask = Some("mask".into());
        c.tracker.genesis_lat_max = None;
        c.tracker.track_buffer = 3;
        c.metrics.iav_years = Some((1980, 2019));
        c.detector.kind = DetectorKind::Physics;
        c.tuner.bbox_sizes = vec![21];
        let text = c.to_toml().unwrap();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_toml().unwrap(), text);
    }

    #[test]
    fn overrides_win_and_unknown_keys_fail() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("run.toml");
        std::fs::write(&f, "seed = 4\n[tracker]\ntrack_buffer = 2\n").unwrap();
        let c = RunConfig::load(Some(&f), &["tracker.track_buffer=3".into(), "detector.kind=physics".into()]).unwrap();
        assert_eq!((c.seed, c.tracker.track_buffer, c.detector.kind), (4, 3, DetectorKind::Physics));
        assert_eq!(c.paths.tracks, dir.path().join("tracks.csv"));
        std::fs::write(&f, "[tracker]\nbogus = 1\n").unwrap();
        assert!(RunConfig::load(Some(&f), &[]).is_err());
        assert!(RunConfig::load(None, &["tracker.track_buffer=9".into()]).is_err());
    }
}
