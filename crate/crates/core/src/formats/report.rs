//! Report tables consumed by the plotting scripts.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::csvs::enum_from_str;
use super::{fx, io_err, FormatError, GridFile};
use crate::data::{GridSeries, MSLP};
use crate::eval::{MetricsReport, Quartiles};
use crate::geo::GridSpec;
use crate::time::format_iso;
use crate::track::Track;
use crate::tune::{ConstraintSet, Objectives, TunerCandidate, TuningReport};

fn opt(v: Option<f64>) -> String {
    v.map(fx).unwrap_or_else(|| "undefined".into())
}

fn write_text(path: &Path, text: &str) -> Result<(), FormatError> {
    fs::write(path, text).map_err(io_err(path))
}

fn write_csv<const N: usize>(path: &Path, header: [&str; N], rows: Vec<[String; N]>) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(io_err(path))
}

fn quartile_lines(out: &mut String, key: &str, q: &Option<Quartiles>) {
    let (a, b, c) = q.map(|q| (Some(q.q1), Some(q.median), Some(q.q3))).unwrap_or_default();
    let _ = writeln!(out, "{key}.q1 = {}\n{key}.median = {}\n{key}.q3 = {}", opt(a), opt(b), opt(c));
}

/// `summary.txt`, `metrics.json` and the five CSV tables.
pub fn write_metrics_report(dir: &Path, r: &MetricsReport) -> Result<(), FormatError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut s = String::new();
    for m in &r.regions {
        let k = m.region.as_str();
        let _ = writeln!(s, "{k}.observed = {}\n{k}.detected = {}", m.observed, m.detected);
        let _ = writeln!(s, "{k}.hits = {}\n{k}.misses = {}\n{k}.false_alarms = {}", m.hits, m.misses, m.false_alarms);
        let _ = writeln!(s, "{k}.pod = {}\n{k}.far = {}", opt(m.pod), opt(m.far));
        let _ = writeln!(s, "{k}.iav_pearson_detrended = {}", opt(m.iav_pearson_detrended));
    }
    let so = &r.smoothness_observed;
    let sd = &r.smoothness_detected;
    quartile_lines(&mut s, "smoothness.observed", &so.quartiles);
    quartile_lines(&mut s, "smoothness.detected", &sd.quartiles);
    let _ = writeln!(s, "smoothness.observed.excluded = {}\nsmoothness.detected.excluded = {}", so.excluded, sd.excluded);
    let _ = writeln!(s, "latlon_pairs = {}", r.latlon_pairs.len());
    write_text(&dir.join("summary.txt"), &s)?;
    write_text(&dir.join("metrics.json"), &(serde_json::to_string_pretty(r)? + "\n"))?;

    let iav = r
        .regions
        .iter()
        .flat_map(|m| m.iav.iter().map(move |(y, o, d)| [m.region.as_str().to_string(), y.to_string(), o.to_string(), d.to_string()]))
        .collect();
    write_csv(&dir.join("iav.csv"), ["region", "year", "observed", "detected"], iav)?;

    let days: std::collections::BTreeSet<usize> =
        r.duration_hist_observed.keys().chain(r.duration_hist_detected.keys()).copied().collect();
    let dur = days
        .into_iter()
        .map(|d| {
            let g = |h: &std::collections::BTreeMap<usize, usize>| h.get(&d).copied().unwrap_or(0).to_string();
            [d.to_string(), g(&r.duration_hist_observed), g(&r.duration_hist_detected)]
        })
        .collect();
    write_csv(&dir.join("duration_hist.csv"), ["days", "observed", "detected"], dur)?;

    let sm = [("observed", so), ("detected", sd)]
        .into_iter()
        .flat_map(|(src, st)| st.per_track.iter().map(move |(id, v)| [src.to_string(), id.clone(), fx(*v)]))
        .collect();
    write_csv(&dir.join("smoothness.csv"), ["source", "track_id", "sigma_deg"], sm)?;

    let seas = (0..12)
        .map(|m| [(m + 1).to_string(), r.seasonal_observed[m].to_string(), r.seasonal_detected[m].to_string()])
        .collect();
    write_csv(&dir.join("seasonal.csv"), ["month", "observed", "detected"], seas)?;

    let ll = r
        .latlon_pairs
        .iter()
        .map(|p| {
            [
                format_iso(&p.time),
                fx(p.observed.lat),
                fx(p.observed.lon),
                fx(p.predicted.lat),
                fx(p.predicted.lon),
                p.msw.map(fx).unwrap_or_default(),
            ]
        })
        .collect();
    write_csv(&dir.join("latlon_scatter.csv"), ["iso_time", "true_lat", "true_lon", "pred_lat", "pred_lon", "msw"], ll)
}

/// Ranked candidate table plus the selected configuration.
pub fn write_tuning_report(dir: &Path, r: &TuningReport) -> Result<(), FormatError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let rows = r
        .candidates
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let m = c.metrics.unwrap_or(Objectives::WORST);
            [
                i.to_string(),
                c.bbox_size.to_string(),
                c.track_buffer.to_string(),
                fx(c.match_threshold),
                fx(c.track_threshold),
                c.constraint_set.as_str().to_string(),
                fx(m.pod),
                fx(m.far),
                fx(m.r_enp),
                fx(m.r_wnp),
                (r.on_frontier[i] as u8).to_string(),
                ((i == r.selected) as u8).to_string(),
            ]
        })
        .collect();
    let header = [
        "index", "bbox_size", "track_buffer", "match_threshold", "track_threshold", "constraint_set", "pod", "far",
        "r_enp", "r_wnp", "frontier", "selected",
    ];
    write_csv(&dir.join("tuning.csv"), header, rows)?;
    let c = &r.candidates[r.selected];
    let m = c.metrics.unwrap_or(Objectives::WORST);
    let mut s = String::new();
    let _ = writeln!(s, "candidates = {}\nfrontier = {}", r.candidates.len(), r.on_frontier.iter().filter(|f| **f).count());
    let skipped: Vec<&str> = r.skipped.iter().map(|c| c.as_str()).collect();
    let _ = writeln!(s, "skipped_constraint_sets = {}", skipped.join(" "));
    let _ = writeln!(s, "selected.index = {}\nselected.bbox_size = {}\nselected.track_buffer = {}", r.selected, c.bbox_size, c.track_buffer);
    let _ = writeln!(s, "selected.match_threshold = {}\nselected.track_threshold = {}", fx(c.match_threshold), fx(c.track_threshold));
    let _ = writeln!(s, "selected.constraint_set = {}", c.constraint_set.as_str());
    let _ = writeln!(s, "selected.pod = {}\nselected.far = {}\nselected.r_enp = {}\nselected.r_wnp = {}", fx(m.pod), fx(m.far), fx(m.r_enp), fx(m.r_wnp));
    write_text(&dir.join("summary.txt"), &s)?;
    write_text(&dir.join("tuning.json"), &(serde_json::to_string_pretty(r)? + "\n"))
}

#[derive(serde::Deserialize)]
struct CandidateRow {
    bbox_size: u32,
    track_buffer: u32,
    match_threshold: f64,
    track_threshold: f64,
    constraint_set: String,
    pod: f64,
    far: f64,
    r_enp: f64,
    r_wnp: f64,
}

/// Candidates with precomputed objectives, in the column layout of
/// `tuning.csv`; extra columns (index, frontier, selected) are ignored.
pub fn read_tuning_candidates(path: &Path) -> Result<Vec<TunerCandidate>, FormatError> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in r.deserialize() {
        let row: CandidateRow = row?;
        let constraint_set: ConstraintSet = enum_from_str(path, &row.constraint_set, "constraint set")?;
        out.push(TunerCandidate {
            bbox_size: row.bbox_size,
            track_buffer: row.track_buffer,
            match_threshold: row.match_threshold,
            track_threshold: row.track_threshold,
            constraint_set,
            metrics: Some(Objectives { pod: row.pod, far: row.far, r_enp: row.r_enp, r_wnp: row.r_wnp }),
        });
    }
    Ok(out)
}

/// Per-track overlay bundles: `<dir>/<track_id>/points.csv` and a
/// `background` grid holding the minimum MSLP over the track's lifetime,
/// cropped to the track's extent plus `margin_cells`.
pub fn write_overlays(dir: &Path, series: &GridSeries, tracks: &[Track], margin_cells: usize) -> Result<(), FormatError> {
    let spec = &series.spec;
    for t in tracks.iter().filter(|t| !t.is_empty()) {
        let tdir = dir.join(&t.id);
        fs::create_dir_all(&tdir).map_err(io_err(&tdir))?;
        let span = t.points[0].time..=t.points[t.len() - 1].time;
        let steps: Vec<usize> = (0..series.len()).filter(|&k| span.contains(&series.timestamps[k])).collect();
        let clamp_r = |v: f64| v.round().clamp(0.0, spec.rows as f64 - 1.0) as usize;
        let clamp_c = |v: f64| v.round().clamp(0.0, spec.cols as f64 - 1.0) as usize;
        let pts = t
            .points
            .iter()
            .map(|p| {
                let mslp = series
                    .timestamps
                    .iter()
                    .position(|x| *x == p.time)
                    .map(|k| fx(series.frames[k].get(MSLP, clamp_r(p.row), clamp_c(p.col)) as f64))
                    .unwrap_or_default();
                [format_iso(&p.time), fx(p.geo.lat), fx(p.geo.lon), fx(p.row), fx(p.col), fx(p.score), mslp]
            })
            .collect();
        write_csv(&tdir.join("points.csv"), ["iso_time", "lat", "lon", "row", "col", "score", "mslp_center"], pts)?;
        let (rmin, rmax) = t.points.iter().fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.row), b.max(p.row)));
        let (cmin, cmax) = t.points.iter().fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.col), b.max(p.col)));
        let (r0, r1) = (clamp_r(rmin).saturating_sub(margin_cells), (clamp_r(rmax) + margin_cells).min(spec.rows - 1));
        let (c0, c1) = (clamp_c(cmin).saturating_sub(margin_cells), (clamp_c(cmax) + margin_cells).min(spec.cols - 1));
        let sub = GridSpec {
            lat0: spec.lat0 - r0 as f64 * spec.d,
            lon0: spec.lon0 + c0 as f64 * spec.d,
            d: spec.d,
            rows: r1 - r0 + 1,
            cols: c1 - c0 + 1,
        };
        let mut bg = crate::data::Frame::zeros(1, sub.rows, sub.cols);
        for r in 0..sub.rows {
            for c in 0..sub.cols {
                let m = steps.iter().map(|&k| series.frames[k].get(MSLP, r0 + r, c0 + c)).fold(f32::INFINITY, f32::min);
                bg.set(0, r, c, if m.is_finite() { m } else { f32::NAN });
            }
        }
        super::write_grid(&tdir.join("background"), &GridFile { spec: sub, vars: vec!["mslp_min".into()], steps: vec![(None, bg)] })?;
    }
    Ok(())
}
