//! Patch tiling, labelling, training-patch selection and augmentation.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BestTrackPoint, DataError, Frame, GridSeries, TrackType};
use crate::exec::Exec;
use crate::geo::{GeoPoint, GridSpec};
use crate::time::Timestamp;

/// Side length of a square patch, in cells.
pub const PATCH: usize = 40;
/// Values in one two-channel patch.
pub const PATCH_PIXELS: usize = 2 * PATCH * PATCH;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatchKind {
    /// Contains a storm center.
    Cyclone,
    /// Negative tile adjacent to a cyclone tile.
    Nearest,
    /// Negative tile drawn at random from the rest of the map.
    Random,
    /// Not (yet) selected for training.
    Background,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Augmentation {
    Rot180,
    HFlip,
    VFlip,
}

impl Augmentation {
    pub const ALL: [Augmentation; 3] = [Augmentation::Rot180, Augmentation::HFlip, Augmentation::VFlip];

    /// Source position that lands on `(r, c)`; every variant is its own
    /// inverse, so this is also the forward map.
    #[inline]
    pub fn map(self, r: usize, c: usize) -> (usize, usize) {
        let m = PATCH - 1;
        match self {
            Augmentation::Rot180 => (m - r, m - c),
            Augmentation::HFlip => (r, m - c),
            Augmentation::VFlip => (m - r, c),
        }
    }
}

/// A 2×40×40 tile of one map.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSample {
    pub map_timestamp: Timestamp,
    pub patch_row: usize,
    pub patch_col: usize,
    pub pixels: Vec<f32>,
    /// In-patch storm center; present exactly for positive samples.
    pub center: Option<(u8, u8)>,
    pub kind: PatchKind,
}

impl PatchSample {
    pub fn background(map_timestamp: Timestamp, patch_row: usize, patch_col: usize, pixels: Vec<f32>) -> Self {
        Self { map_timestamp, patch_row, patch_col, pixels, center: None, kind: PatchKind::Background }
    }

    pub fn label(&self) -> u8 {
        self.center.is_some() as u8
    }

    pub fn channel(&self, var: usize) -> &[f32] {
        &self.pixels[var * PATCH * PATCH..(var + 1) * PATCH * PATCH]
    }

    #[inline]
    pub fn pixel(&self, var: usize, r: usize, c: usize) -> f32 {
        self.pixels[(var * PATCH + r) * PATCH + c]
    }
}

fn check_tiling(rows: usize, cols: usize) -> Result<(usize, usize), DataError> {
    if rows == 0 || cols == 0 || !rows.is_multiple_of(PATCH) || !cols.is_multiple_of(PATCH) {
        return Err(DataError::DimensionMismatch { rows, cols });
    }
    Ok((rows / PATCH, cols / PATCH))
}

/// Splits a map into non-overlapping 40×40 tiles, row-major over tiles.
/// A 280×880 map yields the 7×22 = 154 tiles.
pub fn patchify(frame: &Frame, timestamp: Timestamp) -> Result<Vec<PatchSample>, DataError> {
    let (tr, tc) = check_tiling(frame.rows, frame.cols)?;
    if frame.nvars != 2 {
        return Err(DataError::Shape { expected: "2 variables".into(), got: format!("{}", frame.nvars) });
    }
    let mut out = Vec::with_capacity(tr * tc);
    for i in 0..tr {
        for j in 0..tc {
            let mut px = Vec::with_capacity(PATCH_PIXELS);
            for v in 0..2 {
                for r in 0..PATCH {
                    let start = frame.idx(v, i * PATCH + r, j * PATCH);
                    px.extend_from_slice(&frame.data[start..start + PATCH]);
                }
            }
            out.push(PatchSample::background(timestamp, i, j, px));
        }
    }
    Ok(out)
}

/// Inverse of [`patchify`].
pub fn reassemble(patches: &[PatchSample], rows: usize, cols: usize) -> Result<Frame, DataError> {
    check_tiling(rows, cols)?;
    let mut f = Frame::zeros(2, rows, cols);
    for p in patches {
        for v in 0..2 {
            for r in 0..PATCH {
                let dst = f.idx(v, p.patch_row * PATCH + r, p.patch_col * PATCH);
                let src = (v * PATCH + r) * PATCH;
                f.data[dst..dst + PATCH].copy_from_slice(&p.pixels[src..src + PATCH]);
            }
        }
    }
    Ok(f)
}

/// Marks the tiles that contain a storm center.
///
/// Centers are snapped to the nearest grid cell; the owning tile is
/// `(row / 40, col / 40)`. When several centers fall in one tile the first
/// one wins. Returns the labelled patches and the number of centers that
/// fell outside the grid.
pub fn label_patches(
    mut patches: Vec<PatchSample>,
    centers: &[GeoPoint],
    spec: &GridSpec,
) -> (Vec<PatchSample>, usize) {
    let mut skipped = 0;
    for c in centers {
        let Ok((row, col)) = spec.geo_to_grid(*c) else {
            skipped += 1;
            continue;
        };
        let (pi, pj) = (row / PATCH, col / PATCH);
        let Some(p) = patches.iter_mut().find(|p| p.patch_row == pi && p.patch_col == pj) else {
            skipped += 1;
            continue;
        };
        if p.center.is_none() {
            p.center = Some(((row % PATCH) as u8, (col % PATCH) as u8));
            p.kind = PatchKind::Cyclone;
        }
    }
    (patches, skipped)
}

/// All tiles of one map after labelling.
#[derive(Debug, Clone)]
pub struct LabeledMap {
    pub timestamp: Timestamp,
    pub tiles_r: usize,
    pub tiles_c: usize,
    pub patches: Vec<PatchSample>,
}

impl LabeledMap {
    pub fn new(timestamp: Timestamp, tiles_r: usize, tiles_c: usize, patches: Vec<PatchSample>) -> Self {
        Self { timestamp, tiles_r, tiles_c, patches }
    }
}

fn select_from_map(map: &LabeledMap, rng: &mut ChaCha8Rng) -> Vec<PatchSample> {
    let (tr, tc) = (map.tiles_r, map.tiles_c);
    let at = |i: usize, j: usize| map.patches.iter().find(|p| p.patch_row == i && p.patch_col == j);
    let cyclones: Vec<&PatchSample> = map.patches.iter().filter(|p| p.center.is_some()).collect();
    let mut taken = vec![false; tr * tc];
    for p in &cyclones {
        taken[p.patch_row * tc + p.patch_col] = true;
    }

    let mut out: Vec<PatchSample> = cyclones.iter().map(|p| (*p).clone()).collect();
    let mut nearest = Vec::new();
    for p in &cyclones {
        let (cr, cc) = p.center.expect("cyclone patch has a center");
        let gr = (p.patch_row * PATCH) as f64 + cr as f64;
        let gc = (p.patch_col * PATCH) as f64 + cc as f64;
        // Rank free tiles by ring, then distance from the tile center to the
        // storm, then corner tiles first, then position. Tiles beyond the
        // first ring only come in when the map edge leaves fewer than three.
        let mut cands: Vec<(usize, f64, u8, usize, usize)> = Vec::new();
        for i in 0..tr {
            for j in 0..tc {
                if taken[i * tc + j] {
                    continue;
                }
                let ring = (i as i64 - p.patch_row as i64).unsigned_abs().max((j as i64 - p.patch_col as i64).unsigned_abs()) as usize;
                let cy = (i * PATCH) as f64 + (PATCH as f64 - 1.0) / 2.0;
                let cx = (j * PATCH) as f64 + (PATCH as f64 - 1.0) / 2.0;
                let d2 = (cy - gr).powi(2) + (cx - gc).powi(2);
                let corner = u8::from(!(i != p.patch_row && j != p.patch_col));
                cands.push((ring, d2, corner, i, j));
            }
        }
        cands.sort_by(|a, b| {
            a.0.cmp(&b.0)
                .then(a.1.total_cmp(&b.1))
                .then(a.2.cmp(&b.2))
                .then((a.3, a.4).cmp(&(b.3, b.4)))
        });
        for &(_, _, _, i, j) in cands.iter().take(3) {
            taken[i * tc + j] = true;
            if let Some(t) = at(i, j) {
                let mut s = t.clone();
                s.kind = PatchKind::Nearest;
                nearest.push(s);
            }
        }
    }
    out.extend(nearest);

    for _ in &cyclones {
        let free: Vec<usize> = (0..tr * tc).filter(|&k| !taken[k]).collect();
        if free.is_empty() {
            break;
        }
        let k = free[rng.random_range(0..free.len())];
        taken[k] = true;
        if let Some(t) = at(k / tc, k % tc) {
            let mut s = t.clone();
            s.kind = PatchKind::Random;
            out.push(s);
        }
    }
    out
}

/// Builds the cyclone / nearest / random training set.
///
/// Each map draws from its own ChaCha stream (`seed`, map index), so the
/// result does not depend on the execution mode.
pub fn select_training_patches(maps: &[LabeledMap], seed: u64, exec: Exec) -> Vec<PatchSample> {
    exec.map_range(maps.len(), |k| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        select_from_map(&maps[k], &mut rng)
    })
    .into_iter()
    .flatten()
    .collect()
}

/// Rotated-180, horizontally flipped and vertically flipped copies of a
/// positive sample, in that order.
pub fn augment(sample: &PatchSample) -> Result<[PatchSample; 3], DataError> {
    let (cr, cc) = sample.center.ok_or(DataError::NegativeSample)?;
    Ok(Augmentation::ALL.map(|a| {
        let mut px = vec![0.0f32; PATCH_PIXELS];
        for v in 0..2 {
            for r in 0..PATCH {
                for c in 0..PATCH {
                    let (sr, sc) = a.map(r, c);
                    px[(v * PATCH + r) * PATCH + c] = sample.pixel(v, sr, sc);
                }
            }
        }
        let (nr, nc) = a.map(cr as usize, cc as usize);
        PatchSample { pixels: px, center: Some((nr as u8, nc as u8)), ..sample.clone() }
    }))
}

/// Patchify, label and select over a whole series, then append the three
/// augmented copies of every positive. Only main-type best-track points are
/// used. Returns the dataset and the number of centers outside the grid.
pub fn assemble_dataset(
    series: &GridSeries,
    best_track: &[BestTrackPoint],
    seed: u64,
    exec: Exec,
) -> Result<(Vec<PatchSample>, usize), DataError> {
    let mut by_time: BTreeMap<Timestamp, Vec<GeoPoint>> = BTreeMap::new();
    for p in best_track.iter().filter(|p| p.track_type == TrackType::Main) {
        by_time.entry(p.timestamp).or_default().push(p.center);
    }
    let (tr, tc) = check_tiling(series.spec.rows, series.spec.cols)?;
    let labeled = exec.map_range(series.len(), |k| -> Result<(LabeledMap, usize), DataError> {
        let ts = series.timestamps[k];
        let tiles = patchify(&series.frames[k], ts)?;
        let centers = by_time.get(&ts).map(Vec::as_slice).unwrap_or(&[]);
        let (patches, skipped) = label_patches(tiles, centers, &series.spec);
        Ok((LabeledMap::new(ts, tr, tc, patches), skipped))
    });
    let mut maps = Vec::with_capacity(labeled.len());
    let mut skipped = 0;
    for r in labeled {
        let (m, s) = r?;
        skipped += s;
        // Maps without storms contribute nothing.
        if m.patches.iter().any(|p| p.center.is_some()) {
            maps.push(m);
        }
    }
    let mut samples = select_training_patches(&maps, seed, exec);
    let augmented: Vec<PatchSample> = samples
        .iter()
        .filter(|s| s.center.is_some())
        .flat_map(|s| augment(s).expect("positive sample"))
        .collect();
    samples.extend(augmented);
    Ok((samples, skipped))
}
