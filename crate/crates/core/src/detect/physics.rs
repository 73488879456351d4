//! Threshold-free baseline: MSLP minima co-located with cyclonic vorticity.

use super::{dedupe, DetectError, Detection, Detector, DetectorParams};
use crate::data::{Frame, MSLP, RV850};
use crate::geo::GridSpec;
use crate::time::Timestamp;

/// Half-width of the MSLP minimum window (7×7).
const MIN_HALF: usize = 3;
/// Search radius for the vorticity maximum.
const RV_RADIUS: usize = 4;

#[derive(Debug, Clone, Copy, Default)]
pub struct PhysicsDetector {
    pub params: DetectorParams,
}

impl PhysicsDetector {
    pub fn new(params: DetectorParams) -> Result<Self, DetectError> {
        params.validate()?;
        Ok(Self { params })
    }
}

/// Strict minimum of the 7×7 window; equal values are ordered by position
/// so plateaus yield at most one candidate, and a fully flat window none.
fn is_window_min(p: &[f32], cols: usize, r: usize, c: usize) -> bool {
    let v = p[r * cols + c];
    let mut higher = false;
    for y in r - MIN_HALF..=r + MIN_HALF {
        for x in c - MIN_HALF..=c + MIN_HALF {
            if (y, x) == (r, c) {
                continue;
            }
            let u = p[y * cols + x];
            if u < v || (u == v && (y, x) < (r, c)) {
                return false;
            }
            higher |= u > v;
        }
    }
    higher
}

fn has_rv_max_nearby(rv: &[f32], rows: usize, cols: usize, r: usize, c: usize) -> bool {
    let (y0, y1) = (r.saturating_sub(RV_RADIUS), (r + RV_RADIUS).min(rows - 1));
    let (x0, x1) = (c.saturating_sub(RV_RADIUS), (c + RV_RADIUS).min(cols - 1));
    for y in y0..=y1 {
        for x in x0..=x1 {
            let v = rv[y * cols + x];
            if v <= 0.0 {
                continue;
            }
            let mut is_max = true;
            'n: for yy in y.saturating_sub(1)..=(y + 1).min(rows - 1) {
                for xx in x.saturating_sub(1)..=(x + 1).min(cols - 1) {
                    if rv[yy * cols + xx] > v {
                        is_max = false;
                        break 'n;
                    }
                }
            }
            if is_max {
                return true;
            }
        }
    }
    false
}

/// Depth of the low relative to the ring of cells on the border of its
/// bounding box: `(ring mean − center) / (ring max − center)`, clamped to
/// `[0, 1]`. An isolated, symmetric low scores near 1; a dip on a slope
/// scores lower.
fn depth_score(p: &[f32], rows: usize, cols: usize, r: usize, c: usize, half: usize) -> f64 {
    let center = p[r * cols + c] as f64;
    let (mut sum, mut n, mut max) = (0.0f64, 0usize, f64::NEG_INFINITY);
    let (ri, ci, h) = (r as i64, c as i64, half as i64);
    for y in ri - h..=ri + h {
        for x in ci - h..=ci + h {
            if (y - ri).abs().max((x - ci).abs()) != h {
                continue;
            }
            if y < 0 || x < 0 || y >= rows as i64 || x >= cols as i64 {
                continue;
            }
            let v = p[y as usize * cols + x as usize] as f64;
            sum += v;
            n += 1;
            max = max.max(v);
        }
    }
    if n == 0 || max <= center {
        return 0.0;
    }
    ((sum / n as f64 - center) / (max - center)).clamp(0.0, 1.0)
}

impl Detector for PhysicsDetector {
    fn detect_frame(&self, time: Timestamp, frame: &Frame, spec: &GridSpec) -> Result<Vec<Detection>, DetectError> {
        let (rows, cols) = (frame.rows, frame.cols);
        if rows <= 2 * MIN_HALF || cols <= 2 * MIN_HALF {
            return Ok(vec![]);
        }
        let p = frame.plane(MSLP);
        let rv = frame.plane(RV850);
        let half = (self.params.bbox_size / 2) as usize;
        let mut out = Vec::new();
        for r in MIN_HALF..rows - MIN_HALF {
            for c in MIN_HALF..cols - MIN_HALF {
                if !is_window_min(p, cols, r, c) || !has_rv_max_nearby(rv, rows, cols, r, c) {
                    continue;
                }
                let score = depth_score(p, rows, cols, r, c, half);
                out.push(Detection::new(time, r as f64, c as f64, score, spec));
            }
        }
        Ok(dedupe(out, self.params.dedupe_radius_cells))
    }
}
