//! BYTE: two-round association of high- and low-score detections.

use super::{iou, solve_assignment, BBox, ByteParams, MotionModel, Track, TrackError, TrackPoint, TrackState};
use crate::detect::Detection;
use crate::geo::haversine_km;
use crate::time::{self, Timestamp};

/// Box where `track` is expected on its next frame.
///
/// With constant velocity the per-frame displacement between the last two
/// points is extrapolated over the frames elapsed since the last match.
pub fn predict_box(track: &Track, motion: MotionModel, bbox_size: u32) -> BBox {
    let last = track.points.last().expect("track has at least one point");
    let (mut row, mut col) = (last.row, last.col);
    if motion == MotionModel::ConstantVelocity && track.points.len() >= 2 {
        let prev = &track.points[track.points.len() - 2];
        let frames = time::steps_between(&prev.time, &last.time).unwrap_or(1).max(1) as f64;
        let ahead = (track.frames_since_match + 1) as f64;
        row += (last.row - prev.row) / frames * ahead;
        col += (last.col - prev.col) / frames * ahead;
    }
    BBox::new(row, col, bbox_size)
}

/// Tracker state between frames.
#[derive(Debug, Clone)]
pub struct ByteTracker {
    params: ByteParams,
    /// Active and lost tracks, in creation order.
    live: Vec<Track>,
    finished: Vec<Track>,
    next_id: u64,
    last_time: Option<Timestamp>,
}

impl ByteTracker {
    pub fn new(params: ByteParams) -> Result<Self, TrackError> {
        params.validate()?;
        Ok(Self { params, live: Vec::new(), finished: Vec::new(), next_id: 1, last_time: None })
    }

    pub fn params(&self) -> &ByteParams {
        &self.params
    }

    pub fn live_tracks(&self) -> &[Track] {
        &self.live
    }

    pub fn finished_tracks(&self) -> &[Track] {
        &self.finished
    }

    fn cost_matrix(&self, rows: &[usize], dets: &[&Detection], bound: f64) -> Vec<Vec<f64>> {
        let p = &self.params;
        rows.iter()
            .map(|&ti| {
                let t = &self.live[ti];
                let pred = predict_box(t, p.motion, p.bbox_size);
                let last = t.last().expect("live track has points");
                dets.iter()
                    .map(|d| {
                        let c = 1.0 - iou(&pred, &d.bbox(p.bbox_size));
                        if c > bound || haversine_km(last.geo, d.geo) > p.max_displacement_km {
                            f64::INFINITY
                        } else {
                            c
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Advances the tracker by one 6-hourly frame.
    pub fn step(&mut self, time: Timestamp, dets: &[Detection]) -> Result<(), TrackError> {
        if let Some(last) = self.last_time {
            if time <= last {
                return Err(TrackError::OutOfOrder { last: time::format_iso(&last), got: time::format_iso(&time) });
            }
            if time::steps_between(&last, &time) != Some(1) {
                return Err(TrackError::Cadence(time::format_iso(&last), time::format_iso(&time)));
            }
        }
        self.last_time = Some(time);
        let p = self.params.clone();

        let high: Vec<&Detection> = dets.iter().filter(|d| d.score >= p.track_threshold).collect();
        let low: Vec<&Detection> =
            dets.iter().filter(|d| d.score >= p.low_score_floor && d.score < p.track_threshold).collect();

        // Round 1: every live track against the high-score detections.
        let all: Vec<usize> = (0..self.live.len()).collect();
        let first = solve_assignment(&self.cost_matrix(&all, &high, p.match_threshold), p.match_threshold);
        let mut matched: Vec<Option<&Detection>> = vec![None; self.live.len()];
        let mut high_used = vec![false; high.len()];
        for &(r, c, _) in &first.matches {
            matched[r] = Some(high[c]);
            high_used[c] = true;
        }

        // Round 2: tracks that were active before this frame against the
        // low-score detections, with a stricter bound.
        let bound2 = p.match_threshold.min(0.5);
        let second_rows: Vec<usize> = first
            .unmatched_rows
            .iter()
            .copied()
            .filter(|&r| self.live[r].state == TrackState::Active)
            .collect();
        let second = solve_assignment(&self.cost_matrix(&second_rows, &low, bound2), bound2);
        for &(r, c, _) in &second.matches {
            matched[second_rows[r]] = Some(low[c]);
        }

        let mut keep = Vec::with_capacity(self.live.len());
        for (mut t, m) in std::mem::take(&mut self.live).into_iter().zip(matched) {
            match m {
                Some(d) => {
                    t.points.push(point_of(d));
                    t.state = TrackState::Active;
                    t.frames_since_match = 0;
                    keep.push(t);
                }
                None => {
                    t.frames_since_match += 1;
                    if t.frames_since_match > p.track_buffer {
                        t.state = TrackState::Finished;
                        self.finished.push(t);
                    } else {
                        t.state = TrackState::Lost;
                        keep.push(t);
                    }
                }
            }
        }
        self.live = keep;

        // Unmatched high-score detections open new tracks; low ones never do.
        for c in (0..high.len()).filter(|&c| !high_used[c]) {
            let id = format!("{:06}", self.next_id);
            self.next_id += 1;
            self.live.push(Track {
                id,
                basin: None,
                points: vec![point_of(high[c])],
                state: TrackState::Active,
                frames_since_match: 0,
            });
        }
        Ok(())
    }

    /// Finishes every live track; output is ordered by genesis time, then id.
    pub fn finish(mut self) -> Vec<Track> {
        for mut t in self.live.drain(..) {
            t.state = TrackState::Finished;
            self.finished.push(t);
        }
        let mut out = self.finished;
        out.sort_by(|a, b| {
            let ga = a.genesis().map(|p| p.time);
            let gb = b.genesis().map(|p| p.time);
            ga.cmp(&gb).then_with(|| a.id.cmp(&b.id))
        });
        out
    }
}

fn point_of(d: &Detection) -> TrackPoint {
    TrackPoint { time: d.time, geo: d.geo, row: d.row, col: d.col, score: d.score, msw: None }
}

/// Runs the tracker over a time-ordered detection stream. Missing 6-hourly
/// frames between the given timestamps are treated as empty frames.
pub fn run_tracker(frames: &[(Timestamp, Vec<Detection>)], params: &ByteParams) -> Result<Vec<Track>, TrackError> {
    let mut tracker = ByteTracker::new(params.clone())?;
    let mut prev: Option<Timestamp> = None;
    for (t, dets) in frames {
        time::check_synoptic(t).map_err(|_| TrackError::Cadence(time::format_iso(t), time::format_iso(t)))?;
        if let Some(pt) = prev {
            if *t <= pt {
                return Err(TrackError::OutOfOrder { last: time::format_iso(&pt), got: time::format_iso(t) });
            }
            let gap = time::steps_between(&pt, t)
                .ok_or_else(|| TrackError::Cadence(time::format_iso(&pt), time::format_iso(t)))?;
            for k in 1..gap {
                tracker.step(pt + time::step() * k as i32, &[])?;
            }
        }
        tracker.step(*t, dets)?;
        prev = Some(*t);
    }
    Ok(tracker.finish())
}
