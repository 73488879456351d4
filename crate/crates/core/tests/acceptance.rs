//! Acceptance suite: one PASS/FAIL line per criterion, each with its pinned
//! tolerance and measured runtime. Run with
//! `cargo test -p tctrack-core --test acceptance -- --nocapture`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tctrack_core::data::{augment, Augmentation, PatchKind, PatchSample, PATCH, PATCH_PIXELS};
use tctrack_core::detect::{detect_series, Detection, PhysicsDetector};
use tctrack_core::eval::{detrended_pearson, evaluate, far, match_tracks, pod, MatchConfig, MetricsConfig, Region};
use tctrack_core::geo::{bearing_deg, bearing_variation_deg, haversine_km, track_smoothness_deg};
use tctrack_core::nn::{
    fit, gradient_check, mae_loss, AdamW, ArchConfig, FitConfig, Head, Network, OptimConfig,
};
use tctrack_core::synth::{generate, synthetic_patches, ScenarioConfig};
use tctrack_core::time::{self, ymdh};
use tctrack_core::track::{apply_physical_filters, run_tracker, solve_assignment, ByteParams, Track, TrackPoint, TrackState};
use tctrack_core::tune::{enumerate_candidates, pareto_frontier, ConstraintSet, Objectives, TunerCandidate, TunerGrid};
use tctrack_core::{Exec, GeoPoint, GridSpec};

type Check = Result<String, String>;
type CheckFn = fn() -> Check;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s, || format!("took {:.1}s, limit {limit_s}s", elapsed.as_secs_f64()))
}

fn geo(lat: f64, lon: f64) -> GeoPoint {
    GeoPoint::new(lat, lon).expect("valid point")
}

fn track_from(id: &str, start: time::Timestamp, pts: &[GeoPoint]) -> Track {
    let spec = GridSpec::default();
    let points = pts
        .iter()
        .enumerate()
        .map(|(k, &g)| {
            let (row, col) = spec.geo_to_cell(g);
            TrackPoint { time: start + time::step() * k as i32, geo: g, row, col, score: 1.0, msw: None }
        })
        .collect();
    Track { id: id.into(), basin: None, points, state: TrackState::Finished, frames_since_match: 0 }
}

// ---------------------------------------------------------------- assignment

fn brute_force_min(cost: &[Vec<f64>]) -> f64 {
    // Minimum over injective maps of the shorter side into the longer one.
    let (n, m) = (cost.len(), cost[0].len());
    let tall = n > m;
    let (k, l) = if tall { (m, n) } else { (n, m) };
    let at = |i: usize, j: usize| if tall { cost[j][i] } else { cost[i][j] };
    fn rec(i: usize, k: usize, l: usize, used: &mut Vec<bool>, at: &dyn Fn(usize, usize) -> f64) -> f64 {
        if i == k {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for j in 0..l {
            if !used[j] {
                used[j] = true;
                best = best.min(at(i, j) + rec(i + 1, k, l, used, at));
                used[j] = false;
            }
        }
        best
    }
    rec(0, k, l, &mut vec![false; l], &at)
}

fn assignment_oracle() -> Check {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..1000 {
        let (n, m) = (rng.random_range(1..=5), rng.random_range(1..=5));
        // Dyadic costs keep every sum exact, so equality is exact.
        let cost: Vec<Vec<f64>> =
            (0..n).map(|_| (0..m).map(|_| rng.random_range(0..800) as f64 / 8.0).collect()).collect();
        let r = solve_assignment(&cost, f64::INFINITY);
        let want = brute_force_min(&cost);
        ensure(r.matches.len() == n.min(m), || format!("trial {trial}: {} pairs for {n}x{m}", r.matches.len()))?;
        ensure(r.total_cost() == want, || format!("trial {trial}: cost {} vs optimum {want}", r.total_cost()))?;
    }
    within(t.elapsed(), 5.0)?;
    Ok(format!("1000 matrices up to 5x5, exact equality, {:.2}s < 5s", t.elapsed().as_secs_f64()))
}

// ------------------------------------------------------------------- geodesy

/// Initial great-circle heading from 3-D unit vectors: the chord `b - a`
/// projected on the local east and north directions at `a`.
fn vector_bearing(a: GeoPoint, b: GeoPoint) -> f64 {
    let (p, l) = (a.lat.to_radians(), a.lon.to_radians());
    let (q, m) = (b.lat.to_radians(), b.lon.to_radians());
    let va = [p.cos() * l.cos(), p.cos() * l.sin(), p.sin()];
    let vb = [q.cos() * m.cos(), q.cos() * m.sin(), q.sin()];
    let d = [vb[0] - va[0], vb[1] - va[1], vb[2] - va[2]];
    let east = [-l.sin(), l.cos(), 0.0];
    let north = [-p.sin() * l.cos(), -p.sin() * l.sin(), p.cos()];
    let dot = |x: [f64; 3], y: [f64; 3]| x[0] * y[0] + x[1] * y[1] + x[2] * y[2];
    dot(d, east).atan2(dot(d, north)).to_degrees().rem_euclid(360.0)
}

fn geodesy_goldens() -> Check {
    let o = geo(0.0, 0.0);
    let d1 = haversine_km(o, geo(0.0, 1.0));
    ensure((d1 - 111.195).abs() <= 0.001, || format!("haversine 1°E = {d1}"))?;
    let dq = haversine_km(o, geo(90.0, 0.0));
    ensure((dq - 10007.543).abs() <= 0.01, || format!("haversine pole = {dq}"))?;
    ensure(haversine_km(o, o) == 0.0, || "haversine identity".into())?;
    let east = bearing_deg(o, geo(0.0, 90.0)).map_err(|e| e.to_string())?;
    let north = bearing_deg(o, geo(10.0, 0.0)).map_err(|e| e.to_string())?;
    ensure(east == 90.0 && north == 0.0, || format!("bearings east {east}, north {north}"))?;
    let (a, b) = (geo(10.0, 20.0), geo(12.0, 23.0));
    let got = bearing_deg(a, b).map_err(|e| e.to_string())?;
    let want = vector_bearing(a, b);
    ensure((got - want).abs() <= 1e-9, || format!("bearing {got} vs oracle {want}"))?;
    ensure(bearing_deg(a, a).is_err(), || "coincident points accepted".into())?;
    let wrap = bearing_variation_deg(350.0, 10.0);
    ensure(wrap == 20.0, || format!("variation(350, 10) = {wrap}"))?;
    ensure(bearing_variation_deg(10.0, 10.0) == 0.0 && bearing_variation_deg(0.0, 180.0) == 180.0, || {
        "variation goldens".into()
    })?;
    Ok(format!("haversine ±0.001 km, bearing oracle |Δ|={:.1e}° ≤ 1e-9°, (350,10)→20 exact", (got - want).abs()))
}

// ---------------------------------------------------------------- smoothness

/// Neumaier-compensated sum.
fn exact_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for x in xs {
        let t = s + x;
        c += if s.abs() >= x.abs() { (s - t) + x } else { (x - t) + s };
        s = t;
    }
    s + c
}

fn oracle_smoothness(pts: &[GeoPoint]) -> f64 {
    let bearings: Vec<f64> = pts.windows(2).map(|w| vector_bearing(w[0], w[1])).collect();
    let dtheta: Vec<f64> = bearings
        .windows(2)
        .map(|w| {
            let d = (w[1] - w[0]).abs();
            if d > 180.0 {
                360.0 - d
            } else {
                d
            }
        })
        .collect();
    let n = dtheta.len() as f64;
    let mean = exact_sum(dtheta.iter().copied()) / n;
    (exact_sum(dtheta.iter().map(|d| (d - mean) * (d - mean))) / n).sqrt()
}

fn smoothness_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = 0.0f64;
    for k in 0..100 {
        let n = rng.random_range(4..=30);
        let mut p = geo(rng.random_range(5.0..40.0), rng.random_range(110.0..300.0));
        let mut pts = vec![p];
        for _ in 1..n {
            p = geo(p.lat + rng.random_range(-1.5..1.5), p.lon + rng.random_range(-1.5..1.5));
            pts.push(p);
        }
        let got = track_smoothness_deg(&pts).map_err(|e| e.to_string())?;
        let want = oracle_smoothness(&pts);
        worst = worst.max((got - want).abs());
        ensure((got - want).abs() <= 1e-9, || format!("track {k}: σ {got} vs oracle {want}"))?;
    }
    let straight: [Vec<GeoPoint>; 4] = [
        vec![geo(0.0, 150.0), geo(0.0, 151.0), geo(0.0, 153.5), geo(0.0, 154.0), geo(0.0, 160.0)],
        vec![geo(0.0, 200.0), geo(0.0, 199.0), geo(0.0, 197.0), geo(0.0, 196.5)],
        vec![geo(5.0, 130.0), geo(6.0, 130.0), geo(8.5, 130.0), geo(9.0, 130.0)],
        vec![geo(30.0, 250.0), geo(28.0, 250.0), geo(27.5, 250.0), geo(20.0, 250.0)],
    ];
    for s in &straight {
        let sigma = track_smoothness_deg(s).map_err(|e| e.to_string())?;
        ensure(sigma == 0.0, || format!("constant-bearing track σ = {sigma}"))?;
    }
    Ok(format!("100 random tracks, max |Δσ| = {worst:.1e}° ≤ 1e-9°; 4 constant-bearing tracks σ = 0"))
}

// ------------------------------------------------------------ gradient check

fn tiny(head: Head) -> ArchConfig {
    ArchConfig { n_conv_blocks: 2, convs_per_block: 1, base_filters: 2, linear_widths: vec![8], ..ArchConfig::desk(head) }
}

fn gradient_check_criterion() -> Check {
    let t = Instant::now();
    let clf = Network::build(tiny(Head::Classification), 3).map_err(|e| e.to_string())?;
    let e_clf = gradient_check(&clf, &synthetic_patches(4, 11), 100, 1e-5, 5).map_err(|e| e.to_string())?;
    // Weights scaled to a He-like magnitude: at the N(0, 0.03) init the
    // early-layer gradients sit below finite-difference round-off.
    let mut loc = Network::build(tiny(Head::Localization), 5).map_err(|e| e.to_string())?;
    loc.params.iter_mut().for_each(|p| *p *= 10.0);
    let pos: Vec<PatchSample> = synthetic_patches(6, 12).into_iter().filter(|s| s.center.is_some()).collect();
    let e_loc = gradient_check(&loc, &pos, 100, 1e-5, 5).map_err(|e| e.to_string())?;
    ensure(e_clf < 1e-4, || format!("classification max rel err {e_clf:.2e}"))?;
    ensure(e_loc < 1e-4, || format!("localization max rel err {e_loc:.2e}"))?;
    within(t.elapsed(), 60.0)?;
    Ok(format!(
        "max rel err cls {e_clf:.1e}, loc {e_loc:.1e} < 1e-4 (h=1e-5, 100 probes each), {:.1}s < 60s",
        t.elapsed().as_secs_f64()
    ))
}

// --------------------------------------------------------------- closed loop

fn clean_closed_loop() -> Check {
    let t = Instant::now();
    let cfg = ScenarioConfig { n_storms: 3, steps: 40, noise_std: 0.0, dropout_prob: 0.0, ..Default::default() };
    let sc = generate(&cfg, Exec::Sequential).map_err(|e| e.to_string())?;
    let frames = detect_series(&PhysicsDetector::default(), &sc.series, Exec::Sequential).map_err(|e| e.to_string())?;
    let params = ByteParams::default();
    let raw = run_tracker(&frames, &params).map_err(|e| e.to_string())?;
    let tracks = apply_physical_filters(raw, &params, None).map_err(|e| e.to_string())?;
    let truth = sc.truth();
    let report = evaluate(&truth, &tracks, &MetricsConfig::default());
    let joint = report.region(Region::Joint);
    ensure(joint.pod == Some(100.0), || format!("POD {:?}", joint.pod))?;
    ensure(joint.far == Some(0.0), || format!("FAR {:?}", joint.far))?;
    let mut worst = 0.0f64;
    for tr in &tracks {
        for p in &tr.points {
            let nearest = truth
                .iter()
                .flat_map(|s| s.points.iter().filter(|q| q.time == p.time))
                .map(|q| (q.row - p.row).hypot(q.col - p.col))
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(nearest);
        }
    }
    ensure(worst <= 2.0, || format!("a reconstructed point is {worst:.2} cells from truth"))?;
    within(t.elapsed(), 60.0)?;
    Ok(format!(
        "POD 100%, FAR 0%, {} tracks, max point error {worst:.2} ≤ 2 cells, {:.1}s < 60s",
        tracks.len(),
        t.elapsed().as_secs_f64()
    ))
}

/// Scenario seed chosen for its structure alone: every storm loses its
/// signature at least once mid-track, never for more than 2 consecutive
/// steps, and stays inside the domain.
const DEGRADED_SEED: u64 = 44;

fn degraded_closed_loop() -> Check {
    let cfg = ScenarioConfig { dropout_prob: 0.1, seed: DEGRADED_SEED, ..Default::default() };
    let sc = generate(&cfg, Exec::Sequential).map_err(|e| e.to_string())?;
    for s in &sc.storms {
        let n = s.truth.points.len();
        let longest = s.hidden.windows(2).fold((1, 1), |(cur, best), w| {
            let c = if w[1] == w[0] + 1 { cur + 1 } else { 1 };
            (c, best.max(c))
        });
        ensure(!s.truncated && s.hidden.iter().any(|&i| i > 0 && i + 1 < n) && longest.1 <= 2, || {
            format!("precondition: storm {} hidden {:?}", s.truth.id, s.hidden)
        })?;
    }
    let frames = detect_series(&PhysicsDetector::default(), &sc.series, Exec::Sequential).map_err(|e| e.to_string())?;
    let truth = sc.truth();
    let mc = MatchConfig::default();

    let p2 = ByteParams { track_buffer: 2, ..Default::default() };
    let raw2 = run_tracker(&frames, &p2).map_err(|e| e.to_string())?;
    let kept = apply_physical_filters(raw2, &p2, None).map_err(|e| e.to_string())?;
    let m2 = match_tracks(&truth, &kept, &mc);
    let pod2 = pod(&m2).map_err(|e| e.to_string())?;
    ensure(pod2 == 100.0, || format!("buffer 2: POD {pod2}"))?;
    for (o, storm) in truth.iter().enumerate() {
        let n = m2.pairs.iter().filter(|p| p.obs_index == o).count();
        ensure(n == 1, || format!("buffer 2: storm {} carried by {n} tracks", storm.id))?;
    }
    ensure(kept.len() == truth.len(), || format!("buffer 2: {} tracks for {} storms", kept.len(), truth.len()))?;

    let p0 = ByteParams { track_buffer: 0, ..Default::default() };
    let raw0 = run_tracker(&frames, &p0).map_err(|e| e.to_string())?;
    let m0 = match_tracks(&truth, &raw0, &mc);
    let per: Vec<usize> = (0..truth.len()).map(|o| m0.pairs.iter().filter(|p| p.obs_index == o).count()).collect();
    ensure(per.iter().all(|&n| n >= 2), || format!("buffer 0: fragments per storm {per:?}"))?;
    Ok(format!(
        "seed {DEGRADED_SEED}, dropout 0.1: buffer 2 → POD 100%, 1 track per storm; buffer 0 → raw fragments per storm {per:?} (each ≥ 2)"
    ))
}

// ------------------------------------------------------------------- filters

fn filter_properties() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let spec = GridSpec::default();
    let params = ByteParams::default();
    let (mut kept_total, mut raw_total) = (0, 0);
    for set in 0..200 {
        let steps = rng.random_range(10..40);
        let n_storms = rng.random_range(1..5);
        // Random walkers with occasional long jumps, drop-outs and clutter.
        let mut pos: Vec<(f64, f64)> = (0..n_storms)
            .map(|_| (rng.random_range(10.0..270.0), rng.random_range(10.0..870.0)))
            .collect();
        let start = ymdh(2001, 8, 1, 0);
        let mut frames = Vec::new();
        for k in 0..steps {
            let t = start + time::step() * k;
            let mut dets = Vec::new();
            for p in pos.iter_mut() {
                let jump = if rng.random_bool(0.1) { 12.0 } else { 1.0 };
                p.0 = (p.0 + rng.random_range(-2.0..2.0) * jump).clamp(1.0, 278.0);
                p.1 = (p.1 + rng.random_range(-2.0..2.0) * jump).clamp(1.0, 878.0);
                if rng.random_bool(0.9) {
                    dets.push(Detection::new(t, p.0, p.1, rng.random_range(0.5..1.0), &spec));
                }
            }
            for _ in 0..rng.random_range(0..3) {
                let (r, c) = (rng.random_range(0.0..279.0), rng.random_range(0.0..879.0));
                dets.push(Detection::new(t, r, c, rng.random_range(0.5..1.0), &spec));
            }
            frames.push((t, dets));
        }
        let raw = run_tracker(&frames, &params).map_err(|e| e.to_string())?;
        raw_total += raw.len();
        let kept = apply_physical_filters(raw, &params, None).map_err(|e| format!("set {set}: {e}"))?;
        kept_total += kept.len();
        for t in &kept {
            ensure(t.points.len() >= 12, || format!("set {set}: track {} has {} points", t.id, t.points.len()))?;
            let g = t.points[0].geo.lat;
            ensure(g <= 30.0, || format!("set {set}: track {} born at {g}°N", t.id))?;
            for w in t.points.windows(2) {
                let km = haversine_km(w[0].geo, w[1].geo);
                ensure(km <= 400.0, || format!("set {set}: track {} jumps {km:.1} km", t.id))?;
            }
        }
    }
    ensure(kept_total > 0 && kept_total < raw_total, || format!("degenerate sample: kept {kept_total} of {raw_total}"))?;
    Ok(format!("200 random streams, {kept_total} of {raw_total} tracks kept; none < 12 pts, > 30°N genesis or > 400 km step"))
}

// -------------------------------------------------------------- augmentation

fn augmentation_properties() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let m = PATCH - 1;
    for k in 0..1000 {
        let pixels: Vec<f32> = (0..PATCH_PIXELS).map(|_| rng.random_range(-1.0..1.0)).collect();
        let center = (rng.random_range(0..PATCH as u8), rng.random_range(0..PATCH as u8));
        let s = PatchSample {
            map_timestamp: ymdh(2000, 1, 1, 0),
            patch_row: 0,
            patch_col: 0,
            pixels,
            center: Some(center),
            kind: PatchKind::Cyclone,
        };
        let augs = augment(&s).map_err(|e| e.to_string())?;
        let (r, c) = (center.0 as usize, center.1 as usize);
        let expect = [(m - r, m - c), (r, m - c), (m - r, c)];
        for (i, a) in Augmentation::ALL.iter().enumerate() {
            let got = augs[i].center.map(|(x, y)| (x as usize, y as usize));
            ensure(got == Some(expect[i]), || format!("patch {k}: {a:?} center {got:?}, want {:?}", expect[i]))?;
            // Pixel remap with the same formula, both variables.
            for v in 0..2 {
                for rr in 0..PATCH {
                    for cc in 0..PATCH {
                        let (sr, sc) = match a {
                            Augmentation::Rot180 => (m - rr, m - cc),
                            Augmentation::HFlip => (rr, m - cc),
                            Augmentation::VFlip => (m - rr, cc),
                        };
                        ensure(augs[i].pixel(v, rr, cc) == s.pixel(v, sr, sc), || format!("patch {k}: {a:?} pixel"))?;
                    }
                }
            }
            let back = augment(&augs[i]).map_err(|e| e.to_string())?;
            ensure(back[i] == s, || format!("patch {k}: {a:?} is not an involution"))?;
        }
        // Composition identity: flipping both axes is the half turn.
        let hv = &augment(&augs[1]).map_err(|e| e.to_string())?[2];
        ensure(hv.pixels == augs[0].pixels && hv.center == augs[0].center, || format!("patch {k}: hflip∘vflip ≠ rot180"))?;
    }
    Ok("1000 random positives: involution, center remap, pixel remap (both vars), hflip∘vflip = rot180".into())
}

// -------------------------------------------------------------------- pareto

fn brute_force_frontier(objs: &[Objectives]) -> Vec<usize> {
    let dominates = |a: &Objectives, b: &Objectives| {
        let ge = a.pod >= b.pod && a.far <= b.far && a.r_enp >= b.r_enp && a.r_wnp >= b.r_wnp;
        let gt = a.pod > b.pod || a.far < b.far || a.r_enp > b.r_enp || a.r_wnp > b.r_wnp;
        ge && gt
    };
    (0..objs.len()).filter(|&i| !(0..objs.len()).any(|j| dominates(&objs[j], &objs[i]))).collect()
}

fn pareto_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut sizes = 0;
    for set in 0..200 {
        // Coarse value grids force ties and exact duplicates.
        let objs: Vec<Objectives> = (0..50)
            .map(|_| Objectives {
                pod: rng.random_range(0..8) as f64 * 12.5,
                far: rng.random_range(0..8) as f64 * 12.5,
                r_enp: rng.random_range(-4..=4) as f64 / 4.0,
                r_wnp: rng.random_range(-4..=4) as f64 / 4.0,
            })
            .collect();
        let cands: Vec<TunerCandidate> = objs
            .iter()
            .enumerate()
            .map(|(i, o)| TunerCandidate {
                bbox_size: i as u32,
                track_buffer: 1,
                match_threshold: 0.8,
                track_threshold: 0.7,
                constraint_set: ConstraintSet::None,
                metrics: Some(*o),
            })
            .collect();
        let mut got: Vec<usize> =
            pareto_frontier(&cands).map_err(|e| e.to_string())?.iter().map(|c| c.bbox_size as usize).collect();
        got.sort_unstable();
        let want = brute_force_frontier(&objs);
        sizes += want.len();
        ensure(got == want, || format!("set {set}: frontier {got:?} vs brute force {want:?}"))?;
    }
    let n = enumerate_candidates(&TunerGrid::default()).len();
    ensure(n == 120, || format!("paper grid enumerates {n} candidates"))?;
    Ok(format!("200 sets of 50, frontiers identical (mean size {:.1}); paper grid = 120 candidates", sizes as f64 / 200.0))
}

// ------------------------------------------------------------------- metrics

fn random_tracks(rng: &mut ChaCha8Rng, prefix: &str, n: usize) -> Vec<Track> {
    (0..n)
        .map(|k| {
            let len = rng.random_range(4..20);
            let start = ymdh(rng.random_range(1990..1995), rng.random_range(6..11), 1, 0) + time::step() * rng.random_range(0..40);
            let mut p = geo(rng.random_range(5.0..30.0), rng.random_range(120.0..280.0));
            let mut pts = vec![p];
            for _ in 1..len {
                p = geo(p.lat + rng.random_range(-0.8..0.8), p.lon + rng.random_range(-1.2..0.4));
                pts.push(p);
            }
            track_from(&format!("{prefix}{k:03}"), start, &pts)
        })
        .collect()
}

fn jitter(rng: &mut ChaCha8Rng, tracks: &[Track], prefix: &str, sigma_deg: f64) -> Vec<Track> {
    tracks
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let pts: Vec<GeoPoint> = t
                .points
                .iter()
                .map(|q| geo(q.geo.lat + rng.random_range(-sigma_deg..sigma_deg), q.geo.lon + rng.random_range(-sigma_deg..sigma_deg)))
                .collect();
            track_from(&format!("{prefix}{k:03}"), t.points[0].time, &pts)
        })
        .collect()
}

fn metrics_algebra() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(123);
    let mut worst_r = 0.0f64;
    for sc in 0..100 {
        let n_obs = rng.random_range(1..8);
        let obs = random_tracks(&mut rng, "O", n_obs);
        let keep = rng.random_range(0..=obs.len());
        let spread = rng.random_range(0.0..4.0);
        let mut det = jitter(&mut rng, &obs[..keep], "D", spread);
        let n_false = rng.random_range(0..4);
        det.extend(random_tracks(&mut rng, "F", n_false));
        let base = match_tracks(&obs, &det, &MatchConfig::default());

        // Duplicating both sets leaves the ratios unchanged.
        let dup = |ts: &[Track], tag: &str| -> Vec<Track> {
            ts.iter().cloned().chain(ts.iter().map(|t| Track { id: format!("{}{tag}", t.id), ..t.clone() })).collect()
        };
        let twice = match_tracks(&dup(&obs, "b"), &dup(&det, "b"), &MatchConfig::default());
        ensure(pod(&base).ok() == pod(&twice).ok(), || format!("scenario {sc}: POD changed under duplication"))?;
        ensure(far(&base).ok() == far(&twice).ok(), || format!("scenario {sc}: FAR changed under duplication"))?;

        // A larger radius never loses hits nor gains false alarms.
        let mut prev: Option<(usize, usize)> = None;
        for radius in [50.0, 100.0, 200.0, 300.0, 500.0, 1000.0] {
            let r = match_tracks(&obs, &det, &MatchConfig { radius_km: radius, ..Default::default() });
            if let Some((h, f)) = prev {
                ensure(r.hits >= h && r.false_alarms <= f, || format!("scenario {sc}: radius {radius} not monotone"))?;
            }
            prev = Some((r.hits, r.false_alarms));
        }

        // Adding a linear trend to a series leaves the detrended r at 1.
        let n = rng.random_range(5..40);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..30.0)).collect();
        let (slope, icpt) = (rng.random_range(-2.0..2.0), rng.random_range(-10.0..10.0));
        let b: Vec<f64> = a.iter().enumerate().map(|(i, x)| x + slope * i as f64 + icpt).collect();
        let r = detrended_pearson(&a, &b).map_err(|e| format!("scenario {sc}: {e}"))?;
        worst_r = worst_r.max((r - 1.0).abs());
        ensure((r - 1.0).abs() <= 1e-9, || format!("scenario {sc}: detrended r = {r}"))?;
    }
    Ok(format!("100 scenarios: duplication invariance, radius monotonicity, |r − 1| ≤ {worst_r:.1e} (tol 1e-9)"))
}

// ------------------------------------------------------------ training smoke

fn training_smoke() -> Check {
    let t = Instant::now();
    let data = synthetic_patches(64, 21);
    let positives: Vec<PatchSample> = data.iter().filter(|s| s.center.is_some()).cloned().collect();
    // Desk-scale settings with a higher learning rate than the default so
    // both heads overfit inside the 500-step budget; the localizer takes the
    // 32 positives as one full batch, which keeps the L1 descent steady.
    let opt = OptimConfig { lr: 1e-3, ..Default::default() };

    let mut clf = Network::build(ArchConfig::desk(Head::Classification), 1).map_err(|e| e.to_string())?;
    let mut o1 = AdamW::new(opt, clf.param_count());
    let c1 = FitConfig { steps: 500, batch_size: 16, seed: 1, target_loss: Some(0.05), eval_every: 10 };
    let r1 = fit(&mut clf, &data, &c1, &mut o1, Exec::Sequential).map_err(|e| e.to_string())?;

    let mut loc = Network::build(ArchConfig::desk(Head::Localization), 2).map_err(|e| e.to_string())?;
    let mut o2 = AdamW::new(opt, loc.param_count());
    let c2 = FitConfig { steps: 500, batch_size: positives.len(), seed: 2, target_loss: Some(0.9), eval_every: 10 };
    let r2 = fit(&mut loc, &positives, &c2, &mut o2, Exec::Sequential).map_err(|e| e.to_string())?;
    let pred = loc.predict_coords(&positives, Exec::Sequential).map_err(|e| e.to_string())?;
    let truth: Vec<(f64, f64)> = positives.iter().map(|s| s.center.map(|(r, c)| (r as f64, c as f64)).unwrap()).collect();
    let mae = mae_loss(&pred, &truth).map_err(|e| e.to_string())?;

    ensure(r1.final_loss < 0.1, || format!("BCE {:.4} after {} steps", r1.final_loss, r1.losses.len()))?;
    ensure(mae < 1.0, || format!("MAE {mae:.3} cells after {} steps", r2.losses.len()))?;
    within(t.elapsed(), 300.0)?;
    Ok(format!(
        "64 patches: BCE {:.4} < 0.1 in {} steps, MAE {mae:.3} < 1.0 cells in {} steps (≤ 500), {:.1}s < 300s single-threaded",
        r1.final_loss,
        r1.losses.len(),
        r2.losses.len(),
        t.elapsed().as_secs_f64()
    ))
}

// --------------------------------------------------------------- determinism

const STAGES: [&str; 9] = ["synth", "patchify", "train", "detect", "track", "match", "metrics", "tune", "report"];

const PIPELINE: &str = r#"
[synth]
n_storms = 2
steps = 8
noise_std = 20.0
dropout_prob = 0.1

[train]
use_all_splits = true

[train.classifier]
steps = 6
batch_size = 8

[train.localizer]
steps = 6
batch_size = 8

[tuner]
bbox_sizes = [15, 21]
track_buffers = [1, 2]
constraint_sets = ["none", "lat_le_30"]
"#;

fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).expect("readable dir") {
            let p = e.expect("dir entry").path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).expect("readable file"));
            }
        }
    }
    out
}

fn stage(dir: &Path, jobs: usize, name: &str) -> Result<(), String> {
    let cfg = dir.join("run.toml");
    let args = ["tctrack", "--config", cfg.to_str().unwrap(), "--jobs", &jobs.to_string(), name];
    match tctrack_cli::run_args(args) {
        Ok(()) => Ok(()),
        // A tiny scenario may leave a ratio undefined; the report is still written.
        Err(e) if name == "metrics" && e.kind == tctrack_cli::ErrorKind::UndefinedMetric => Ok(()),
        Err(e) => Err(format!("{name}: {e}")),
    }
}

fn determinism() -> Check {
    let dirs: Vec<tempfile::TempDir> = (0..2).map(|_| tempfile::tempdir().expect("temp dir")).collect();
    for d in &dirs {
        fs::write(d.path().join("run.toml"), PIPELINE).map_err(|e| e.to_string())?;
    }
    let mut identical = 0;
    for name in STAGES {
        stage(dirs[0].path(), 1, name)?;
        stage(dirs[1].path(), 4, name)?;
        let (a, b) = (snapshot(dirs[0].path()), snapshot(dirs[1].path()));
        ensure(a == b, || {
            let diff: Vec<_> = a.keys().filter(|k| b.get(*k) != a.get(*k)).collect();
            format!("after `{name}` outputs differ: {diff:?}")
        })?;
        // Re-running the stage over unchanged inputs reproduces it exactly.
        stage(dirs[0].path(), 1, name)?;
        ensure(snapshot(dirs[0].path()) == a, || format!("`{name}` is not idempotent"))?;
        identical = a.len();
    }
    Ok(format!("all 9 stages: runs identical byte for byte (--jobs 1 vs 4, and reruns); {identical} files"))
}

// --------------------------------------------------------------------- driver

#[test]
fn acceptance() {
    let criteria: [(&str, CheckFn); 12] = [
        ("assignment oracle", assignment_oracle),
        ("geodesy goldens", geodesy_goldens),
        ("smoothness oracle", smoothness_oracle),
        ("gradient check", gradient_check_criterion),
        ("closed loop, clean", clean_closed_loop),
        ("closed loop, degraded", degraded_closed_loop),
        ("filter properties", filter_properties),
        ("augmentation properties", augmentation_properties),
        ("pareto oracle", pareto_oracle),
        ("metrics algebra", metrics_algebra),
        ("training smoke", training_smoke),
        ("determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (name, check) in criteria {
        let t = Instant::now();
        let outcome = check();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name:<24} {detail} [{secs:.2}s]"),
            Err(why) => {
                println!("FAIL  {name:<24} {why} [{secs:.2}s]");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
