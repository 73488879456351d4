use super::{ByteParams, Track, TrackError};
use crate::data::LandMask;
use crate::geo::haversine_km;

/// Physical post-filters on raw tracker output.
///
/// Drops tracks born north of `genesis_lat_max`, tracks shorter than
/// `min_track_steps` points and, when requested and a mask is given, tracks
/// born over land. The displacement limit is already enforced during
/// association; a kept track that breaks it is reported as an error rather
/// than silently dropped.
pub fn apply_physical_filters(
    tracks: Vec<Track>,
    params: &ByteParams,
    land: Option<&LandMask>,
) -> Result<Vec<Track>, TrackError> {
    let mut out = Vec::with_capacity(tracks.len());
    for t in tracks {
        let Some(g) = t.genesis() else { continue };
        if params.genesis_lat_max.is_some_and(|lim| g.geo.lat > lim) {
            continue;
        }
        if t.points.len() < params.min_track_steps {
            continue;
        }
        if params.reject_land_genesis && land.is_some_and(|m| m.is_land(g.geo)) {
            continue;
        }
        for w in t.points.windows(2) {
            let km = haversine_km(w[0].geo, w[1].geo);
            if km > params.max_displacement_km {
                return Err(TrackError::Displacement { id: t.id.clone(), km, limit: params.max_displacement_km });
            }
        }
        out.push(t);
    }
    Ok(out)
}
