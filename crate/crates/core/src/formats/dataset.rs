//! Patch dataset directory: `samples.csv` (one row per sample) and
//! `pixels.f32` (the samples' 2×40×40 pixels, little-endian, same order).

use std::fs;
use std::path::Path;

use super::csvs::{enum_from_str, enum_to_str};
use super::{io_err, parse_err, FormatError};
use crate::data::{PatchKind, PatchSample, SplitName, PATCH, PATCH_PIXELS};
use crate::time::{format_iso, parse_iso};

const HEADER: [&str; 8] = ["index", "map_time", "patch_row", "patch_col", "kind", "center_row", "center_col", "split"];

pub fn write_dataset(dir: &Path, samples: &[PatchSample]) -> Result<(), FormatError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let csv_path = dir.join("samples.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(HEADER)?;
    let mut blob = Vec::with_capacity(samples.len() * PATCH_PIXELS * 4);
    for (i, s) in samples.iter().enumerate() {
        if s.pixels.len() != PATCH_PIXELS {
            return Err(parse_err(dir, format!("sample {i} has {} pixels", s.pixels.len())));
        }
        let (cr, cc) = s.center.map(|(r, c)| (r.to_string(), c.to_string())).unwrap_or_default();
        w.write_record([
            i.to_string(),
            format_iso(&s.map_timestamp),
            s.patch_row.to_string(),
            s.patch_col.to_string(),
            enum_to_str(&s.kind),
            cr,
            cc,
            SplitName::of(&s.map_timestamp).map(|x| x.as_str()).unwrap_or("outside").to_string(),
        ])?;
        for v in &s.pixels {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.flush().map_err(io_err(&csv_path))?;
    let p = dir.join("pixels.f32");
    fs::write(&p, blob).map_err(io_err(&p))
}

pub fn read_dataset(dir: &Path) -> Result<Vec<PatchSample>, FormatError> {
    let csv_path = dir.join("samples.csv");
    let mut r = csv::Reader::from_path(&csv_path)?;
    if r.headers()?.iter().collect::<Vec<_>>() != HEADER {
        return Err(parse_err(&csv_path, "unexpected header"));
    }
    let p = dir.join("pixels.f32");
    let blob = fs::read(&p).map_err(io_err(&p))?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let f = |k: usize| rec.get(k).unwrap_or("");
        let int = |k: usize| -> Result<usize, FormatError> {
            f(k).parse().map_err(|_| parse_err(&csv_path, format!("row {i}: bad {} `{}`", HEADER[k], f(k))))
        };
        let center = match (f(5), f(6)) {
            ("", "") => None,
            _ => {
                let (r, c) = (int(5)?, int(6)?);
                if r >= PATCH || c >= PATCH {
                    return Err(parse_err(&csv_path, format!("row {i}: center outside the patch")));
                }
                Some((r as u8, c as u8))
            }
        };
        let bytes = blob
            .get(i * PATCH_PIXELS * 4..(i + 1) * PATCH_PIXELS * 4)
            .ok_or_else(|| parse_err(&p, format!("too short for sample {i}")))?;
        out.push(PatchSample {
            map_timestamp: parse_iso(f(1))?,
            patch_row: int(2)?,
            patch_col: int(3)?,
            pixels: bytes.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect(),
            center,
            kind: enum_from_str::<PatchKind>(&csv_path, f(4), "kind")?,
        });
    }
    if blob.len() != out.len() * PATCH_PIXELS * 4 {
        return Err(parse_err(&p, "size does not match the sample table"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::ymdh;

    #[test]
    fn round_trip() {
        let px: Vec<f32> = (0..PATCH_PIXELS).map(|i| i as f32 * 0.25 - 3.0).collect();
        let a = PatchSample { center: Some((3, 39)), kind: PatchKind::Cyclone, ..PatchSample::background(ymdh(1995, 8, 1, 6), 2, 5, px.clone()) };
        let b = PatchSample { kind: PatchKind::Random, ..PatchSample::background(ymdh(2012, 3, 1, 0), 6, 21, px) };
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &[a.clone(), b.clone()]).unwrap();
        assert_eq!(read_dataset(dir.path()).unwrap(), vec![a, b]);
        let text = fs::read_to_string(dir.path().join("samples.csv")).unwrap();
        assert!(text.contains("test_august") && text.contains(",val"));
    }
}
