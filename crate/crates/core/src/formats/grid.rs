//! Portable grid directory: `manifest.txt` plus one raw little-endian f32
//! file per step, laid out variable-major then row-major from the NW corner.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{io_err, parse_err, FormatError};
use crate::data::{Frame, GridSeries, LandMask, VARS};
use crate::geo::GridSpec;
use crate::time::{format_iso, parse_iso, Timestamp};

const MAGIC: &str = "tctrack-grid 1";
const LAYOUT: &str = "time-major, var-major, row-major from NW corner";
/// Step name used for time-invariant fields such as the land mask.
const STATIC: &str = "static";

#[derive(Debug, Clone, PartialEq)]
pub struct GridFile {
    pub spec: GridSpec,
    pub vars: Vec<String>,
    /// `None` marks a time-invariant field.
    pub steps: Vec<(Option<Timestamp>, Frame)>,
}

fn step_file(k: usize) -> String {
    format!("step_{k:06}.f32")
}

pub fn write_grid(dir: &Path, g: &GridFile) -> Result<(), FormatError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut m = String::new();
    m.push_str(&format!("format {MAGIC}\n"));
    m.push_str("dtype f32le\n");
    m.push_str(&format!("layout {LAYOUT}\n"));
    let s = &g.spec;
    m.push_str(&format!("rows {}\ncols {}\nlat0 {}\nlon0 {}\nd {}\n", s.rows, s.cols, s.lat0, s.lon0, s.d));
    m.push_str(&format!("vars {}\n", g.vars.join(" ")));
    m.push_str(&format!("steps {}\n", g.steps.len()));
    for (k, (t, f)) in g.steps.iter().enumerate() {
        if f.nvars != g.vars.len() || f.rows != s.rows || f.cols != s.cols {
            return Err(parse_err(dir, format!("step {k} has shape {}x{}x{}", f.nvars, f.rows, f.cols)));
        }
        let when = t.as_ref().map(format_iso).unwrap_or_else(|| STATIC.into());
        m.push_str(&format!("{when} {}\n", step_file(k)));
        let mut bytes = Vec::with_capacity(f.data.len() * 4);
        for v in &f.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let p = dir.join(step_file(k));
        fs::write(&p, bytes).map_err(io_err(&p))?;
    }
    let p = dir.join("manifest.txt");
    fs::File::create(&p).and_then(|mut f| f.write_all(m.as_bytes())).map_err(io_err(&p))
}

pub fn read_grid(dir: &Path) -> Result<GridFile, FormatError> {
    let mp = dir.join("manifest.txt");
    let text = fs::read_to_string(&mp).map_err(io_err(&mp))?;
    let mut lines = text.lines();
    let mut field = |key: &str| -> Result<String, FormatError> {
        let line = lines.next().ok_or_else(|| parse_err(&mp, format!("missing `{key}`")))?;
        line.strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .map(str::to_string)
            .ok_or_else(|| parse_err(&mp, format!("expected `{key}`, found `{line}`")))
    };
    let num = |k: &str, v: String| -> Result<f64, FormatError> {
        v.parse().map_err(|_| parse_err(&mp, format!("bad {k} `{v}`")))
    };
    if field("format")? != MAGIC {
        return Err(parse_err(&mp, "unknown format"));
    }
    if field("dtype")? != "f32le" {
        return Err(parse_err(&mp, "dtype must be f32le"));
    }
    if field("layout")? != LAYOUT {
        return Err(parse_err(&mp, "unsupported layout"));
    }
    let rows = num("rows", field("rows")?)? as usize;
    let cols = num("cols", field("cols")?)? as usize;
    let lat0 = num("lat0", field("lat0")?)?;
    let lon0 = num("lon0", field("lon0")?)?;
    let d = num("d", field("d")?)?;
    let spec = GridSpec { lat0, lon0, d, rows, cols };
    spec.validate()?;
    let vars: Vec<String> = field("vars")?.split_whitespace().map(str::to_string).collect();
    let n = num("steps", field("steps")?)? as usize;
    let mut steps = Vec::with_capacity(n);
    for k in 0..n {
        let line = lines.next().ok_or_else(|| parse_err(&mp, format!("missing step {k}")))?;
        let (when, file) = line.split_once(' ').ok_or_else(|| parse_err(&mp, format!("bad step line `{line}`")))?;
        let t = if when == STATIC { None } else { Some(parse_iso(when)?) };
        let p = dir.join(file);
        let bytes = fs::read(&p).map_err(io_err(&p))?;
        let want = vars.len() * rows * cols * 4;
        if bytes.len() != want {
            return Err(parse_err(&p, format!("expected {want} bytes, found {}", bytes.len())));
        }
        let data = bytes.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
        steps.push((t, Frame::from_vec(vars.len(), rows, cols, data)?));
    }
    Ok(GridFile { spec, vars, steps })
}

pub fn write_series(dir: &Path, s: &GridSeries) -> Result<(), FormatError> {
    let g = GridFile {
        spec: s.spec,
        vars: VARS.iter().map(|v| v.to_string()).collect(),
        steps: s.timestamps.iter().copied().map(Some).zip(s.frames.iter().cloned()).collect(),
    };
    write_grid(dir, &g)
}

pub fn read_series(dir: &Path) -> Result<GridSeries, FormatError> {
    let g = read_grid(dir)?;
    if g.vars != VARS {
        return Err(parse_err(dir, format!("variables must be {VARS:?}, found {:?}", g.vars)));
    }
    let mut times = Vec::with_capacity(g.steps.len());
    let mut frames = Vec::with_capacity(g.steps.len());
    for (t, f) in g.steps {
        times.push(t.ok_or_else(|| parse_err(dir, "a field series needs timestamps"))?);
        frames.push(f);
    }
    Ok(GridSeries::new(g.spec, times, frames)?)
}

pub fn write_land_mask(dir: &Path, m: &LandMask) -> Result<(), FormatError> {
    write_grid(dir, &GridFile { spec: m.spec, vars: vec!["land".into()], steps: vec![(None, m.to_frame())] })
}

pub fn read_land_mask(dir: &Path) -> Result<LandMask, FormatError> {
    let g = read_grid(dir)?;
    if g.vars != ["land"] || g.steps.len() != 1 {
        return Err(parse_err(dir, "a land mask has one variable `land` and one step"));
    }
    Ok(LandMask::from_frame(g.spec, &g.steps[0].1)?)
}
