//! Model files: a text header terminated by an `end` line, followed by the
//! parameters as little-endian f64 in declaration order.
//!
//! ```text
//! tctrack-model 1
//! head = classification
//! n_conv_blocks = 3
//! ...
//! param_count = 50129
//! end
//! <param_count * 8 bytes>
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{ArchConfig, Head, Network, NnError};
use crate::data::NormStats;

const MAGIC: &str = "tctrack-model 1";

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

pub fn write_network<W: Write>(net: &Network, mut w: W) -> Result<(), NnError> {
    let c = &net.cfg;
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "head = {}", c.head.as_str())?;
    writeln!(w, "n_conv_blocks = {}", c.n_conv_blocks)?;
    writeln!(w, "convs_per_block = {}", c.convs_per_block)?;
    writeln!(w, "base_filters = {}", c.base_filters)?;
    writeln!(w, "filter_growth = {}", c.filter_growth)?;
    writeln!(w, "max_filters = {}", c.max_filters)?;
    writeln!(w, "linear_widths = {}", join(&c.linear_widths))?;
    writeln!(w, "in_channels = {}", c.in_channels)?;
    writeln!(w, "input_size = {}", c.input_size)?;
    // `{:?}` prints the shortest representation that parses back exactly.
    writeln!(w, "norm_mean = {:?},{:?}", net.norm.mean[0], net.norm.mean[1])?;
    writeln!(w, "norm_std = {:?},{:?}", net.norm.std[0], net.norm.std[1])?;
    writeln!(w, "seed = {}", net.seed)?;
    writeln!(w, "param_count = {}", net.param_count())?;
    writeln!(w, "end")?;
    for p in &net.params {
        w.write_all(&p.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_network<R: Read>(r: R) -> Result<Network, NnError> {
    let mut r = BufReader::new(r);
    let mut line = String::new();
    let mut next = |r: &mut BufReader<R>| -> Result<String, NnError> {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(NnError::Format("truncated header".into()));
        }
        Ok(line.trim_end().to_string())
    };
    if next(&mut r)? != MAGIC {
        return Err(NnError::Format("not a tctrack model file".into()));
    }
    let mut kv = std::collections::BTreeMap::new();
    loop {
        let l = next(&mut r)?;
        if l == "end" {
            break;
        }
        let (k, v) = l.split_once('=').ok_or_else(|| NnError::Format(format!("bad header line {l:?}")))?;
        kv.insert(k.trim().to_string(), v.trim().to_string());
    }
    let get = |k: &str| kv.get(k).ok_or_else(|| NnError::Format(format!("missing header key {k}")));
    let num = |k: &str| -> Result<usize, NnError> {
        get(k)?.parse().map_err(|_| NnError::Format(format!("bad value for {k}")))
    };
    let pair = |k: &str| -> Result<[f64; 2], NnError> {
        let v: Vec<f64> = get(k)?
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| NnError::Format(format!("bad value for {k}")))?;
        <[f64; 2]>::try_from(v).map_err(|_| NnError::Format(format!("{k} needs two values")))
    };
    let head = match get("head")?.as_str() {
        "classification" => Head::Classification,
        "localization" => Head::Localization,
        h => return Err(NnError::Format(format!("unknown head {h}"))),
    };
    let widths = get("linear_widths")?;
    let linear_widths = if widths.is_empty() {
        vec![]
    } else {
        widths
            .split(',')
            .map(|s| s.trim().parse())
            .collect::<Result<_, _>>()
            .map_err(|_| NnError::Format("bad linear_widths".into()))?
    };
    let cfg = ArchConfig {
        n_conv_blocks: num("n_conv_blocks")?,
        convs_per_block: num("convs_per_block")?,
        base_filters: num("base_filters")?,
        filter_growth: num("filter_growth")?,
        max_filters: num("max_filters")?,
        linear_widths,
        head,
        in_channels: num("in_channels")?,
        input_size: num("input_size")?,
    };
    let norm = NormStats { mean: pair("norm_mean")?, std: pair("norm_std")? };
    let seed: u64 = get("seed")?.parse().map_err(|_| NnError::Format("bad seed".into()))?;
    let count = num("param_count")?;
    let mut buf = vec![0u8; count * 8];
    r.read_exact(&mut buf).map_err(|_| NnError::Format("parameter blob shorter than param_count".into()))?;
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(NnError::Format("trailing bytes after parameter blob".into()));
    }
    let params = buf.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect();
    Network::from_parts(cfg, params, norm, seed)
}

pub fn save_network(net: &Network, path: &Path) -> Result<(), NnError> {
    write_network(net, BufWriter::new(File::create(path)?))
}

pub fn load_network(path: &Path) -> Result<Network, NnError> {
    read_network(File::open(path)?)
}
