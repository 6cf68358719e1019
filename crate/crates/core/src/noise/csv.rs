//! Columnar CSV for sampled paths.
//!
//! ```text
//! # scheme=rr d=2 J=3 T=1 seed=42 path=0
//! t,x0,x1
//! 0,0,0
//! ...
//! ```
//! Floats are written in shortest round-trip form.

use std::io::{BufRead, Write};

use super::bridge::{EbmPath, EpochedBridgePath};
use super::grid::Path;
use super::scheme::SchemeSpec;
use crate::error::{Error, Result};

/// Metadata line of a path file.
#[derive(Clone, Debug, PartialEq)]
pub struct PathHeader {
    pub scheme: SchemeSpec,
    pub dim: usize,
    pub epochs: usize,
    pub period: f64,
    pub seed: u64,
    pub path: u64,
}

impl PathHeader {
    fn line(&self) -> String {
        format!(
            "# scheme={} d={} J={} T={} seed={} path={}",
            self.scheme, self.dim, self.epochs, self.period, self.seed, self.path
        )
    }

    fn parse(line: &str) -> Result<Self> {
        let body = line
            .strip_prefix('#')
            .ok_or_else(|| Error::Io("path file must start with a `#` header".into()))?;
        let mut scheme = None;
        let (mut dim, mut epochs, mut period, mut seed, mut path) = (None, None, None, None, None);
        for kv in body.split_whitespace() {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Io(format!("bad header field `{kv}`")))?;
            let bad = |_| Error::Io(format!("bad value in `{kv}`"));
            match k {
                "scheme" => scheme = Some(v.parse::<SchemeSpec>()?),
                "d" => dim = Some(v.parse::<usize>().map_err(bad)?),
                "J" => epochs = Some(v.parse::<usize>().map_err(bad)?),
                "T" => period = Some(v.parse::<f64>().map_err(|_| Error::Io(format!("bad value in `{kv}`")))?),
                "seed" => seed = Some(v.parse::<u64>().map_err(bad)?),
                "path" => path = Some(v.parse::<u64>().map_err(bad)?),
                _ => {}
            }
        }
        let missing = |f: &str| Error::Io(format!("header lacks `{f}`"));
        Ok(PathHeader {
            scheme: scheme.ok_or_else(|| missing("scheme"))?,
            dim: dim.ok_or_else(|| missing("d"))?,
            epochs: epochs.ok_or_else(|| missing("J"))?,
            period: period.ok_or_else(|| missing("T"))?,
            seed: seed.unwrap_or(0),
            path: path.unwrap_or(0),
        })
    }
}

fn write_rows<W: Write>(mut out: W, header: &PathHeader, path: &Path) -> Result<()> {
    writeln!(out, "{}", header.line())?;
    let cols: Vec<String> = (0..path.dim()).map(|k| format!("x{k}")).collect();
    writeln!(out, "t,{}", cols.join(","))?;
    for i in 0..path.len() {
        write!(out, "{}", path.grid().time(i))?;
        for v in path.at(i) {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_bridge_csv<W: Write>(out: W, bridge: &EpochedBridgePath) -> Result<()> {
    let header = PathHeader {
        scheme: bridge.scheme(),
        dim: bridge.dim(),
        epochs: bridge.epochs(),
        period: 1.0,
        seed: bridge.seed().master,
        path: bridge.seed().path,
    };
    write_rows(out, &header, bridge.path())
}

pub fn write_ebm_csv<W: Write>(out: W, ebm: &EbmPath) -> Result<()> {
    let b = ebm.bridge();
    let header = PathHeader {
        scheme: b.scheme(),
        dim: b.dim(),
        epochs: b.epochs(),
        period: ebm.period(),
        seed: b.seed().master,
        path: b.seed().path,
    };
    write_rows(out, &header, ebm.path())
}

/// Reads a path file back as `(header, times, point-major values)`.
pub fn read_path_csv<R: BufRead>(input: R) -> Result<(PathHeader, Vec<f64>, Vec<f64>)> {
    let mut lines = input.lines();
    let first = lines.next().ok_or_else(|| Error::Io("empty path file".into()))??;
    let header = PathHeader::parse(&first)?;
    let _columns = lines.next().ok_or_else(|| Error::Io("missing column header".into()))??;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (row, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let parse = |s: Option<&str>| -> Result<f64> {
            s.ok_or_else(|| Error::Io(format!("row {row}: too few columns")))?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Io(format!("row {row}: {e}")))
        };
        times.push(parse(fields.next())?);
        for _ in 0..header.dim {
            values.push(parse(fields.next())?);
        }
    }
    Ok((header, times, values))
}
