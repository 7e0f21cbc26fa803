//! Plain-text matrix dump for correlation matrices and beamformers.
//!
//! ```text
//! # hbws-matrix v1
//! rows 4
//! cols 6
//! method greedy
//! seed 7
//! family 1a2b3c4d5e6f7081
//! 0.5 0
//! ...
//! ```
//!
//! Entries follow row-major, one `re im` pair per line. Floats are written
//! with Rust's shortest round-trip formatting so reading back is exact.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMat;

const MAGIC: &str = "# hbws-matrix v1";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DumpHeader {
    pub method: Option<String>,
    pub seed: Option<u64>,
    pub family_hash: Option<String>,
}

pub fn to_text(m: &CMat, header: &DumpHeader) -> String {
    let mut out = format!("{MAGIC}\nrows {}\ncols {}\n", m.nrows(), m.ncols());
    if let Some(method) = &header.method {
        writeln!(out, "method {method}").unwrap();
    }
    if let Some(seed) = header.seed {
        writeln!(out, "seed {seed}").unwrap();
    }
    if let Some(hash) = &header.family_hash {
        writeln!(out, "family {hash}").unwrap();
    }
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            writeln!(out, "{:?} {:?}", z.re, z.im).unwrap();
        }
    }
    out
}

pub fn from_text(text: &str) -> Result<(CMat, DumpHeader)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    if lines.next().map(str::trim) != Some(MAGIC) {
        return Err(Error::Parse("missing matrix dump magic line".into()));
    }
    let mut header = DumpHeader::default();
    let (mut rows, mut cols) = (None, None);
    let mut data = Vec::new();
    for line in lines {
        let mut parts = line.split_whitespace();
        let (a, b) = (parts.next().unwrap_or_default(), parts.next());
        let key_value =
            |what: &str| b.ok_or_else(|| Error::Parse(format!("`{what}` without a value")));
        match a {
            "rows" => rows = Some(parse_usize(key_value("rows")?)?),
            "cols" => cols = Some(parse_usize(key_value("cols")?)?),
            "method" => header.method = Some(key_value("method")?.to_string()),
            "seed" => {
                header.seed = Some(
                    key_value("seed")?
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad seed: {line}")))?,
                )
            }
            "family" => header.family_hash = Some(key_value("family")?.to_string()),
            _ => {
                let re: f64 = a
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad entry: {line}")))?;
                let im: f64 = b
                    .ok_or_else(|| Error::Parse(format!("entry without imaginary part: {line}")))?
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad entry: {line}")))?;
                data.push(Complex64::new(re, im));
            }
        }
    }
    let (rows, cols) = rows
        .zip(cols)
        .ok_or_else(|| Error::Parse("missing rows/cols".into()))?;
    if data.len() != rows * cols {
        return Err(Error::Parse(format!(
            "expected {} entries, found {}",
            rows * cols,
            data.len()
        )));
    }
    Ok((CMat::from_row_slice(rows, cols, &data), header))
}

fn parse_usize(s: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| Error::Parse(format!("bad dimension `{s}`")))
}

pub fn write(path: &Path, m: &CMat, header: &DumpHeader) -> Result<()> {
    Ok(std::fs::write(path, to_text(m, header))?)
}

pub fn read(path: &Path) -> Result<(CMat, DumpHeader)> {
    let text = std::fs::read_to_string(path)?;
    from_text(&text)
}
