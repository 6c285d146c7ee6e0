//! The `cmx` text interchange format.
//!
//! ```text
//! cmx <rows> <cols>
//! <re> <im>
//! ...
//! ```
//!
//! Entries follow the header in row-major order as whitespace-separated
//! `re im` pairs. The writer emits one pair per line with 17 significant
//! digits, which round-trips every `f64` exactly and makes the output
//! canonical: writing, reading and writing again yields identical bytes.

use std::fmt::Write as _;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::matrix::{CMat, C64};

pub fn write_cmx_string(a: &CMat) -> String {
    let mut out = String::with_capacity(24 + a.as_slice().len() * 48);
    let _ = writeln!(out, "cmx {} {}", a.rows(), a.cols());
    for z in a.as_slice() {
        let _ = writeln!(out, "{:.16e} {:.16e}", z.re, z.im);
    }
    out
}

pub fn write_cmx<W: Write>(mut w: W, a: &CMat) -> std::io::Result<()> {
    w.write_all(write_cmx_string(a).as_bytes())
}

pub fn read_cmx_str(text: &str) -> Result<CMat> {
    let mut tokens = text.split_ascii_whitespace();
    match tokens.next() {
        Some("cmx") => {}
        Some(other) => return Err(Error::Parse(format!("expected header 'cmx', found '{other}'"))),
        None => return Err(Error::Parse("empty input".into())),
    }
    let mut dim = |what: &str| -> Result<usize> {
        let tok = tokens
            .next()
            .ok_or_else(|| Error::Parse(format!("missing {what} in header")))?;
        tok.parse::<usize>()
            .map_err(|_| Error::Parse(format!("invalid {what} '{tok}'")))
    };
    let rows = dim("row count")?;
    let cols = dim("column count")?;
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Parse("dimensions overflow".into()))?;

    let scalars: Vec<&str> = tokens.collect();
    if scalars.len() != 2 * count {
        return Err(Error::Parse(format!(
            "expected {} scalars for a {rows}x{cols} matrix, found {}",
            2 * count,
            scalars.len()
        )));
    }
    let parse = |tok: &str| -> Result<f64> {
        tok.parse::<f64>()
            .map_err(|_| Error::Parse(format!("unparsable scalar '{tok}'")))
    };
    let data = scalars
        .chunks_exact(2)
        .map(|p| Ok(C64::new(parse(p[0])?, parse(p[1])?)))
        .collect::<Result<Vec<_>>>()?;
    CMat::new(rows, cols, data)
}

pub fn read_cmx<R: Read>(mut r: R) -> Result<CMat> {
    let mut text = String::new();
    r.read_to_string(&mut text)
        .map_err(|e| Error::Parse(format!("read failed: {e}")))?;
    read_cmx_str(&text)
}
