//! Plain-text grid dumps.
//!
//! Line 1: `dims shape... h origin... far_value S`. Every following line holds
//! one value in row-major order, written with 17 significant digits.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use super::{GridSpec, ScalarField};
use crate::error::{Error, Result};

pub fn to_string(field: &ScalarField) -> String {
    let g = field.grid();
    let mut out = String::with_capacity(24 * (g.len() + 1));
    let _ = write!(out, "{}", g.dims());
    for n in g.shape() {
        let _ = write!(out, " {n}");
    }
    let _ = write!(out, " {:.16e}", g.h());
    for o in g.origin() {
        let _ = write!(out, " {o:.16e}");
    }
    let _ = writeln!(out, " {:.16e} {:.16e}", field.far_value(), g.radius());
    for v in field.values() {
        let _ = writeln!(out, "{v:.16e}");
    }
    out
}

pub fn write_grid(path: &Path, field: &ScalarField) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(to_string(field).as_bytes())?;
    f.flush()?;
    Ok(())
}

pub fn from_reader<R: BufRead>(reader: R) -> Result<ScalarField> {
    let mut lines = reader.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty grid dump".into()))??;
    let toks: Vec<&str> = header.split_whitespace().collect();
    let dims: usize = toks
        .first()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Parse("bad dims in header".into()))?;
    if dims != 2 && dims != 3 {
        return Err(Error::Parse(format!("dims must be 2 or 3, got {dims}")));
    }
    if toks.len() != 2 * dims + 4 {
        return Err(Error::Parse(format!("header has {} fields, expected {}", toks.len(), 2 * dims + 4)));
    }
    let shape = toks[1..=dims]
        .iter()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::Parse(format!("shape: {e}")))?;
    let reals = toks[dims + 1..]
        .iter()
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::Parse(format!("header: {e}")))?;
    let h = reals[0];
    let origin = &reals[1..=dims];
    let far = reals[dims + 1];
    let radius = reals[dims + 2];
    let grid = GridSpec::new(dims, &shape, h, origin, radius)?;
    let mut values = Vec::with_capacity(grid.len());
    for (n, line) in lines.enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        values.push(t.parse::<f64>().map_err(|e| Error::Parse(format!("value line {}: {e}", n + 2)))?);
    }
    ScalarField::new(grid, values, far)
}

pub fn read_grid(path: &Path) -> Result<ScalarField> {
    from_reader(std::io::BufReader::new(std::fs::File::open(path)?))
}
