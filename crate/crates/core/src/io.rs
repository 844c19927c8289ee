//! Whitespace-separated text files: one record per line, `#` starts a
//! comment.

use std::fmt::Write as _;
use std::path::Path;

use crate::meg::Coil;
use crate::scan::SourceSpace;
use crate::{Dipole, Error, Result, Vec3};

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Numeric records with one of the accepted column counts.
pub fn parse_records(text: &str, path: &Path, columns: &[usize]) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let vals = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::parse(path, i + 1, format!("`{t}` is not a finite number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if !columns.is_empty() && !columns.contains(&vals.len()) {
            return Err(Error::parse(path, i + 1, format!("expected {columns:?} columns, found {}", vals.len())));
        }
        if let Some(first) = out.first().map(Vec::len) {
            if first != vals.len() {
                return Err(Error::parse(path, i + 1, format!("expected {first} columns like the first record, found {}", vals.len())));
            }
        }
        out.push(vals);
    }
    Ok(out)
}

fn v3(r: &[f64]) -> Vec3 {
    Vec3::new(r[0], r[1], r[2])
}

/// `x y z` per line.
pub fn read_points(path: impl AsRef<Path>) -> Result<Vec<Vec3>> {
    let path = path.as_ref();
    Ok(parse_records(&read(path)?, path, &[3])?.iter().map(|r| v3(r)).collect())
}

/// `x y z mx my mz` per line.
pub fn read_dipoles(path: impl AsRef<Path>) -> Result<Vec<Dipole>> {
    let path = path.as_ref();
    Ok(parse_records(&read(path)?, path, &[6])?
        .iter()
        .map(|r| Dipole::new(v3(r), v3(&r[3..])))
        .collect())
}

/// `x y z nx ny nz` per line; axes are normalized.
pub fn read_coils(path: impl AsRef<Path>) -> Result<Vec<Coil>> {
    let path = path.as_ref();
    parse_records(&read(path)?, path, &[6])?
        .iter()
        .map(|r| Coil::new(v3(r), v3(&r[3..])))
        .collect()
}

/// `x y z [nx ny nz]` per line.
pub fn read_source_space(path: impl AsRef<Path>) -> Result<SourceSpace> {
    let path = path.as_ref();
    let recs = parse_records(&read(path)?, path, &[3, 6])?;
    let positions = recs.iter().map(|r| v3(r)).collect();
    let normals = (recs.first().map(Vec::len) == Some(6)).then(|| recs.iter().map(|r| v3(&r[3..])).collect());
    SourceSpace::new(positions, normals)
}

/// Any number of values, in reading order.
pub fn read_values(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let text = read(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        for t in line.split('#').next().unwrap_or("").split_whitespace() {
            let v = t
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(path, i + 1, format!("`{t}` is not a finite number")))?;
            out.push(v);
        }
    }
    Ok(out)
}

/// Rows of equal length.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    parse_records(&read(path)?, path, &[])
}

/// One row per line, values in shortest round-trip form.
pub fn format_matrix(rows: &[Vec<f64>]) -> String {
    let mut s = String::new();
    for r in rows {
        let line: Vec<String> = r.iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(s, "{}", line.join(" "));
    }
    s
}

pub fn write_matrix(path: impl AsRef<Path>, rows: &[Vec<f64>]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_matrix(rows)).map_err(|e| Error::io(path, e))
}
