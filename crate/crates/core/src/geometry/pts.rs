//! Landmark annotation files in the `pts` text layout and one-flag-per-line
//! visibility sidecars. Coordinates are pixels with the origin at the
//! top-left, x to the right and y down.

use std::fmt::Write as _;
use std::path::Path;

use super::FaceShape;
use crate::error::{Error, Result};

/// Decimal places written for each coordinate.
pub const PTS_DECIMALS: usize = 6;

pub fn to_pts_string(shape: &FaceShape) -> String {
    let mut s = format!("version: 1\nn_points: {}\n{{\n", shape.num_points());
    for (x, y) in shape.points() {
        let _ = writeln!(s, "{x:.prec$} {y:.prec$}", prec = PTS_DECIMALS);
    }
    s.push_str("}\n");
    s
}

pub fn parse_pts(text: &str) -> Result<FaceShape> {
    let bad = |line: usize, msg: &str| Error::Data(format!("pts line {line}: {msg}"));
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let mut n = None;
    for (ln, line) in lines.by_ref() {
        if line == "{" {
            break;
        }
        if let Some(v) = line.strip_prefix("n_points:") {
            n = Some(v.trim().parse::<usize>().map_err(|_| bad(ln, "bad n_points"))?);
        } else if !line.starts_with("version:") {
            return Err(bad(ln, "unexpected header line"));
        }
    }
    let n = n.ok_or_else(|| Error::Data("pts file has no n_points header".into()))?;
    let mut coords = Vec::with_capacity(2 * n);
    let mut closed = false;
    for (ln, line) in lines.by_ref() {
        if line == "}" {
            closed = true;
            break;
        }
        let vals: Vec<&str> = line.split_whitespace().collect();
        if vals.len() != 2 {
            return Err(bad(ln, "expected `x y`"));
        }
        for v in vals {
            coords.push(v.parse::<f64>().map_err(|_| bad(ln, "bad coordinate"))?);
        }
    }
    if !closed {
        return Err(Error::Data("pts file is missing the closing brace".into()));
    }
    if let Some((ln, _)) = lines.next() {
        return Err(bad(ln, "trailing content after closing brace"));
    }
    if coords.len() != 2 * n {
        return Err(Error::Data(format!(
            "pts file declares {n} points but lists {}",
            coords.len() / 2
        )));
    }
    FaceShape::new(coords).map_err(|e| Error::Data(e.to_string()))
}

pub fn write_pts(path: &Path, shape: &FaceShape) -> Result<()> {
    std::fs::write(path, to_pts_string(shape))?;
    Ok(())
}

pub fn read_pts(path: &Path) -> Result<FaceShape> {
    parse_pts(&std::fs::read_to_string(path)?)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

pub fn to_visibility_string(visible: &[bool]) -> String {
    visible.iter().map(|&v| if v { "1\n" } else { "0\n" }).collect()
}

pub fn parse_visibility(text: &str) -> Result<Vec<bool>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| match l.trim() {
            "1" => Ok(true),
            "0" => Ok(false),
            other => Err(Error::Data(format!("visibility line {}: expected 0 or 1, got {other:?}", i + 1))),
        })
        .collect()
}

pub fn write_visibility(path: &Path, visible: &[bool]) -> Result<()> {
    std::fs::write(path, to_visibility_string(visible))?;
    Ok(())
}

pub fn read_visibility(path: &Path) -> Result<Vec<bool>> {
    parse_visibility(&std::fs::read_to_string(path)?)
}
