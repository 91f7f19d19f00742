//! Dataset manifests: two header lines followed by CSV rows.
//!
//! ```text
//! extents: 2 3 1 1
//! frontal: 1
//! identity,pose,illumination,expression,image,pts,visibility
//! 0,0,0,0,img/0000.pgm,pts/0000.pts,pts/0000.vis
//! ```
//!
//! Paths are relative to the manifest's directory unless absolute. The
//! visibility column may be empty.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::pts::{read_pts, read_visibility};
use crate::geometry::FaceShape;
use crate::image::GrayImage;

const COLUMNS: [&str; 7] = ["identity", "pose", "illumination", "expression", "image", "pts", "visibility"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    /// `[i, p, l, e]`.
    pub cell: [usize; 4],
    pub image: String,
    pub pts: String,
    pub visibility: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    /// `[I_i, I_p, I_l, I_e]`.
    pub extents: [usize; 4],
    pub frontal: usize,
    pub rows: Vec<ManifestRow>,
}

/// A manifest row with its files read.
#[derive(Debug, Clone)]
pub struct LoadedSample {
    pub cell: [usize; 4],
    pub image: GrayImage,
    pub shape: FaceShape,
    pub visible: Option<Vec<bool>>,
}

impl DatasetManifest {
    /// Checks extents, the frontal index, row bounds and duplicate cells.
    pub fn validate(&self) -> Result<()> {
        if self.extents.contains(&0) {
            return Err(Error::Data(format!("extents must be positive, got {:?}", self.extents)));
        }
        if self.frontal >= self.extents[1] {
            return Err(Error::Data(format!(
                "frontal pose {} out of range for {} poses",
                self.frontal, self.extents[1]
            )));
        }
        let mut seen = HashSet::new();
        for (k, r) in self.rows.iter().enumerate() {
            check_row(r, self.extents).map_err(|e| Error::Data(format!("row {}: {e}", k + 1)))?;
            if !seen.insert(r.cell) {
                return Err(Error::Data(format!("row {}: duplicate cell {:?}", k + 1, r.cell)));
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> Result<String> {
        self.validate()?;
        let mut out = format!(
            "extents: {} {} {} {}\nfrontal: {}\n",
            self.extents[0], self.extents[1], self.extents[2], self.extents[3], self.frontal
        );
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let io = |e: csv::Error| Error::Data(e.to_string());
        w.write_record(COLUMNS).map_err(io)?;
        for r in &self.rows {
            let c = r.cell.map(|v| v.to_string());
            w.write_record([
                c[0].as_str(),
                &c[1],
                &c[2],
                &c[3],
                &r.image,
                &r.pts,
                r.visibility.as_deref().unwrap_or(""),
            ])
            .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
        out.push_str(&String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))?);
        Ok(out)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.splitn(3, '\n');
        let extents_line = lines.next().unwrap_or("");
        let frontal_line = lines.next().unwrap_or("");
        let body = lines.next().unwrap_or("");
        let extents = header_value(extents_line, "extents", 1)?;
        let extents: [usize; 4] = extents
            .try_into()
            .map_err(|_| Error::Data("line 1: expected four extents".into()))?;
        let frontal = header_value(frontal_line, "frontal", 2)?;
        let [frontal] = frontal[..] else {
            return Err(Error::Data("line 2: expected one frontal pose index".into()));
        };
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(body.as_bytes());
        let header = rdr.headers().map_err(|e| Error::Data(format!("line 3: {e}")))?.clone();
        if !body.trim().is_empty() && header.iter().ne(COLUMNS) {
            return Err(Error::Data(format!("line 3: expected columns {}", COLUMNS.join(","))));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() + 2);
                Error::Data(format!("line {line}: {e}"))
            })?;
            let line = rec.position().map_or(0, |p| p.line() + 2);
            let row = parse_row(&rec).map_err(|m| Error::Data(format!("line {line}: {m}")))?;
            check_row(&row, extents).map_err(|m| Error::Data(format!("line {line}: {m}")))?;
            rows.push(row);
        }
        let m = Self { extents, frontal, rows };
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Data(m) => Error::Data(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Presence flags over the grid in cell order.
    pub fn presence(&self) -> Vec<bool> {
        let e = self.extents;
        let mut present = vec![false; e.iter().product()];
        for r in &self.rows {
            let c = r.cell;
            present[((c[0] * e[1] + c[1]) * e[2] + c[2]) * e[3] + c[3]] = true;
        }
        present
    }
}

fn header_value(line: &str, key: &str, number: usize) -> Result<Vec<usize>> {
    let rest = line
        .trim()
        .strip_prefix(key)
        .and_then(|r| r.strip_prefix(':'))
        .ok_or_else(|| Error::Data(format!("line {number}: expected `{key}: ...`")))?;
    rest.split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| Error::Data(format!("line {number}: `{t}` is not a non-negative integer")))
        })
        .collect()
}

fn parse_row(rec: &csv::StringRecord) -> std::result::Result<ManifestRow, String> {
    if rec.len() != COLUMNS.len() {
        return Err(format!("expected {} fields, found {}", COLUMNS.len(), rec.len()));
    }
    let mut cell = [0usize; 4];
    for (k, c) in cell.iter_mut().enumerate() {
        *c = rec[k]
            .trim()
            .parse()
            .map_err(|_| format!("{} index `{}` is not a non-negative integer", COLUMNS[k], &rec[k]))?;
    }
    if rec[4].is_empty() || rec[5].is_empty() {
        return Err("image and pts paths are required".into());
    }
    Ok(ManifestRow {
        cell,
        image: rec[4].to_string(),
        pts: rec[5].to_string(),
        visibility: (!rec[6].is_empty()).then(|| rec[6].to_string()),
    })
}

fn check_row(r: &ManifestRow, extents: [usize; 4]) -> std::result::Result<(), String> {
    for k in 0..4 {
        if r.cell[k] >= extents[k] {
            return Err(format!(
                "cell {:?}: {} index {} out of range for extent {}",
                r.cell, COLUMNS[k], r.cell[k], extents[k]
            ));
        }
    }
    Ok(())
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Reads the images, landmarks and visibility files of every row, resolving
/// relative paths against `base`.
pub fn load_samples(manifest: &DatasetManifest, base: &Path) -> Result<Vec<LoadedSample>> {
    manifest
        .rows
        .par_iter()
        .map(|r| {
            let ctx = |e: Error| Error::Data(format!("cell {:?}: {e}", r.cell));
            let image = GrayImage::load_pgm(resolve(base, &r.image)).map_err(ctx)?;
            let shape = read_pts(&resolve(base, &r.pts)).map_err(ctx)?;
            let visible = match &r.visibility {
                Some(v) => {
                    let vis = read_visibility(&resolve(base, v)).map_err(ctx)?;
                    if vis.len() != shape.num_points() {
                        return Err(ctx(Error::Data(format!(
                            "{} visibility flags for {} landmarks",
                            vis.len(),
                            shape.num_points()
                        ))));
                    }
                    Some(vis)
                }
                None => None,
            };
            Ok(LoadedSample {
                cell: r.cell,
                image,
                shape,
                visible,
            })
        })
        .collect()
}

/// Loads a manifest and all of its samples.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<(DatasetManifest, Vec<LoadedSample>)> {
    let path = path.as_ref();
    let m = DatasetManifest::load(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let samples = load_samples(&m, base)?;
    Ok((m, samples))
}
