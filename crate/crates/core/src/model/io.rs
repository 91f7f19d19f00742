//! `UTAM` model files.
//!
//! Layout: the magic bytes `UTAM`, a little-endian `u32` version, then a
//! sequence of chunks. Each chunk has an 8-byte ASCII name padded with NUL
//! bytes, a little-endian `u64` payload length and the payload. Arrays are
//! stored as `UTT1` tensors. Chunks not belonging to the model itself
//! (such as a trained cascade) are kept verbatim in [`ModelFile::extra`].

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;

use super::UtaamModel;
use crate::error::{Error, Result};
use crate::features::HogSpec;
use crate::geometry::{FaceShape, ReferenceMesh};
use crate::tensor::{io as tio, DenseTensor};

pub const MAGIC: &[u8; 4] = b"UTAM";
pub const VERSION: u32 = 1;

const MODEL_CHUNKS: [&str; 13] = [
    "MEAN_S", "MEAN_T", "CORE_S", "CORE_T", "MODE_S_I", "MODE_S_P", "MODE_S_E", "MODE_T_I", "MODE_T_P",
    "MODE_T_L", "MODE_T_E", "MESH", "HOG",
];

/// A model plus any additional chunks.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: UtaamModel,
    pub extra: BTreeMap<String, Vec<u8>>,
}

impl ModelFile {
    pub fn new(model: UtaamModel) -> Self {
        Self {
            model,
            extra: BTreeMap::new(),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let m = &self.model;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let vector = |v: &[f64]| tio::to_bytes(&DenseTensor::from_vector(v));
        let matrix = |u: &DMatrix<f64>| tio::to_bytes(&DenseTensor::from_matrix(u));
        let payloads: [Vec<u8>; 13] = [
            vector(m.mean_shape()),
            vector(m.mean_texture()),
            tio::to_bytes(m.shape_core()),
            tio::to_bytes(m.texture_core()),
            matrix(&m.shape_modes()[0]),
            matrix(&m.shape_modes()[1]),
            matrix(&m.shape_modes()[2]),
            matrix(&m.texture_modes()[0]),
            matrix(&m.texture_modes()[1]),
            matrix(&m.texture_modes()[2]),
            matrix(&m.texture_modes()[3]),
            mesh_bytes(m.mesh()),
            hog_bytes(m.hog()),
        ];
        for (name, payload) in MODEL_CHUNKS.iter().zip(&payloads) {
            write_chunk(&mut out, name, payload)?;
        }
        for (name, payload) in &self.extra {
            if MODEL_CHUNKS.contains(&name.as_str()) {
                return Err(Error::InvalidArgument(format!("extra chunk {name} shadows a model chunk")));
            }
            write_chunk(&mut out, name, payload)?;
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(Error::Data("not a UTAM model file".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(Error::Data(format!("unsupported model file version {version}")));
        }
        let mut chunks = BTreeMap::new();
        let mut rest = &bytes[8..];
        while !rest.is_empty() {
            if rest.len() < 16 {
                return Err(Error::Data("truncated chunk header".into()));
            }
            let name = chunk_name(&rest[..8])?;
            let len = u64::from_le_bytes(rest[8..16].try_into().unwrap());
            let len = usize::try_from(len).map_err(|_| Error::Data("chunk too large".into()))?;
            if rest.len() - 16 < len {
                return Err(Error::Data(format!("chunk {name} is truncated")));
            }
            if chunks.insert(name.clone(), rest[16..16 + len].to_vec()).is_some() {
                return Err(Error::Data(format!("duplicate chunk {name}")));
            }
            rest = &rest[16 + len..];
        }
        let mut take = |name: &str| {
            chunks
                .remove(name)
                .ok_or_else(|| Error::Data(format!("model file lacks the {name} chunk")))
        };
        let vector = |b: Vec<u8>| tio::from_bytes(&b).map(|t| t.into_vec());
        let matrix = |b: Vec<u8>| -> Result<DMatrix<f64>> {
            tio::from_bytes(&b)?.to_matrix().map_err(|e| Error::Data(e.to_string()))
        };
        let mean_shape = vector(take("MEAN_S")?)?;
        let mean_texture = vector(take("MEAN_T")?)?;
        let core_s = tio::from_bytes(&take("CORE_S")?)?;
        let core_t = tio::from_bytes(&take("CORE_T")?)?;
        let shape_modes = [
            matrix(take("MODE_S_I")?)?,
            matrix(take("MODE_S_P")?)?,
            matrix(take("MODE_S_E")?)?,
        ];
        let texture_modes = [
            matrix(take("MODE_T_I")?)?,
            matrix(take("MODE_T_P")?)?,
            matrix(take("MODE_T_L")?)?,
            matrix(take("MODE_T_E")?)?,
        ];
        let mesh = parse_mesh(&take("MESH")?)?;
        let hog = parse_hog(&take("HOG")?)?;
        let model = UtaamModel::from_parts(
            mean_shape,
            mean_texture,
            core_s,
            core_t,
            shape_modes,
            texture_modes,
            mesh,
            hog,
        )
        .map_err(|e| Error::Data(format!("inconsistent model file: {e}")))?;
        Ok(Self { model, extra: chunks })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn write_chunk(out: &mut Vec<u8>, name: &str, payload: &[u8]) -> Result<()> {
    if name.is_empty() || name.len() > 8 || !name.bytes().all(|b| b.is_ascii_graphic()) {
        return Err(Error::InvalidArgument(format!("invalid chunk name {name:?}")));
    }
    let mut tag = [0u8; 8];
    tag[..name.len()].copy_from_slice(name.as_bytes());
    out.extend_from_slice(&tag);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
    Ok(())
}

fn chunk_name(tag: &[u8]) -> Result<String> {
    let end = tag.iter().position(|&b| b == 0).unwrap_or(tag.len());
    if end == 0 || tag[end..].iter().any(|&b| b != 0) || !tag[..end].iter().all(|b| b.is_ascii_graphic()) {
        return Err(Error::Data(format!("malformed chunk name {tag:?}")));
    }
    Ok(String::from_utf8(tag[..end].to_vec()).unwrap())
}

fn mesh_bytes(mesh: &ReferenceMesh) -> Vec<u8> {
    let r = mesh.reference();
    let pts = DenseTensor::new(vec![r.num_points(), 2], r.as_slice().to_vec()).expect("L x 2");
    let mut out = tio::to_bytes(&pts);
    out.extend_from_slice(&(mesh.triangles().len() as u32).to_le_bytes());
    for t in mesh.triangles() {
        for &v in t {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
    }
    out
}

fn parse_mesh(bytes: &[u8]) -> Result<ReferenceMesh> {
    let mut r = bytes;
    let pts = tio::read_tensor(&mut r)?;
    if pts.order() != 2 || pts.dims()[1] != 2 {
        return Err(Error::Data("MESH reference points must be an L x 2 array".into()));
    }
    let count = tio::read_u32(&mut r)? as usize;
    if r.len() != count * 12 {
        return Err(Error::Data("MESH triangle list has the wrong length".into()));
    }
    let triangles = r
        .chunks_exact(12)
        .map(|c| {
            [0, 1, 2].map(|k| u32::from_le_bytes(c[4 * k..4 * k + 4].try_into().unwrap()) as usize)
        })
        .collect();
    let reference = FaceShape::new(pts.into_vec()).map_err(|e| Error::Data(e.to_string()))?;
    ReferenceMesh::from_parts(reference, triangles).map_err(|e| Error::Data(e.to_string()))
}

fn hog_bytes(h: &HogSpec) -> Vec<u8> {
    let mut out = Vec::with_capacity(20);
    for v in [h.patch, h.cell, h.bins] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&h.eps.to_le_bytes());
    out
}

fn parse_hog(b: &[u8]) -> Result<HogSpec> {
    if b.len() != 20 {
        return Err(Error::Data("HOG chunk must be 20 bytes".into()));
    }
    let u = |k: usize| u32::from_le_bytes(b[4 * k..4 * k + 4].try_into().unwrap()) as usize;
    let eps = f64::from_le_bytes(b[12..20].try_into().unwrap());
    HogSpec::new(u(0), u(1), u(2), eps).map_err(|e| Error::Data(e.to_string()))
}
