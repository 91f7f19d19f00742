//! `UTT1` binary tensor files.
//!
//! Layout: the magic bytes `UTT1`, a little-endian `u32` order `N`, `N`
//! little-endian `u32` extents, then every value as a little-endian `f64`
//! in layout order (last index fastest).

use std::io::{Read, Write};
use std::path::Path;

use super::DenseTensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"UTT1";

pub fn write_tensor<W: Write>(w: &mut W, x: &DenseTensor) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(x.order() as u32).to_le_bytes())?;
    for &d in x.dims() {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for &v in x.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_tensor<R: Read>(r: &mut R) -> Result<DenseTensor> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Data(format!("bad tensor magic {magic:?}")));
    }
    let order = read_u32(r)? as usize;
    if order == 0 || order > 64 {
        return Err(Error::Data(format!("implausible tensor order {order}")));
    }
    let dims = (0..order)
        .map(|_| read_u32(r).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let len = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Data(format!("tensor extents {dims:?} overflow")))?;
    let mut bytes = vec![0u8; len.checked_mul(8).ok_or_else(|| Error::Data("tensor too large".into()))?];
    r.read_exact(&mut bytes)?;
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    DenseTensor::new(dims, data).map_err(|e| Error::Data(e.to_string()))
}

pub fn to_bytes(x: &DenseTensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 4 * x.order() + 8 * x.len());
    write_tensor(&mut out, x).expect("writing to a Vec cannot fail");
    out
}

pub fn from_bytes(mut bytes: &[u8]) -> Result<DenseTensor> {
    let t = read_tensor(&mut bytes)?;
    if !bytes.is_empty() {
        return Err(Error::Data(format!("{} trailing bytes after tensor", bytes.len())));
    }
    Ok(t)
}

pub fn save(path: impl AsRef<Path>, x: &DenseTensor) -> Result<()> {
    std::fs::write(path, to_bytes(x))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<DenseTensor> {
    let bytes = std::fs::read(path)?;
    from_bytes(&bytes)
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let x = DenseTensor::new(vec![1, 2], vec![1.5, -2.0]).unwrap();
        let b = to_bytes(&x);
        assert_eq!(&b[..4], b"UTT1");
        assert_eq!(&b[4..8], &2u32.to_le_bytes());
        assert_eq!(&b[8..12], &1u32.to_le_bytes());
        assert_eq!(&b[12..16], &2u32.to_le_bytes());
        assert_eq!(&b[16..24], &1.5f64.to_le_bytes());
        assert_eq!(b.len(), 32);
    }

    #[test]
    fn rejects_garbage() {
        assert!(from_bytes(b"NOPE").is_err());
        let mut b = to_bytes(&DenseTensor::zeros(&[2]).unwrap());
        b.pop();
        assert!(from_bytes(&b).is_err());
    }

    proptest! {
        #[test]
        fn bit_exact_round_trip(dims in proptest::collection::vec(1usize..4, 1..5), seed in any::<u64>()) {
            let len: usize = dims.iter().product();
            let data: Vec<f64> = (0..len)
                .map(|k| f64::from_bits(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k as u64) >> 2))
                .collect();
            let x = DenseTensor::new(dims, data).unwrap();
            let bytes = to_bytes(&x);
            let y = from_bytes(&bytes).unwrap();
            prop_assert_eq!(to_bytes(&y), bytes);
            prop_assert!(x.as_slice().iter().zip(y.as_slice()).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }
}
