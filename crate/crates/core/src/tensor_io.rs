//! `PTNSR1` tensor files: the 6-byte magic `PTNSR1`, a little-endian `u32`
//! rank, one little-endian `u64` per dimension, then the row-major `f64`
//! payload in little-endian order.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Mat;

pub const MAGIC: &[u8; 6] = b"PTNSR1";

/// An n-dimensional `f64` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!("shape {shape:?} needs {n} values, got {}", data.len())));
        }
        Ok(Tensor { shape, data })
    }

    pub fn to_mat(&self) -> Result<Mat> {
        match self.shape[..] {
            [r, c] => Ok(Mat::from_vec(r, c, self.data.clone())),
            _ => Err(Error::Shape(format!("expected a rank-2 tensor, got shape {:?}", self.shape))),
        }
    }
}

impl From<&Mat> for Tensor {
    fn from(m: &Mat) -> Self {
        Tensor { shape: vec![m.rows(), m.cols()], data: m.as_slice().to_vec() }
    }
}

pub fn encode(t: &Tensor, mut out: impl Write) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&(t.shape.len() as u32).to_le_bytes())?;
    for &d in &t.shape {
        out.write_all(&(d as u64).to_le_bytes())?;
    }
    for v in &t.data {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<Tensor> {
    let bad = |msg: &str| Error::TensorFormat { path: path.to_path_buf(), msg: msg.into() };
    let mut r = bytes;
    let mut magic = [0u8; 6];
    r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
    if &magic != MAGIC {
        return Err(bad("bad magic"));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4).map_err(|_| bad("truncated rank"))?;
    let rank = u32::from_le_bytes(b4) as usize;
    let mut shape = Vec::with_capacity(rank);
    let mut b8 = [0u8; 8];
    for _ in 0..rank {
        r.read_exact(&mut b8).map_err(|_| bad("truncated shape"))?;
        shape.push(usize::try_from(u64::from_le_bytes(b8)).map_err(|_| bad("dimension overflows usize"))?);
    }
    let n = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| bad("element count overflows"))?;
    if r.len() != n * 8 {
        return Err(bad(&format!("payload has {} bytes, expected {}", r.len(), n * 8)));
    }
    let data = r.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    Ok(Tensor { shape, data })
}

pub fn write_tensor(path: &Path, t: &Tensor) -> Result<()> {
    let mut buf = Vec::with_capacity(10 + 8 * (t.shape.len() + t.data.len()));
    encode(t, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    decode(&fs::read(path)?, path)
}
