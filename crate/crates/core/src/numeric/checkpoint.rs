//! Binary parameter checkpoints.
//!
//! A block is the magic `IMRLPAR1`, the number of layer dims (u32 LE), the
//! dims themselves (u32 LE), then for each layer its weights followed by its
//! biases as f64 LE. Multi-network checkpoints are blocks written back to
//! back.

use std::io::{Read, Write};

use super::{DenseArray, MlpParams};
use crate::error::{ImrlError, Result};

pub const MAGIC: &[u8; 8] = b"IMRLPAR1";

pub fn write_params<W: Write>(out: &mut W, params: &MlpParams) -> std::io::Result<()> {
    out.write_all(MAGIC)?;
    let dims = params.layer_dims();
    out.write_all(&(dims.len() as u32).to_le_bytes())?;
    for &d in dims {
        out.write_all(&(d as u32).to_le_bytes())?;
    }
    for t in params.tensors() {
        for v in t {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    input
        .read_exact(&mut buf)
        .map_err(|e| ImrlError::format("checkpoint", e.to_string()))?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64s<R: Read>(input: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    input
        .read_exact(&mut buf)
        .map_err(|e| ImrlError::format("checkpoint", e.to_string()))?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

pub fn read_params<R: Read>(input: &mut R) -> Result<MlpParams> {
    let mut magic = [0u8; 8];
    input
        .read_exact(&mut magic)
        .map_err(|e| ImrlError::format("checkpoint", e.to_string()))?;
    if &magic != MAGIC {
        return Err(ImrlError::format("checkpoint", "bad magic bytes"));
    }
    let count = read_u32(input)? as usize;
    if !(2..=64).contains(&count) {
        return Err(ImrlError::format(
            "checkpoint",
            format!("implausible layer count {count}"),
        ));
    }
    let dims = (0..count)
        .map(|_| read_u32(input).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for pair in dims.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        weights.push(DenseArray::from_vec(
            &[fan_out, fan_in],
            read_f64s(input, fan_in * fan_out)?,
        )?);
        biases.push(DenseArray::from_vec(&[fan_out], read_f64s(input, fan_out)?)?);
    }
    MlpParams::from_parts(&dims, weights, biases)
}
