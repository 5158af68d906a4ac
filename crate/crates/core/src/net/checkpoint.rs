//! Binary checkpoint format.
//!
//! ```text
//! "KRONOPT-CKPT v1\n"
//! u32 layer count
//! per layer:
//!   u32 in_dim, u32 out_dim, u8 activation tag, u8 has_bias
//!   out_dim·in_dim f64 weights, row-major
//!   out_dim f64 bias (only when has_bias = 1)
//! ```
//!
//! All integers and floats are little-endian. Activation tags: 0 identity,
//! 1 relu, 2 tanh, 3 sigmoid.

use super::{Activation, Layer, LayerSpec, Network};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use std::io::{Read, Write};

pub const CHECKPOINT_MAGIC: &[u8] = b"KRONOPT-CKPT v1\n";

pub fn write_checkpoint<W: Write>(net: &Network, mut out: W) -> Result<()> {
    out.write_all(CHECKPOINT_MAGIC)?;
    out.write_all(&(net.layers.len() as u32).to_le_bytes())?;
    for layer in &net.layers {
        let s = layer.spec;
        out.write_all(&(s.in_dim as u32).to_le_bytes())?;
        out.write_all(&(s.out_dim as u32).to_le_bytes())?;
        out.write_all(&[s.activation.tag(), layer.bias.is_some() as u8])?;
        for v in layer.weight.as_slice() {
            out.write_all(&v.to_le_bytes())?;
        }
        if let Some(b) = &layer.bias {
            for v in b.as_slice() {
                out.write_all(&v.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format("checkpoint truncated".into()),
        _ => Error::Io(e),
    })
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; 8 * n];
    read_exact(r, &mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<Network> {
    let mut magic = vec![0u8; CHECKPOINT_MAGIC.len()];
    read_exact(&mut input, &mut magic)?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a KRONOPT-CKPT v1 file".into()));
    }
    let count = read_u32(&mut input)? as usize;
    if count == 0 {
        return Err(Error::Format("checkpoint has no layers".into()));
    }
    let mut layers = Vec::with_capacity(count);
    for _ in 0..count {
        let in_dim = read_u32(&mut input)? as usize;
        let out_dim = read_u32(&mut input)? as usize;
        let mut tags = [0u8; 2];
        read_exact(&mut input, &mut tags)?;
        let activation = Activation::from_tag(tags[0])
            .ok_or_else(|| Error::Format(format!("unknown activation tag {}", tags[0])))?;
        let has_bias = match tags[1] {
            0 => false,
            1 => true,
            t => return Err(Error::Format(format!("bad bias flag {t}"))),
        };
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::Format("zero layer dimension".into()));
        }
        let weight = Matrix::from_vec(out_dim, in_dim, read_f64s(&mut input, in_dim * out_dim)?)?;
        let bias = if has_bias {
            Some(Vector::from_vec(read_f64s(&mut input, out_dim)?))
        } else {
            None
        };
        layers.push(Layer {
            spec: LayerSpec::new(in_dim, out_dim, activation, has_bias),
            weight,
            bias,
        });
    }
    for w in layers.windows(2) {
        if w[0].spec.out_dim != w[1].spec.in_dim {
            return Err(Error::Format("adjacent layer dimensions disagree".into()));
        }
    }
    Ok(Network { layers })
}
