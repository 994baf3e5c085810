//! Parameter dumps.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! u64 layer_count
//! per layer:
//!     u64 out_dim
//!     u64 in_dim
//!     f64 x (out_dim * in_dim)   weights, row-major
//!     f64 x out_dim              biases
//! ```
//!
//! Activations are not stored; they come from the network config the dump is
//! loaded into.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::network::Network;

pub fn encode_parameters(net: &Network) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + net.parameter_count() * 8 + net.layers().len() * 16);
    out.extend_from_slice(&(net.layers().len() as u64).to_le_bytes());
    for layer in net.layers() {
        out.extend_from_slice(&(layer.out_dim() as u64).to_le_bytes());
        out.extend_from_slice(&(layer.in_dim() as u64).to_le_bytes());
        for x in layer.weights.data().iter().chain(layer.biases.data()) {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

/// `(weights, biases)` per layer.
pub fn decode_parameters(bytes: &[u8]) -> Result<Vec<(Matrix, Matrix)>> {
    let mut cursor = Cursor { bytes, pos: 0 };
    let count = cursor.u64()? as usize;
    let mut layers = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let out_dim = cursor.u64()? as usize;
        let in_dim = cursor.u64()? as usize;
        let weights = cursor.f64s(out_dim.checked_mul(in_dim).ok_or_else(too_big)?)?;
        let biases = cursor.f64s(out_dim)?;
        layers.push((
            Matrix::new(out_dim, in_dim, weights)?,
            Matrix::new(out_dim, 1, biases)?,
        ));
    }
    if cursor.pos != bytes.len() {
        return Err(Error::invalid(format!(
            "checkpoint has {} trailing bytes",
            bytes.len() - cursor.pos
        )));
    }
    Ok(layers)
}

fn too_big() -> Error {
    Error::invalid("checkpoint dimensions overflow")
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).ok_or_else(too_big)?;
        if end > self.bytes.len() {
            return Err(Error::invalid(format!(
                "checkpoint truncated at byte {} (needs {end})",
                self.bytes.len()
            )));
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(too_big)?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn save_parameters(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_parameters(net)).map_err(|e| Error::io(path, e))
}

/// Overwrites `net`'s parameters with the dump at `path`.
pub fn load_parameters(net: &mut Network, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let params = decode_parameters(&bytes)?;
    let layers = params
        .into_iter()
        .zip(net.layers())
        .map(|((weights, biases), old)| crate::network::Layer {
            weights,
            biases,
            activation: old.activation,
        })
        .collect::<Vec<_>>();
    if layers.len() != net.layers().len() {
        return Err(Error::invalid("checkpoint layer count differs from network"));
    }
    net.set_layers(layers)
}
