//! Flat little-endian `f64` weight files with a JSON index sidecar.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const WEIGHTS_SCHEMA_VERSION: u32 = 1;

/// A network whose tensors can be listed and replaced in a fixed order.
pub trait Parameterized {
    /// Named tensors in module order.
    fn tensors(&self) -> Vec<(String, &Tensor)>;

    /// Replaces every tensor, in the order of [`Parameterized::tensors`].
    fn replace(&mut self, values: Vec<Tensor>) -> Result<()>;

    fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.numel()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Offset into the binary file, in values (not bytes).
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightIndex {
    pub schema_version: u32,
    pub dtype: String,
    pub tensors: Vec<WeightEntry>,
}

fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes `path` (raw values) and `path` with a `.json` extension (index).
pub fn save_weights(net: &impl Parameterized, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    let mut tensors = Vec::new();
    let mut offset = 0;
    for (name, t) in net.tensors() {
        tensors.push(WeightEntry { name, shape: t.shape().to_vec(), offset });
        offset += t.numel();
        for v in t.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let index = WeightIndex { schema_version: WEIGHTS_SCHEMA_VERSION, dtype: "f64-le".into(), tensors };
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let side = sidecar(path);
    let json = serde_json::to_string_pretty(&index).expect("index serializes");
    std::fs::write(&side, json).map_err(|e| Error::io(&side, e))
}

/// Loads weights saved by [`save_weights`] into a network of the same layout.
pub fn load_weights(net: &mut impl Parameterized, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let side = sidecar(path);
    let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let index: WeightIndex = serde_json::from_str(&text).map_err(|e| Error::format(&side, e.to_string()))?;
    if index.schema_version != WEIGHTS_SCHEMA_VERSION || index.dtype != "f64-le" {
        return Err(Error::format(&side, format!("unsupported weights v{} {}", index.schema_version, index.dtype)));
    }
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::format(path, "length is not a multiple of 8 bytes"));
    }
    let values: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();

    let expected = net.tensors();
    if expected.len() != index.tensors.len() {
        return Err(Error::format(&side, format!("{} tensors, network has {}", index.tensors.len(), expected.len())));
    }
    let mut out = Vec::with_capacity(expected.len());
    for ((name, t), entry) in expected.iter().zip(&index.tensors) {
        if *name != entry.name || t.shape() != entry.shape.as_slice() {
            return Err(Error::format(
                &side,
                format!("expected {name} {:?}, found {} {:?}", t.shape(), entry.name, entry.shape),
            ));
        }
        let data = values
            .get(entry.offset..entry.offset + t.numel())
            .ok_or_else(|| Error::format(path, format!("{name} runs past the end of the file")))?;
        out.push(Tensor::new(entry.shape.clone(), data.to_vec())?);
    }
    net.replace(out)
}
