//! Flat little-endian float64 parameter files with a JSON shape manifest
//! stored next to them (`name.bin` + `name.json`).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::layout::Layout;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub dtype: String,
    pub layout: Layout,
}

fn manifest_path(bin: &Path) -> PathBuf {
    bin.with_extension("json")
}

pub fn save_checkpoint(bin: impl AsRef<Path>, layout: &Layout, params: &[f64]) -> Result<()> {
    let bin = bin.as_ref();
    if params.len() != layout.len {
        return Err(Error::shape(layout.len, params.len()));
    }
    let mut bytes = Vec::with_capacity(params.len() * 8);
    for p in params {
        bytes.extend_from_slice(&p.to_le_bytes());
    }
    std::fs::write(bin, bytes).map_err(|e| Error::io(bin, e))?;
    let manifest = Manifest {
        dtype: "f64le".into(),
        layout: layout.clone(),
    };
    let path = manifest_path(bin);
    let text = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(())
}

pub fn load_checkpoint(bin: impl AsRef<Path>) -> Result<(Manifest, Vec<f64>)> {
    let bin = bin.as_ref();
    let path = manifest_path(bin);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    let bytes = std::fs::read(bin).map_err(|e| Error::io(bin, e))?;
    if bytes.len() != manifest.layout.len * 8 {
        return Err(Error::shape(manifest.layout.len * 8, bytes.len()));
    }
    let params = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((manifest, params))
}
