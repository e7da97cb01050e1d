//! Versioned structured-text (JSON) persistence for model bundles.
//!
//! Floats are written in shortest round-trip form, so save/load/save is
//! byte-identical and reloaded models reproduce outputs bit-for-bit.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile<T> {
    format_version: u32,
    kind: String,
    model: T,
}

pub fn save_model<T: Serialize>(path: impl AsRef<Path>, kind: &str, model: &T) -> Result<()> {
    let path = path.as_ref();
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        kind: kind.to_string(),
        model,
    };
    let text = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::Invalid(format!("model serialization: {e}")))?;
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model<T: DeserializeOwned>(path: impl AsRef<Path>, kind: &str) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file: ModelFile<T> = serde_json::from_str(&text)
        .map_err(|e| Error::Invalid(format!("model parse {}: {e}", path.display())))?;
    if file.format_version != FORMAT_VERSION {
        return Err(Error::Invalid(format!(
            "model format version {} unsupported (expected {FORMAT_VERSION})",
            file.format_version
        )));
    }
    if file.kind != kind {
        return Err(Error::Invalid(format!(
            "model kind {:?} does not match expected {kind:?}",
            file.kind
        )));
    }
    Ok(file.model)
}
