use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::bundle::ModelBundle;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "tscl-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize)]
struct FileOut<'a> {
    format: &'a str,
    version: u32,
    bundle: &'a ModelBundle,
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Deserialize)]
struct FileIn {
    bundle: ModelBundle,
}

/// Pretty-printed JSON; floats are written in shortest round-trip form so
/// a load reproduces every parameter bit for bit.
pub fn save_checkpoint(bundle: &ModelBundle, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(&FileOut {
        format: CHECKPOINT_FORMAT,
        version: CHECKPOINT_VERSION,
        bundle,
    })?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelBundle> {
    let path = path.as_ref();
    let fail = |message: String| Error::Checkpoint {
        path: path.to_path_buf(),
        message,
    };
    let text = fs::read_to_string(path)?;
    let header: Header = serde_json::from_str(&text).map_err(|e| fail(format!("unreadable header: {e}")))?;
    if header.format != CHECKPOINT_FORMAT {
        return Err(fail(format!("format {:?} is not {CHECKPOINT_FORMAT:?}", header.format)));
    }
    if header.version != CHECKPOINT_VERSION {
        return Err(fail(format!("version {} unsupported (expected {CHECKPOINT_VERSION})", header.version)));
    }
    let file: FileIn = serde_json::from_str(&text).map_err(|e| fail(format!("corrupt body: {e}")))?;
    file.bundle.validate().map_err(|e| fail(format!("inconsistent shapes: {e}")))?;
    Ok(file.bundle)
}
