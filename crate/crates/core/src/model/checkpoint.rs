use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CumiModel;
use crate::error::{CumiError, Result};

pub const CHECKPOINT_FORMAT: &str = "cumi-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// On-disk wrapper around a model. Floats are written with shortest
/// round-trip formatting, so a reloaded model is bit-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub model: CumiModel,
}

pub fn save_checkpoint(model: &CumiModel, path: &Path) -> Result<()> {
    let ck = Checkpoint {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        model: model.clone(),
    };
    let text = serde_json::to_string(&ck)?;
    fs::write(path, text).map_err(|e| CumiError::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<CumiModel> {
    let text = fs::read_to_string(path).map_err(|e| CumiError::io(path, e))?;
    let ck: Checkpoint = serde_json::from_str(&text)?;
    let invalid = |msg: String| CumiError::Invalid {
        path: path.to_path_buf(),
        msg,
    };
    if ck.format != CHECKPOINT_FORMAT {
        return Err(invalid(format!("unexpected format tag {:?}", ck.format)));
    }
    if ck.version != CHECKPOINT_VERSION {
        return Err(invalid(format!(
            "checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
            ck.version
        )));
    }
    ck.model.validate().map_err(|e| invalid(e.to_string()))?;
    Ok(ck.model)
}
