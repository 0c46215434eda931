//! Versioned JSON serialization of fitted models.
//!
//! JSON numbers are written with serde_json's shortest round-trip `f64`
//! encoding, so `load(save(m))` reproduces every numeric field bit-exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::CmdError;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    /// Column names of the dataset the model was fitted on.
    pub series_names: Vec<String>,
    pub model: rrvar::var::VarModel,
}

impl ModelFile {
    pub fn new(series_names: Vec<String>, model: rrvar::var::VarModel) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            series_names,
            model,
        }
    }
}

pub fn save(path: &Path, file: &ModelFile) -> Result<(), CmdError> {
    let json = serde_json::to_string_pretty(file)
        .map_err(|e| CmdError::usage(format!("model serialization failed: {e}")))?;
    fs::write(path, json + "\n")
        .map_err(|e| CmdError::usage(format!("cannot write {}: {e}", path.display())))
}

pub fn load(path: &Path) -> Result<ModelFile, CmdError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CmdError::usage(format!("cannot read {}: {e}", path.display())))?;
    let file: ModelFile = serde_json::from_str(&text)
        .map_err(|e| CmdError::usage(format!("{}: invalid model file: {e}", path.display())))?;
    if file.format_version != FORMAT_VERSION {
        return Err(CmdError::usage(format!(
            "{}: unsupported format_version {} (expected {FORMAT_VERSION})",
            path.display(),
            file.format_version
        )));
    }
    Ok(file)
}
