//! Access to the run configurations shipped in `configs/`, for the
//! acceptance suite.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use adaptive_bdf_cli::{CliError, RunConfig};

pub fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Every `*.toml` in [`configs_dir`], keyed by file stem.
pub fn shipped_configs() -> Result<BTreeMap<String, RunConfig>, CliError> {
    let dir = configs_dir();
    let entries = std::fs::read_dir(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut out = BTreeMap::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::Io(e.to_string()))?.path();
        if path.extension().is_some_and(|e| e == "toml") {
            let name = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            out.insert(name, RunConfig::load(&path)?);
        }
    }
    Ok(out)
}
