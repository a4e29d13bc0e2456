pub mod events;
pub mod metrics;
pub mod rerun;
pub mod synth;
pub mod validate;

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};

pub(crate) fn ensure_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

/// Serializes a report as pretty JSON with a trailing newline; output is
/// byte-identical across runs of the same inputs (no timestamps inside).
pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut body = serde_json::to_vec_pretty(value)?;
    body.push(b'\n');
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
