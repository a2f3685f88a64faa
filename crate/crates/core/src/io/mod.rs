//! Persistence, run configuration and plot output.

mod binary;
mod checkpoint;
mod config;
mod dataset_file;
mod report;
mod svg;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::RunConfig;
pub use dataset_file::{decode_dataset, decode_header, encode_dataset, read_dataset, write_dataset, DatasetHeader, DATASET_MAGIC, DATASET_VERSION};
pub use report::{read_curve, write_curve, write_metrics};
pub use svg::{curve_svg, trajectory_svg};

use std::path::Path;

use crate::error::Result;

/// Writes to a sibling temporary file and renames it into place.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = std::path::PathBuf::from(tmp);
    let result = std::fs::write(&tmp, bytes).and_then(|_| std::fs::rename(&tmp, path));
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    Ok(result?)
}
