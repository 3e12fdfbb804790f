//! Plain-text file formats: datasets, confidence grids, experiment configs
//! and benchmark result rows.
//!
//! Every writer is deterministic and uses LF line endings. Reals are written
//! with 17 significant digits so 64-bit values survive a round trip exactly.

mod config;
mod dataset;
mod grid;
mod results;

pub use config::{parse_config, read_config, write_config, ExperimentConfig, PolicyKind};
pub use dataset::{
    format_dataset, parse_dataset, read_dataset, write_dataset, write_refined, RefinedRow,
};
pub use grid::{format_grid, parse_grid, read_grid, write_grid, GridData, GridSpec};
pub use results::{append_bench_results, bench_row, BENCH_HEADER};

use std::path::Path;

use crate::scalar::Scalar;

/// `{:.16e}`: 17 significant digits.
pub(crate) fn fmt_real<T: Scalar>(v: T) -> String {
    format!("{:.16e}", v.to_f64_lossy())
}

pub(crate) fn write_text(path: &Path, text: &str) -> crate::Result<()> {
    std::fs::write(path, text.as_bytes())?;
    Ok(())
}
