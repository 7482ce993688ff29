//! File formats and the scenario runner.

pub mod calibration;
pub mod csv_out;
pub mod runner;
pub mod scenario;
pub mod waveform_file;

pub use calibration::{load_calibration, parse_calibration, render_calibration, Calibration};
pub use runner::{run_scenario, Check, RunReport};
pub use scenario::{load_scenario, parse_scenario, Analysis, Grid, Scenario};
pub use waveform_file::{export_waveform, ingest_waveform};

use std::path::Path;

use crate::error::Error;

/// Map a TOML error onto a positioned parse error.
pub(crate) fn parse_error(path: &Path, text: &str, e: &toml::de::Error) -> Error {
    let offset = e.span().map(|s| s.start).unwrap_or(0).min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map(|i| i + 1).unwrap_or(0) + 1;
    Error::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message: e.message().to_string(),
    }
}
