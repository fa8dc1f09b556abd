//! Subcommand implementations.
//!
//! Every command returns `CmdResult`; the failure carries the process exit
//! code. Config, usage, data, and io problems exit 2; a diverged training
//! run exits 3.

use std::path::{Path, PathBuf};

use landscape_core::data::Splits;
use landscape_core::train::TrajectoryRecord;
use landscape_core::{trajfile, Error};

pub mod control;
pub mod interp;
pub mod project;
pub mod surface;
pub mod train;

pub struct Failure {
    pub code: u8,
    pub message: String,
}

pub type CmdResult = Result<(), Failure>;

impl Failure {
    pub fn usage(message: impl Into<String>) -> Failure {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        let code = if matches!(e, Error::Diverged { .. }) { 3 } else { 2 };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

/// Writes `content` to `dir/name`, creating the directory first.
pub fn write_text(dir: &Path, name: &str, content: &str) -> Result<PathBuf, Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, content).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Loads a trajectory and rebuilds the dataset splits it was trained on.
pub fn load_record(path: &Path) -> Result<(TrajectoryRecord, Splits), Failure> {
    let record = trajfile::load_trajectory(path)?;
    let splits = record.data().build()?;
    Ok((record, splits))
}

/// Output directory defaulting to the trajectory file's parent.
pub fn out_dir_or_parent(out: &Option<PathBuf>, trajectory: &Path) -> PathBuf {
    out.clone().unwrap_or_else(|| {
        trajectory
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."))
            .to_path_buf()
    })
}

/// Comma-separated f64 list.
pub fn parse_float_list(flag: &str, text: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(str::trim)
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| Failure::usage(format!("{flag}: '{tok}' is not a number")))
        })
        .collect()
}

/// Comma-separated usize list.
pub fn parse_usize_list(flag: &str, text: &str) -> Result<Vec<usize>, Failure> {
    text.split(',')
        .map(str::trim)
        .map(|tok| {
            tok.parse::<usize>()
                .map_err(|_| Failure::usage(format!("{flag}: '{tok}' is not an integer")))
        })
        .collect()
}
