//! File formats and configuration.

pub mod config;
pub mod csv;
pub mod report;
pub mod timetag;

pub use config::{CoherentRun, ConfigMap, RunSpec};
pub use report::{fmt_num, Report};
pub use timetag::{TimetagFile, TimetagHeader};

use sha2::{Digest, Sha256};

/// Hex SHA-256 of `bytes`, used for manifests.
pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
