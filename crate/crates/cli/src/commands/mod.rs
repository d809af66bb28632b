use std::path::Path;

use g2v_core::splat::{OccupancyHead, OccupancyHeadConfig};

use crate::args::{HeadArgs, HeadKind};
use crate::error::{CliError, CliResult};
use crate::output::{sha256_hex, Output};

pub mod bench;
pub mod bin;
pub mod eval;
pub mod gradcheck;
pub mod label;
pub mod query;
pub mod render;
pub mod splat;
pub mod synth;

#[derive(Debug, Clone, Copy)]
pub struct Context {
    pub out: Output,
    pub seed: u64,
}

pub fn head_config(h: &HeadArgs) -> CliResult<OccupancyHeadConfig> {
    let head = match h.head {
        HeadKind::Identity => OccupancyHead::Identity,
        HeadKind::Logistic => OccupancyHead::AffineLogistic { a: h.head_a, b: h.head_b },
    };
    Ok(OccupancyHeadConfig::new(head, h.tau)?)
}

/// Writes `bytes` and returns their SHA-256.
pub fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<String> {
    std::fs::write(path, bytes).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    Ok(sha256_hex(bytes))
}
