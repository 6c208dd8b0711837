//! Policy checkpoints as JSON with the training config digest.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::policy::PolicyParams;
use super::rollout::VERSION;
use crate::error::{Result, StowError};

pub const FORMAT: &str = "stowlab-policy";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub format_version: u32,
    pub version: String,
    pub config_digest: String,
    pub seed: u64,
    pub params: PolicyParams,
}

impl Checkpoint {
    pub fn new(params: PolicyParams, config_digest: String, seed: u64) -> Self {
        Self {
            format: FORMAT.into(),
            format_version: FORMAT_VERSION,
            version: VERSION.into(),
            config_digest,
            seed,
            params,
        }
    }

    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer(w, self)?;
        Ok(())
    }

    /// Reads a checkpoint and refuses it unless it was trained on `expected_digest`.
    pub fn read<R: Read>(r: R, expected_digest: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_reader(r)?;
        if c.format != FORMAT || c.format_version != FORMAT_VERSION {
            return Err(StowError::Parse {
                line: 1,
                detail: format!("unsupported checkpoint format {} v{}", c.format, c.format_version),
            });
        }
        if c.config_digest != expected_digest {
            return Err(StowError::DigestMismatch {
                expected: expected_digest.into(),
                found: c.config_digest,
            });
        }
        if !c.params.is_finite() {
            return Err(StowError::Contract("checkpoint holds non-finite parameters".into()));
        }
        Ok(c)
    }
}
