//! Line-delimited JSON trace, one record per slot, for replay debugging.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::types::SlotMetrics;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub episode: usize,
    pub slot: usize,
    /// Hash of the observation the action was chosen from.
    pub obs_hash: String,
    pub action: Vec<f64>,
    pub reward: f64,
    pub metrics: SlotMetrics,
}

/// First 8 bytes of the SHA-256 over the little-endian observation bytes.
pub fn observation_hash(obs: &[f64]) -> String {
    let mut h = Sha256::new();
    for x in obs {
        h.update(x.to_le_bytes());
    }
    hex::encode(&h.finalize()[..8])
}

pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn write(&mut self, rec: &TraceRecord) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, rec)?;
        self.out.write_all(b"\n")
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}
