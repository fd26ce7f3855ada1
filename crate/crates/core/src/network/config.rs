use serde::{Deserialize, Serialize};

use crate::dprtf::CHUNK_FRAMES;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    /// Full-band layer followed by a U-Net of narrow-band layers.
    Fun,
    /// Baseline: one full-band BLSTM and one narrow-band LSTM with
    /// input-concatenation skips.
    Fn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub n_blocks: usize,
    pub kind: BlockKind,
    pub c1: usize,
    pub c2: usize,
    pub n_mics: usize,
    pub n_sources: usize,
    pub n_bins: usize,
    /// Time down-sampling factors of the three U-Net levels.
    pub h: [usize; 3],
    pub chunk: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n_blocks: 2,
            kind: BlockKind::Fun,
            c1: 96,
            c2: 128,
            n_mics: 2,
            n_sources: 2,
            n_bins: 257,
            h: [2, 2, 3],
            chunk: CHUNK_FRAMES,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_blocks == 0 {
            return bad("n_blocks must be at least 1".into());
        }
        if self.c1 < 2 || self.c1 % 2 != 0 {
            return bad(format!("c1 = {} must be even and positive", self.c1));
        }
        if self.c2 == 0 || self.n_bins < 2 || self.n_sources == 0 {
            return bad("c2, n_bins and n_sources must be positive".into());
        }
        if self.n_mics < 2 {
            return bad(format!("n_mics = {} (need at least 2)", self.n_mics));
        }
        if self.h.iter().any(|&h| h == 0) {
            return bad(format!("zero down-sampling factor in {:?}", self.h));
        }
        if self.chunk != CHUNK_FRAMES {
            return bad(format!("chunk = {} (targets use {CHUNK_FRAMES})", self.chunk));
        }
        if self.kind == BlockKind::Fun && self.h.iter().product::<usize>() != self.chunk {
            return bad(format!("product of h {:?} must equal chunk {}", self.h, self.chunk));
        }
        Ok(())
    }

    pub fn input_channels(&self) -> usize {
        2 * self.n_mics
    }

    pub fn output_channels(&self) -> usize {
        2 * (self.n_mics - 1) * self.n_sources
    }
}
