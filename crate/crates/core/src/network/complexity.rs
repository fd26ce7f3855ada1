//! Closed-form parameter and FLOP counts.
//!
//! FLOPs count one multiply-accumulate as 2. An LSTM step with input `D` and
//! hidden `H` costs `2·4H(D + H) + 11H`. Per-second rates use the frame rate
//! divided by the cumulative time down-sampling at each scale and the exact
//! frequency extent of that scale.

use serde::Serialize;

use super::{scale_extents, BlockKind, ModelConfig};

fn fc_params(din: usize, dout: usize) -> usize {
    din * dout + dout
}

fn lstm_params(din: usize, h: usize) -> usize {
    4 * h * (din + h) + 4 * h
}

fn dw_params(c: usize, k1: usize, k2: usize) -> usize {
    c * k1 * k2 + c
}

/// Exact parameter count, matching the tensors declared for `cfg`.
pub fn count_params(cfg: &ModelConfig) -> usize {
    let c1 = cfg.c1;
    let act_norm = 1 + 2 * c1;
    let mut total = 0;
    for i in 0..cfg.n_blocks {
        let cin = if i == 0 { cfg.input_channels() } else { c1 };
        total += match cfg.kind {
            BlockKind::Fun => {
                let down: usize = cfg.h.iter().map(|&h| dw_params(c1, 5, 2 * h) + act_norm).sum();
                fc_params(cin, c1)
                    + act_norm
                    + 2 * lstm_params(c1, c1 / 2)
                    + 2 * down
                    + 4 * lstm_params(c1, c1)
            }
            BlockKind::Fn => {
                2 * lstm_params(cin, c1 / 2) + lstm_params(c1 + cin, c1) + fc_params(c1 + cin, c1)
            }
        };
    }
    total + fc_params(c1, cfg.c2) + 1 + dw_params(cfg.c2, 3, 3) + fc_params(cfg.c2, cfg.output_channels())
}

fn lstm_flops(din: usize, h: usize) -> f64 {
    (2 * 4 * h * (din + h) + 11 * h) as f64
}

/// FLOPs per second of audio at `frames_per_second` input frames.
pub fn count_flops(cfg: &ModelConfig, frames_per_second: f64) -> f64 {
    let c1 = cfg.c1 as f64;
    let k = cfg.n_bins as f64;
    let ext = scale_extents(cfg, 1);
    // positions (frame x bin) per second at each scale
    let mut rate = [0.0; 4];
    let mut time = frames_per_second;
    for s in 0..4 {
        if s > 0 {
            time /= cfg.h[s - 1] as f64;
        }
        rate[s] = time * ext[s][1] as f64;
    }
    let act_norm = 5.0 * c1;
    let mut total = 0.0;
    for i in 0..cfg.n_blocks {
        let cin = if i == 0 { cfg.input_channels() } else { cfg.c1 };
        match cfg.kind {
            BlockKind::Fun => {
                total += rate[0]
                    * (2.0 * cin as f64 * c1 + act_norm + 2.0 * lstm_flops(cfg.c1, cfg.c1 / 2));
                for j in 1..=3 {
                    let h = cfg.h[j - 1] as f64;
                    let skip = if i > 0 { c1 } else { 0.0 };
                    total += rate[j] * (2.0 * 10.0 * h * c1 + act_norm + skip);
                }
                for s in 0..=3 {
                    let add = if s < 3 { c1 } else { 0.0 };
                    total += rate[s] * (lstm_flops(cfg.c1, cfg.c1) + add);
                }
                for j in 1..=3 {
                    let h = cfg.h[3 - j] as f64;
                    total += rate[4 - j] * 2.0 * 10.0 * h * c1 + rate[3 - j] * act_norm;
                }
            }
            BlockKind::Fn => {
                let cat = (cfg.c1 + cin) as f64;
                total += rate[0]
                    * (2.0 * lstm_flops(cin, cfg.c1 / 2)
                        + lstm_flops(cfg.c1 + cin, cfg.c1)
                        + 2.0 * cat * c1);
            }
        }
    }
    let c2 = cfg.c2 as f64;
    let head = frames_per_second / cfg.chunk as f64 * k;
    total += rate[0] * c1;
    total += head * (2.0 * c1 * c2 + c2 + 18.0 * c2 + 2.0 * c2 * cfg.output_channels() as f64);
    total
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComplexityRow {
    pub kind: BlockKind,
    pub n_blocks: usize,
    pub c1: usize,
    pub params: usize,
    pub flops_per_second: f64,
}

/// Rows for `base` with each block count in `blocks`.
pub fn complexity_table(base: &ModelConfig, blocks: &[usize], frames_per_second: f64) -> Vec<ComplexityRow> {
    blocks
        .iter()
        .map(|&n| {
            let cfg = ModelConfig {
                n_blocks: n,
                ..base.clone()
            };
            ComplexityRow {
                kind: cfg.kind,
                n_blocks: n,
                c1: cfg.c1,
                params: count_params(&cfg),
                flops_per_second: count_flops(&cfg, frames_per_second),
            }
        })
        .collect()
}
