use funssl_autograd::{Scalar, Tensor};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dprtf::TemplateBank;
use crate::error::{Error, Result};

/// Azimuth and activity score of one estimate slot in one chunk.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotEstimate {
    pub azimuth_deg: f64,
    pub score: f64,
}

/// Decoded estimates `[chunk][slot]`. Activity is `score >= threshold`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decoding {
    pub n_slots: usize,
    pub slots: Vec<SlotEstimate>,
}

impl Decoding {
    pub fn n_chunks(&self) -> usize {
        self.slots.len() / self.n_slots.max(1)
    }

    pub fn get(&self, chunk: usize, slot: usize) -> SlotEstimate {
        self.slots[chunk * self.n_slots + slot]
    }

    pub fn is_active(&self, chunk: usize, slot: usize, threshold: f64) -> bool {
        self.get(chunk, slot).score >= threshold
    }
}

/// Best-matching template for one complex estimate `[k][pair]`. The score is
/// its mean magnitude; the azimuth maximizes the real correlation with the
/// template, normalized by the total magnitude (lowest azimuth on ties).
pub fn decode_vector(d: &[Complex64], bank: &TemplateBank) -> Result<SlotEstimate> {
    if d.len() != bank.n_bins * bank.n_pairs {
        return Err(Error::Dimension(format!(
            "estimate has {} entries, the bank expects {} bins x {} pairs",
            d.len(),
            bank.n_bins,
            bank.n_pairs
        )));
    }
    let mag: f64 = d.iter().map(|v| v.norm()).sum();
    let mut best = (0, f64::NEG_INFINITY);
    for theta in 0..bank.n_azimuths() {
        let corr: f64 = d
            .iter()
            .zip(bank.row(theta))
            .map(|(a, t)| a.re * t.re + a.im * t.im)
            .sum();
        let s = if mag > 0.0 { corr / mag } else { 0.0 };
        if s > best.1 {
            best = (theta, s);
        }
    }
    Ok(SlotEstimate {
        azimuth_deg: best.0 as f64,
        score: mag / d.len() as f64,
    })
}

/// Decodes a network output `[chunks, K, 2·pairs·Q]` (channel
/// `(pair·Q + slot)·2 + re/im`).
pub fn decode<T: Scalar>(estimates: &Tensor<T>, bank: &TemplateBank, n_slots: usize) -> Result<Decoding> {
    let shape = estimates.shape();
    let want = 2 * bank.n_pairs * n_slots;
    if shape.len() != 3 || shape[1] != bank.n_bins || shape[2] != want {
        return Err(Error::Dimension(format!(
            "estimates {shape:?} do not match [chunks, {}, {want}]",
            bank.n_bins
        )));
    }
    let data = estimates.data();
    let n_chunks = shape[0];
    let mut slots = Vec::with_capacity(n_chunks * n_slots);
    let mut buf = vec![Complex64::new(0.0, 0.0); bank.n_bins * bank.n_pairs];
    for c in 0..n_chunks {
        for q in 0..n_slots {
            for k in 0..bank.n_bins {
                for p in 0..bank.n_pairs {
                    let base = (c * bank.n_bins + k) * want + (p * n_slots + q) * 2;
                    let re = data[base].to_f64().unwrap_or(f64::NAN);
                    let im = data[base + 1].to_f64().unwrap_or(f64::NAN);
                    buf[k * bank.n_pairs + p] = Complex64::new(re, im);
                }
            }
            slots.push(decode_vector(&buf, bank)?);
        }
    }
    Ok(Decoding { n_slots, slots })
}
