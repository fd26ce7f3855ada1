//! Direct-path relative transfer functions, training targets and the
//! candidate-direction template bank.

use std::f64::consts::PI;
use std::path::Path;

use funssl_autograd::Tensor;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, FrequencyGrid};
use crate::sim::Trajectory;

/// Frames per output chunk.
pub const CHUNK_FRAMES: usize = 12;
/// A chunk is active for a source when at least this many of its frames are.
pub const CHUNK_ACTIVE_MIN: usize = 6;
pub const N_AZIMUTHS: usize = 181;

/// `exp(-j 2π ν d cos θ / c)` for one bin.
pub fn dprtf(azimuth_deg: f64, k: usize, grid: &FrequencyGrid, array: &ArrayGeometry) -> Complex64 {
    let ipd = -2.0 * PI * grid.frequency(k) * array.tdoa(azimuth_deg);
    Complex64::new(ipd.cos(), ipd.sin())
}

/// Whole-band DP-RTF vector for one azimuth.
pub fn dprtf_vector(azimuth_deg: f64, grid: &FrequencyGrid, array: &ArrayGeometry) -> Vec<Complex64> {
    (0..grid.n_bins()).map(|k| dprtf(azimuth_deg, k, grid, array)).collect()
}

/// Templates for azimuths `0..=180` at 1° spacing, laid out `[θ][k][pair]`.
#[derive(Clone, Debug)]
pub struct TemplateBank {
    pub values: Vec<Complex64>,
    pub n_bins: usize,
    pub n_pairs: usize,
}

impl TemplateBank {
    pub fn new(array: &ArrayGeometry, grid: &FrequencyGrid) -> Self {
        let n_bins = grid.n_bins();
        let mut values = Vec::with_capacity(N_AZIMUTHS * n_bins);
        for theta in 0..N_AZIMUTHS {
            values.extend(dprtf_vector(theta as f64, grid, array));
        }
        Self {
            values,
            n_bins,
            n_pairs: 1,
        }
    }

    pub fn n_azimuths(&self) -> usize {
        N_AZIMUTHS
    }

    pub fn row(&self, theta: usize) -> &[Complex64] {
        let w = self.n_bins * self.n_pairs;
        &self.values[theta * w..(theta + 1) * w]
    }
}

/// Complex chunk targets `[chunk][k][pair][slot]` plus per-chunk labels.
#[derive(Clone, Debug, PartialEq)]
pub struct DpRtfTarget {
    pub values: Vec<Complex64>,
    pub n_chunks: usize,
    pub n_bins: usize,
    pub n_pairs: usize,
    pub n_slots: usize,
    pub labels: ChunkLabels,
}

/// Ground truth per chunk and source slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChunkLabels {
    pub n_slots: usize,
    /// `[chunk][slot]`
    pub active: Vec<bool>,
    /// `[chunk][slot]`, centre-frame azimuth in degrees (0 where the slot is unused).
    pub azimuth_deg: Vec<f64>,
}

impl ChunkLabels {
    pub fn n_chunks(&self) -> usize {
        self.active.len() / self.n_slots.max(1)
    }

    pub fn is_active(&self, chunk: usize, slot: usize) -> bool {
        self.active[chunk * self.n_slots + slot]
    }

    pub fn azimuth(&self, chunk: usize, slot: usize) -> f64 {
        self.azimuth_deg[chunk * self.n_slots + slot]
    }

    pub fn n_active(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }
}

impl DpRtfTarget {
    #[inline]
    pub fn index(&self, chunk: usize, k: usize, pair: usize, slot: usize) -> usize {
        ((chunk * self.n_bins + k) * self.n_pairs + pair) * self.n_slots + slot
    }

    pub fn get(&self, chunk: usize, k: usize, pair: usize, slot: usize) -> Complex64 {
        self.values[self.index(chunk, k, pair, slot)]
    }

    /// Real network layout `[chunk, k, 2·pairs·slots]`, channel
    /// `(pair·Q + slot)·2 + {0: re, 1: im}`.
    pub fn to_tensor(&self) -> Tensor<f32> {
        let mut out = Vec::with_capacity(self.values.len() * 2);
        for v in &self.values {
            out.push(v.re as f32);
            out.push(v.im as f32);
        }
        Tensor::new(
            &[self.n_chunks, self.n_bins, 2 * self.n_pairs * self.n_slots],
            out,
        )
        .expect("target layout")
    }

    /// Writes the cube as little-endian f32 plus a JSON sidecar `<path>.json`.
    pub fn write_debug_dump(&self, path: &Path) -> Result<()> {
        let t = self.to_tensor();
        let bytes: Vec<u8> = t.data().iter().flat_map(|v| v.to_le_bytes()).collect();
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
        let sidecar = serde_json::json!({
            "dtype": "f32",
            "endianness": "little",
            "shape": t.shape(),
            "layout": "chunk, bin, (pair * slots + slot) * 2 + re_im",
            "chunk_frames": CHUNK_FRAMES,
            "chunk_active_min": CHUNK_ACTIVE_MIN,
            "labels": self.labels,
        });
        let side = path.with_extension("json");
        std::fs::write(&side, serde_json::to_vec_pretty(&sidecar).expect("json"))
            .map_err(|e| Error::io(&side, e))
    }
}

/// Chunk-level targets: a slot is active if at least half of the chunk's
/// frames are, and then holds the DP-RTF of the centre-frame azimuth.
pub fn make_targets(
    trajs: &[Trajectory],
    array: &ArrayGeometry,
    grid: &FrequencyGrid,
    n_frames: usize,
    n_slots: usize,
) -> Result<DpRtfTarget> {
    if trajs.len() > n_slots {
        return Err(Error::Input(format!(
            "{} trajectories exceed the {n_slots} source slots",
            trajs.len()
        )));
    }
    for t in trajs {
        if t.azimuth_deg.len() < n_frames || t.active.len() < n_frames {
            return Err(Error::Input(format!(
                "trajectory covers {} frames, need {n_frames}",
                t.azimuth_deg.len().min(t.active.len())
            )));
        }
    }
    let n_chunks = n_frames / CHUNK_FRAMES;
    let n_bins = grid.n_bins();
    let mut target = DpRtfTarget {
        values: vec![Complex64::new(0.0, 0.0); n_chunks * n_bins * n_slots],
        n_chunks,
        n_bins,
        n_pairs: 1,
        n_slots,
        labels: ChunkLabels {
            n_slots,
            active: vec![false; n_chunks * n_slots],
            azimuth_deg: vec![0.0; n_chunks * n_slots],
        },
    };
    for (slot, t) in trajs.iter().enumerate() {
        for c in 0..n_chunks {
            let frames = c * CHUNK_FRAMES..(c + 1) * CHUNK_FRAMES;
            let count = t.active[frames].iter().filter(|&&a| a).count();
            let centre = c * CHUNK_FRAMES + CHUNK_FRAMES / 2;
            let az = t.azimuth_deg[centre];
            target.labels.azimuth_deg[c * n_slots + slot] = az;
            if count < CHUNK_ACTIVE_MIN {
                continue;
            }
            target.labels.active[c * n_slots + slot] = true;
            for k in 0..n_bins {
                let i = target.index(c, k, 0, slot);
                target.values[i] = dprtf(az, k, grid, array);
            }
        }
    }
    Ok(target)
}
