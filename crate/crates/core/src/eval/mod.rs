//! Decoding DP-RTF estimates into azimuths and activity, the MDR = FAR
//! threshold calibration and chunk-level localization metrics.

mod calibrate;
mod decode;
mod metrics;

pub use calibrate::{calibrate_threshold, threshold_sweep, SweepPoint};
pub use decode::{decode, decode_vector, Decoding, SlotEstimate};
pub use metrics::{
    evaluate, write_metrics_csv, write_summary, Counts, MetricsReport, MetricsRow, SceneResult, ERROR_TOLERANCE_DEG,
};

use rayon::prelude::*;

use crate::dprtf::TemplateBank;
use crate::dsp::StftConfig;
use crate::error::Result;
use crate::network::Model;
use crate::training::Sample;

fn bank_for(s: &Sample, stft: StftConfig) -> TemplateBank {
    TemplateBank::new(&s.array, &stft.grid(s.sample_rate))
}

/// Runs `model` on every sample and decodes its output.
pub fn decode_samples(model: &Model, samples: &[Sample], stft: StftConfig) -> Result<Vec<SceneResult>> {
    samples
        .par_iter()
        .map(|s| {
            let est = model.infer(&s.features)?;
            Ok(SceneResult {
                id: s.id.clone(),
                decoding: decode(&est, &bank_for(s, stft), model.config.n_sources)?,
                labels: s.labels.clone(),
            })
        })
        .collect()
}

/// Decodes the ground-truth targets themselves.
pub fn decode_targets(samples: &[Sample], stft: StftConfig, n_slots: usize) -> Result<Vec<SceneResult>> {
    samples
        .par_iter()
        .map(|s| {
            Ok(SceneResult {
                id: s.id.clone(),
                decoding: decode(&s.target, &bank_for(s, stft), n_slots)?,
                labels: s.labels.clone(),
            })
        })
        .collect()
}
