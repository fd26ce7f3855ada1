use funssl_autograd::Tensor;
use rayon::prelude::*;

use crate::dprtf::{make_targets, ChunkLabels, CHUNK_FRAMES};
use crate::dsp::{laplace_normalize, read_wav, StftConfig, StftEngine, Waveform};
use crate::error::{Error, Result};
use crate::geometry::ArrayGeometry;
use crate::network::ModelConfig;
use crate::sim::{read_labels, Manifest, SceneEntry};

/// One training or evaluation example.
#[derive(Clone, Debug)]
pub struct Sample {
    pub id: String,
    /// `[chunks·12, K, 2M]`
    pub features: Tensor<f32>,
    /// `[chunks, K, 2·pairs·Q]`
    pub target: Tensor<f32>,
    pub labels: ChunkLabels,
    pub array: ArrayGeometry,
    pub sample_rate: u32,
}

/// Normalized network input for `w`. Frames past the last complete chunk are
/// dropped; the model is causal, so this does not change any kept output.
pub fn prepare_features(w: &Waveform, engine: &StftEngine) -> Result<Tensor<f32>> {
    let spec = engine.stft(w)?;
    let x = laplace_normalize(&spec)?;
    let keep = spec.n_frames / CHUNK_FRAMES * CHUNK_FRAMES;
    if keep == 0 {
        return Err(Error::Input(format!(
            "{} frames do not fill one {CHUNK_FRAMES}-frame chunk",
            spec.n_frames
        )));
    }
    let per_frame = spec.n_bins * 2 * spec.n_channels;
    let data = x.data()[..keep * per_frame].to_vec();
    Ok(Tensor::new(&[keep, spec.n_bins, 2 * spec.n_channels], data)?)
}

fn check_model(model: &ModelConfig, stft: &StftConfig, n_channels: usize) -> Result<()> {
    if model.n_bins != stft.n_bins() {
        return Err(Error::Config(format!(
            "model expects {} bins, data has {}",
            model.n_bins,
            stft.n_bins()
        )));
    }
    if model.n_mics != n_channels {
        return Err(Error::Config(format!(
            "model expects {} microphones, data has {n_channels}",
            model.n_mics
        )));
    }
    Ok(())
}

pub fn load_sample(manifest: &Manifest, entry: &SceneEntry, model: &ModelConfig) -> Result<Sample> {
    let engine = StftEngine::new(manifest.stft)?;
    let w = read_wav(manifest.wav_path(entry))?;
    check_model(model, &manifest.stft, w.n_channels())?;
    let features = prepare_features(&w, &engine)?;
    let trajs = read_labels(&manifest.labels_path(entry))?;
    let grid = manifest.stft.grid(w.sample_rate);
    let target = make_targets(&trajs, &entry.spec.array, &grid, features.shape()[0], model.n_sources)?;
    Ok(Sample {
        id: entry.id.clone(),
        features,
        target: target.to_tensor(),
        labels: target.labels,
        array: entry.spec.array.clone(),
        sample_rate: w.sample_rate,
    })
}

/// Every scene of `manifest`, in manifest order.
pub fn load_samples(manifest: &Manifest, model: &ModelConfig) -> Result<Vec<Sample>> {
    manifest
        .scenes
        .par_iter()
        .map(|e| load_sample(manifest, e, model))
        .collect()
}
