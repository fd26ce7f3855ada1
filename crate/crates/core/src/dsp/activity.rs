use super::{StftConfig, Waveform};

/// Frames whose energy falls more than this far below the loudest frame are inactive.
pub const ACTIVITY_THRESHOLD_DB: f64 = 30.0;

/// Energy of each full analysis frame of channel 0.
pub fn frame_energies(w: &Waveform, config: StftConfig) -> Vec<f64> {
    let x = &w.channels[0];
    (0..config.n_frames(x.len()))
        .map(|n| {
            let start = n * config.hop;
            x[start..start + config.window_len].iter().map(|v| v * v).sum()
        })
        .collect()
}

/// Per-frame activity of a clean single-source signal: active iff the frame
/// energy is within `threshold_db` of the loudest frame.
pub fn frame_activity(clean: &Waveform, config: StftConfig, threshold_db: f64) -> Vec<bool> {
    let e = frame_energies(clean, config);
    let peak = e.iter().copied().fold(0.0, f64::max);
    if peak <= 0.0 {
        return vec![false; e.len()];
    }
    let floor = peak * 10f64.powf(-threshold_db / 10.0);
    e.iter().map(|&v| v >= floor).collect()
}
