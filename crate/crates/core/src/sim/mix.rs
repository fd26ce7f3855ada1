use crate::dsp::{StftConfig, Waveform};
use crate::error::{Error, Result};

pub struct Mixture {
    pub mixture: Waveform,
    pub noise_scale: f64,
}

/// Mean per-sample power of channel 0 over the frames flagged in `active`.
pub fn active_power(w: &Waveform, active: &[bool], config: StftConfig) -> f64 {
    let x = &w.channels[0];
    let mut total = 0.0;
    let mut count = 0usize;
    for (n, &a) in active.iter().enumerate() {
        let start = n * config.hop;
        if !a || start + config.window_len > x.len() {
            continue;
        }
        total += x[start..start + config.window_len].iter().map(|v| v * v).sum::<f64>();
        count += config.window_len;
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

/// Scales `noise` so that the reference-channel SNR over active frames equals
/// `snr_db`, and adds it to `direct`.
pub fn mix_at_snr(
    direct: &Waveform,
    noise: &Waveform,
    snr_db: f64,
    active: &[bool],
    config: StftConfig,
) -> Result<Mixture> {
    if direct.n_channels() != noise.n_channels() || direct.len() != noise.len() {
        return Err(Error::Input(format!(
            "direct {}x{} and noise {}x{} differ",
            direct.n_channels(),
            direct.len(),
            noise.n_channels(),
            noise.len()
        )));
    }
    let ps = active_power(direct, active, config);
    let pn = active_power(noise, active, config);
    if !(ps > 0.0) || !(pn > 0.0) {
        return Err(Error::Input(format!(
            "zero power over active frames (signal {ps:e}, noise {pn:e})"
        )));
    }
    let noise_scale = (ps / (pn * 10f64.powf(snr_db / 10.0))).sqrt();
    let channels = direct
        .channels
        .iter()
        .zip(&noise.channels)
        .map(|(d, n)| d.iter().zip(n).map(|(a, b)| a + noise_scale * b).collect())
        .collect();
    Ok(Mixture {
        mixture: Waveform::new(channels, direct.sample_rate)?,
        noise_scale,
    })
}
