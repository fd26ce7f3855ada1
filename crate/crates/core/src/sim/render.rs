use num_complex::Complex64;

use crate::dsp::{StftEngine, Waveform};
use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, FrequencyGrid};

/// Free-field direct-path rendering of a mono source onto both microphones.
///
/// Each STFT frame of the source is used unchanged for the reference channel
/// and phase-shifted by `exp(-j 2π ν_k Δτ(θ(n)))` for the second channel,
/// with `θ(n)` the azimuth of analysis frame `n`. The signal is padded by
/// `window_len − hop` on the left so that synthesis frame `r` lines up with
/// analysis frame `r − 1`, and every output sample sees full overlap.
pub fn render_direct_path(
    source: &[f64],
    azimuth_per_frame: &[f64],
    array: &ArrayGeometry,
    engine: &StftEngine,
    sample_rate: u32,
) -> Result<Waveform> {
    let cfg = engine.config();
    if cfg.window_len != 2 * cfg.hop {
        return Err(Error::Config("rendering assumes 50% overlap".into()));
    }
    if azimuth_per_frame.is_empty() {
        return Err(Error::Input("empty trajectory".into()));
    }
    let pad = cfg.window_len - cfg.hop;
    let n = source.len();
    let mut total = pad + n + pad;
    if total < cfg.window_len {
        total = cfg.window_len;
    }
    let rem = (total - cfg.window_len) % cfg.hop;
    if rem != 0 {
        total += cfg.hop - rem;
    }
    let mut padded = vec![0.0; total];
    padded[pad..pad + n].copy_from_slice(source);
    let spec = engine.stft(&Waveform::mono(padded, sample_rate))?;
    let grid = FrequencyGrid {
        sample_rate,
        fft_len: cfg.fft_len,
    };
    let shift = pad / cfg.hop;
    let last = azimuth_per_frame.len() - 1;
    let mut two = crate::dsp::Spectrogram::zeros(spec.n_frames, 2, cfg, sample_rate);
    for r in 0..spec.n_frames {
        let frame = r.saturating_sub(shift).min(last);
        let tau = array.tdoa(azimuth_per_frame[frame]);
        for k in 0..spec.n_bins {
            let x = spec.get(r, k, 0);
            let ph = -2.0 * std::f64::consts::PI * grid.frequency(k) * tau;
            two.set(r, k, 0, x);
            two.set(r, k, 1, x * Complex64::new(ph.cos(), ph.sin()));
        }
    }
    let out = engine.istft(&two)?;
    let channels = out
        .channels
        .into_iter()
        .map(|c| c[pad..pad + n].to_vec())
        .collect();
    Waveform::new(channels, sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::StftConfig;
    use crate::geometry::MIC_SPACING;
    use crate::sim::synthetic_speech;

    fn setup() -> (ArrayGeometry, StftEngine) {
        (
            ArrayGeometry::new([0.0; 3], MIC_SPACING, 0.0),
            StftEngine::new(StftConfig::default()).unwrap(),
        )
    }

    fn snr_db(reference: &[f64], test: &[f64]) -> f64 {
        let s: f64 = reference.iter().map(|v| v * v).sum();
        let e: f64 = reference.iter().zip(test).map(|(a, b)| (a - b).powi(2)).sum();
        10.0 * (s / e.max(1e-300)).log10()
    }

    #[test]
    fn broadside_channels_identical_and_reference_preserved() {
        let (a, e) = setup();
        let x = synthetic_speech(3, 16000, 16000);
        let w = render_direct_path(&x, &[90.0; 61], &a, &e, 16000).unwrap();
        assert_eq!(w.len(), x.len());
        assert!(snr_db(&x, &w.channels[0]) >= 50.0);
        for (p, q) in w.channels[0].iter().zip(&w.channels[1]) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn endfire_delay_matches_spacing() {
        let (a, e) = setup();
        let x = synthetic_speech(5, 16000, 16000);
        let w = render_direct_path(&x, &[0.0; 61], &a, &e, 16000).unwrap();
        let (c0, c1) = (&w.channels[0], &w.channels[1]);
        let xc = |lag: i64| -> f64 {
            (0..c0.len() as i64)
                .filter_map(|i| {
                    let j = i + lag;
                    (j >= 0 && (j as usize) < c1.len()).then(|| c0[i as usize] * c1[j as usize])
                })
                .sum()
        };
        let lags: Vec<f64> = (-8..=8).map(xc).collect();
        let best = (0..lags.len()).max_by(|&i, &j| lags[i].total_cmp(&lags[j])).unwrap();
        let (l, c, r) = (lags[best - 1], lags[best], lags[best + 1]);
        let frac = best as f64 - 8.0 + 0.5 * (l - r) / (l - 2.0 * c + r);
        let expect = 0.08 / 343.0 * 16000.0;
        assert!((frac - expect).abs() <= 0.5, "{frac} vs {expect}");
    }
}
