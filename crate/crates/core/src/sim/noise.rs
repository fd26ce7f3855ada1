use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use num_complex::Complex64;

use super::NoiseKind;
use crate::dsp::{StftEngine, Waveform};
use crate::error::Result;
use crate::geometry::ArrayGeometry;

/// Spherically diffuse coherence `sin(x)/x`, `x = 2π f d / c`.
pub fn spherical_coherence(f: f64, array: &ArrayGeometry) -> f64 {
    let x = 2.0 * std::f64::consts::PI * f * array.spacing() / array.speed_of_sound;
    if x.abs() < 1e-12 {
        1.0
    } else {
        x.sin() / x
    }
}

fn speech_shape(f: f64) -> f64 {
    let low = (f / 100.0).min(1.0);
    low / (1.0 + (f / 800.0).powi(2)).sqrt()
}

/// Two-channel noise with the spherically diffuse inter-channel coherence.
///
/// Independent white noises `A`, `B` are mixed per frequency bin as
/// `N1 = A`, `N2 = Γ A + sqrt(1 − Γ²) B`, which is the Cholesky factor of the
/// target 2×2 coherence matrix.
pub fn gen_diffuse_noise<R: Rng + ?Sized>(
    rng: &mut R,
    array: &ArrayGeometry,
    n_samples: usize,
    kind: NoiseKind,
    sample_rate: u32,
) -> Waveform {
    let n_fft = n_samples.next_power_of_two().max(2);
    let draw = |rng: &mut R| -> Vec<Complex64> {
        (0..n_fft)
            .map(|_| Complex64::new(rng.sample::<f64, _>(StandardNormal), 0.0))
            .collect()
    };
    let mut a = draw(rng);
    let mut b = draw(rng);
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n_fft);
    let inv = planner.plan_fft_inverse(n_fft);
    fwd.process(&mut a);
    fwd.process(&mut b);
    let mut n2 = vec![Complex64::new(0.0, 0.0); n_fft];
    for k in 0..n_fft {
        let kk = k.min(n_fft - k);
        let f = kk as f64 * sample_rate as f64 / n_fft as f64;
        let gamma = spherical_coherence(f, array);
        let shape = match kind {
            NoiseKind::White => 1.0,
            NoiseKind::SpeechShaped => speech_shape(f),
        };
        n2[k] = (a[k] * gamma + b[k] * (1.0 - gamma * gamma).max(0.0).sqrt()) * shape;
        a[k] *= shape;
    }
    inv.process(&mut a);
    inv.process(&mut n2);
    let scale = 1.0 / n_fft as f64;
    let ch = |v: &[Complex64]| v[..n_samples].iter().map(|c| c.re * scale).collect();
    Waveform {
        channels: vec![ch(&a), ch(&n2)],
        sample_rate,
    }
}

/// Welch estimate of the magnitude-squared coherence between channels 0 and 1,
/// one value per STFT bin.
pub fn welch_coherence(w: &Waveform, engine: &StftEngine) -> Result<Vec<f64>> {
    let s = engine.stft(w)?;
    let mut sxx = vec![0.0; s.n_bins];
    let mut syy = vec![0.0; s.n_bins];
    let mut sxy = vec![Complex64::new(0.0, 0.0); s.n_bins];
    for n in 0..s.n_frames {
        for k in 0..s.n_bins {
            let x = s.get(n, k, 0);
            let y = s.get(n, k, 1);
            sxx[k] += x.norm_sqr();
            syy[k] += y.norm_sqr();
            sxy[k] += x * y.conj();
        }
    }
    Ok((0..s.n_bins)
        .map(|k| {
            let d = sxx[k] * syy[k];
            if d > 0.0 {
                sxy[k].norm_sqr() / d
            } else {
                0.0
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::StftConfig;
    use crate::geometry::MIC_SPACING;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn measure(kind: NoiseKind) -> (Vec<f64>, Waveform) {
        let a = ArrayGeometry::new([0.0; 3], MIC_SPACING, 0.0);
        let mut r = ChaCha8Rng::seed_from_u64(11);
        let w = gen_diffuse_noise(&mut r, &a, 160_000, kind, 16000);
        let e = StftEngine::new(StftConfig::default()).unwrap();
        (welch_coherence(&w, &e).unwrap(), w)
    }

    #[test]
    fn coherence_at_first_null_and_low_frequency() {
        let (msc, _) = measure(NoiseKind::White);
        // 2143.75 Hz is bin 68.6; check the neighbours
        assert!(msc[68] <= 0.05 && msc[69] <= 0.05, "{} {}", msc[68], msc[69]);
        for k in 1..4 {
            assert!(msc[k] >= 0.9, "bin {k}: {}", msc[k]);
        }
    }

    #[test]
    fn white_spectrum_is_flat() {
        let (_, w) = measure(NoiseKind::White);
        let e = StftEngine::new(StftConfig::default()).unwrap();
        let s = e.stft(&w).unwrap();
        for ch in 0..2 {
            let p: Vec<f64> = (0..s.n_bins)
                .map(|k| (0..s.n_frames).map(|n| s.get(n, k, ch).norm_sqr()).sum::<f64>())
                .collect();
            let band: Vec<f64> = (4..=224).map(|k| p[k]).collect();
            let mean = band.iter().sum::<f64>() / band.len() as f64;
            for v in band {
                assert!((10.0 * (v / mean).log10()).abs() <= 3.0);
            }
        }
    }

    #[test]
    fn speech_shaped_tilts_down() {
        let (_, w) = measure(NoiseKind::SpeechShaped);
        let e = StftEngine::new(StftConfig::default()).unwrap();
        let s = e.stft(&w).unwrap();
        let band = |lo: usize, hi: usize| -> f64 {
            (lo..hi).map(|k| (0..s.n_frames).map(|n| s.get(n, k, 0).norm_sqr()).sum::<f64>()).sum()
        };
        assert!(band(10, 30) > 10.0 * band(150, 170));
    }
}
