use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Formant-shaped envelope with a small broadband floor.
fn formant_gain(f: f64, formants: &[(f64, f64); 3]) -> f64 {
    let peaks: f64 = formants
        .iter()
        .map(|&(fc, bw)| 1.0 / (1.0 + ((f - fc) / bw).powi(2)))
        .sum();
    (peaks + 0.05) / (1.0 + f / 2000.0)
}

/// Speech-like test signal: voiced syllables (gliding harmonic series under
/// random formants plus aspiration noise), occasional fricative bursts, and
/// short pauses.
pub fn synthetic_speech(seed: u64, n_samples: usize, sample_rate: u32) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fs = sample_rate as f64;
    let nyq = 0.5 * fs;
    let mut out = vec![0.0; n_samples];
    let mut pos = (rng.random_range(0.0..0.08) * fs) as usize;
    while pos < n_samples {
        let len = ((rng.random_range(0.12..0.35) * fs) as usize).min(n_samples - pos);
        let fricative = rng.random_bool(0.2);
        let gain = rng.random_range(0.5..1.0);
        if fricative {
            // high-passed noise burst
            let mut prev = 0.0;
            for i in 0..len {
                let env = (PI * i as f64 / len as f64).sin().powi(2);
                let w: f64 = rng.sample(StandardNormal);
                out[pos + i] += 0.3 * gain * env * (w - prev);
                prev = w;
            }
        } else {
            let f0_start: f64 = rng.random_range(90.0..240.0);
            let f0_end = f0_start * rng.random_range(0.8..1.25);
            let formants = [
                (rng.random_range(300.0..900.0), 120.0),
                (rng.random_range(900.0..2500.0), 200.0),
                (rng.random_range(2500.0..3600.0), 300.0),
            ];
            let n_harm = (nyq * 0.9 / f0_start.max(f0_end)) as usize;
            let harm: Vec<(f64, f64)> = (1..=n_harm)
                .map(|h| {
                    let f = h as f64 * 0.5 * (f0_start + f0_end);
                    (formant_gain(f, &formants), rng.random_range(0.0..2.0 * PI))
                })
                .collect();
            let mut phase = 0.0;
            for i in 0..len {
                let frac = i as f64 / len as f64;
                let env = (PI * frac).sin().powi(2);
                let f0 = f0_start + frac * (f0_end - f0_start);
                phase += 2.0 * PI * f0 / fs;
                let mut v = 0.0;
                for (h, &(a, ph)) in harm.iter().enumerate() {
                    v += a * ((h + 1) as f64 * phase + ph).sin();
                }
                let breath: f64 = rng.sample(StandardNormal);
                out[pos + i] += gain * env * (0.15 * v + 0.02 * breath);
            }
        }
        pos += len + (rng.random_range(0.03..0.2) * fs) as usize;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_nonsilent() {
        let a = synthetic_speech(7, 16000, 16000);
        assert_eq!(a, synthetic_speech(7, 16000, 16000));
        assert_ne!(a, synthetic_speech(8, 16000, 16000));
        let p = a.iter().map(|v| v * v).sum::<f64>() / a.len() as f64;
        assert!(p > 1e-4 && a.iter().all(|v| v.is_finite() && v.abs() < 10.0));
    }
}
