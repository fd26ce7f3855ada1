//! Measurements shared by the simulation tests and the acceptance suite.
#![allow(dead_code)]

use std::f64::consts::PI;

use funssl_core::dsp::{StftConfig, StftEngine, Waveform};
use funssl_core::geometry::{ArrayGeometry, MIC_SPACING, SAMPLE_RATE};
use funssl_core::sim::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn engine() -> StftEngine {
    StftEngine::new(StftConfig::default()).unwrap()
}

pub fn array() -> ArrayGeometry {
    ArrayGeometry::new([4.0, 3.5, 1.5], MIC_SPACING, 0.0)
}

/// Mean absolute gap between the measured magnitude-squared coherence of
/// `seconds` of generated noise and sinc² over 100..=4000 Hz.
pub fn coherence_mae(kind: NoiseKind, seed: u64, seconds: f64) -> f64 {
    let a = array();
    let e = engine();
    let n = (seconds * SAMPLE_RATE as f64) as usize;
    let noise = gen_diffuse_noise(&mut ChaCha8Rng::seed_from_u64(seed), &a, n, kind, SAMPLE_RATE);
    let msc = welch_coherence(&noise, &e).unwrap();
    let grid = e.config().grid(SAMPLE_RATE);
    let bins: Vec<usize> = (0..grid.n_bins())
        .filter(|&k| (100.0..=4000.0).contains(&grid.frequency(k)))
        .collect();
    bins.iter()
        .map(|&k| (msc[k] - spherical_coherence(grid.frequency(k), &a).powi(2)).abs())
        .sum::<f64>()
        / bins.len() as f64
}

pub fn scene_config(n_sources: usize, moving: bool, snr: f64, seconds: f64) -> SceneConfig {
    SceneConfig {
        duration_s: seconds,
        snr_db: [snr, snr],
        n_sources: Some(n_sources),
        moving: Some(moving),
        ..SceneConfig::default()
    }
}

pub fn render(cfg: &SceneConfig, seed: u64) -> (SceneSpec, RenderedScene) {
    let spec = sample_scene(&mut ChaCha8Rng::seed_from_u64(seed), cfg, &[]).unwrap();
    let r = render_scene(&spec, &engine()).unwrap();
    (spec, r)
}

/// Reference-channel SNR of a rendered scene over frames where any source is active.
pub fn measured_snr_db(r: &RenderedScene) -> f64 {
    let cfg = StftConfig::default();
    let mut active = vec![false; r.n_frames];
    for t in &r.trajectories {
        active.iter_mut().zip(&t.active).for_each(|(u, &a)| *u |= a);
    }
    let noise = Waveform::new(
        r.mixture
            .channels
            .iter()
            .zip(&r.direct.channels)
            .map(|(m, d)| m.iter().zip(d).map(|(a, b)| a - b).collect())
            .collect(),
        r.mixture.sample_rate,
    )
    .unwrap();
    10.0 * (active_power(&r.direct, &active, cfg) / active_power(&noise, &active, cfg)).log10()
}

fn wrap(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

/// RMS gap between the measured inter-channel phase of the noise-free signal
/// and `-2πν τ(θ)` for bins below the aliasing frequency, over active frames
/// and bins within 40 dB of the frame's strongest bin.
pub fn static_ipd_rms(seed: u64) -> f64 {
    let (spec, r) = render(&scene_config(1, false, 15.0, 2.0), seed);
    let e = engine();
    let s = e.stft(&r.direct).unwrap();
    let grid = e.config().grid(SAMPLE_RATE);
    let traj = &r.trajectories[0];
    let tau = spec.array.tdoa(traj.azimuth_deg[0]);
    let limit = spec.array.aliasing_frequency();
    let (mut sum, mut count) = (0.0, 0usize);
    for n in (0..s.n_frames).filter(|&n| traj.active[n]) {
        let peak = (1..grid.n_bins()).map(|k| s.get(n, k, 0).norm()).fold(0.0, f64::max);
        for k in (1..grid.n_bins()).filter(|&k| grid.frequency(k) < limit) {
            let x1 = s.get(n, k, 0);
            if x1.norm() < peak * 1e-2 {
                continue;
            }
            let measured = (s.get(n, k, 1) * x1.conj()).arg();
            let model = -2.0 * PI * grid.frequency(k) * tau;
            sum += wrap(measured - model).powi(2);
            count += 1;
        }
    }
    (sum / count as f64).sqrt()
}
