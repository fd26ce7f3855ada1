use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::trajectory::sample_trajectory_spec;
use super::{gen_diffuse_noise, mix_at_snr, render_direct_path, synthetic_speech};
use super::{NoiseKind, SceneConfig, Trajectory, TrajectorySpec};
use crate::dsp::{frame_activity, read_wav, StftEngine, Waveform, ACTIVITY_THRESHOLD_DB};
use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, SAMPLE_RATE};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalSpec {
    Synthetic { seed: u64 },
    /// Segment of a mono WAV; the start offset is `seed` modulo the slack.
    File { path: PathBuf, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub trajectory: TrajectorySpec,
    pub signal: SignalSpec,
}

/// Everything needed to regenerate one scene bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub seed: u64,
    pub room: [f64; 3],
    pub array: ArrayGeometry,
    pub sources: Vec<SourceSpec>,
    pub snr_db: f64,
    pub noise: NoiseKind,
    pub duration_s: f64,
    pub sample_rate: u32,
}

/// Draws a scene from `config`. `pool` lists source WAV files; synthetic
/// sources are used when it is empty.
pub fn sample_scene<R: Rng + ?Sized>(
    rng: &mut R,
    config: &SceneConfig,
    pool: &[PathBuf],
) -> Result<SceneSpec> {
    config.validate()?;
    let seed: u64 = rng.random();
    let room: [f64; 3] =
        std::array::from_fn(|i| rng.random_range(config.room_min[i]..=config.room_max[i]));
    let n_sources = match config.n_sources {
        Some(n) => n,
        None if rng.random_bool(config.p_two_sources) => 2,
        None => 1,
    };
    let moving = match config.moving {
        Some(m) => m,
        None => rng.random_bool(config.p_moving),
    };
    let array_margin = 1.0f64;
    let center = [
        rng.random_range(array_margin..=room[0] - array_margin),
        rng.random_range(array_margin..=room[1] - array_margin),
        rng.random_range(1.0..=1.6f64.min(room[2] - 0.5)),
    ];
    let orientation = rng.random_range(0.0..std::f64::consts::TAU);
    let array = ArrayGeometry::new(center, config.mic_spacing, orientation);
    let sources = (0..n_sources)
        .map(|_| {
            let trajectory = sample_trajectory_spec(
                rng,
                room,
                &array,
                moving,
                config.wall_margin,
                config.min_source_distance,
            );
            let signal = if pool.is_empty() {
                SignalSpec::Synthetic { seed: rng.random() }
            } else {
                SignalSpec::File {
                    path: pool[rng.random_range(0..pool.len())].clone(),
                    seed: rng.random(),
                }
            };
            SourceSpec { trajectory, signal }
        })
        .collect();
    let snr_db = if config.snr_db[0] == config.snr_db[1] {
        config.snr_db[0]
    } else {
        rng.random_range(config.snr_db[0]..config.snr_db[1])
    };
    let noise = config.noise.unwrap_or(if rng.random_bool(0.5) {
        NoiseKind::White
    } else {
        NoiseKind::SpeechShaped
    });
    Ok(SceneSpec {
        seed,
        room,
        array,
        sources,
        snr_db,
        noise,
        duration_s: config.duration_s,
        sample_rate: SAMPLE_RATE,
    })
}

/// Output of [`render_scene`].
pub struct RenderedScene {
    pub mixture: Waveform,
    /// Noise-free sum of the rendered sources.
    pub direct: Waveform,
    pub trajectories: Vec<Trajectory>,
    pub n_frames: usize,
}

fn load_signal(spec: &SignalSpec, n: usize, sample_rate: u32) -> Result<Vec<f64>> {
    match spec {
        SignalSpec::Synthetic { seed } => Ok(synthetic_speech(*seed, n, sample_rate)),
        SignalSpec::File { path, seed } => {
            let w = read_wav(path)?;
            if w.sample_rate != sample_rate {
                return Err(Error::Input(format!(
                    "{}: sample rate {} Hz, expected {sample_rate}",
                    path.display(),
                    w.sample_rate
                )));
            }
            let x = &w.channels[0];
            if x.is_empty() {
                return Err(Error::Input(format!("{}: empty source", path.display())));
            }
            let offset = if x.len() > n { (*seed % (x.len() - n + 1) as u64) as usize } else { 0 };
            Ok((0..n).map(|i| x[(offset + i) % x.len()]).collect())
        }
    }
}

/// Renders sources at equal reference-channel power, adds diffuse noise at
/// the scene SNR and fills per-frame activity into the trajectories.
pub fn render_scene(spec: &SceneSpec, engine: &StftEngine) -> Result<RenderedScene> {
    let cfg = engine.config();
    let fs = spec.sample_rate;
    let n = (spec.duration_s * fs as f64).round() as usize;
    let n_frames = cfg.n_frames(n);
    if n_frames == 0 {
        return Err(Error::Config(format!("{} s is shorter than one frame", spec.duration_s)));
    }
    let mut direct = Waveform::new(vec![vec![0.0; n]; 2], fs)?;
    let mut trajectories = Vec::with_capacity(spec.sources.len());
    let mut any_active = vec![false; n_frames];
    for src in &spec.sources {
        let mut signal = load_signal(&src.signal, n, fs)?;
        let mut traj = Trajectory::from_spec(
            &src.trajectory,
            spec.room,
            &spec.array,
            n_frames,
            spec.duration_s,
            cfg,
            fs,
        )?;
        let mono = Waveform::mono(signal.clone(), fs);
        traj.active = frame_activity(&mono, cfg, ACTIVITY_THRESHOLD_DB);
        let p = super::active_power(&mono, &traj.active, cfg);
        if p > 0.0 {
            let g = 1.0 / p.sqrt();
            signal.iter_mut().for_each(|v| *v *= g);
        }
        let rendered = render_direct_path(&signal, &traj.azimuth_deg, &spec.array, engine, fs)?;
        for (d, r) in direct.channels.iter_mut().zip(&rendered.channels) {
            d.iter_mut().zip(r).for_each(|(a, b)| *a += b);
        }
        for (u, &a) in any_active.iter_mut().zip(&traj.active) {
            *u |= a;
        }
        trajectories.push(traj);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x6e6f_6973_6500_0000);
    let noise = gen_diffuse_noise(&mut rng, &spec.array, n, spec.noise, fs);
    let mut mixture = mix_at_snr(&direct, &noise, spec.snr_db, &any_active, cfg)?.mixture;
    let peak = mixture.channels.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        let g = 0.5 / peak;
        mixture.channels.iter_mut().flatten().for_each(|v| *v *= g);
        direct.channels.iter_mut().flatten().for_each(|v| *v *= g);
    }
    Ok(RenderedScene {
        mixture,
        direct,
        trajectories,
        n_frames,
    })
}
