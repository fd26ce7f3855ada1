use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::StftConfig;
use crate::error::Result;
use crate::geometry::{azimuth_of, norm, sub, ArrayGeometry};

/// Straight line from `start` to `end` plus one sinusoid per axis,
/// `a_i · sin(2π f_i s)` for path parameter `s ∈ [0, 1]`. Whole periods keep
/// both endpoints on the line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySpec {
    pub start: [f64; 3],
    pub end: [f64; 3],
    pub moving: bool,
    pub amplitudes: [f64; 3],
    pub periods: [u32; 3],
}

impl TrajectorySpec {
    pub fn fixed(position: [f64; 3]) -> Self {
        Self {
            start: position,
            end: position,
            moving: false,
            amplitudes: [0.0; 3],
            periods: [1; 3],
        }
    }

    /// Position at path parameter `s`, clipped to `[lo, hi]` per axis.
    pub fn position(&self, s: f64, lo: [f64; 3], hi: [f64; 3]) -> [f64; 3] {
        if !self.moving {
            return self.start;
        }
        let s = s.clamp(0.0, 1.0);
        std::array::from_fn(|i| {
            let line = self.start[i] + s * (self.end[i] - self.start[i]);
            let wobble = self.amplitudes[i] * (2.0 * PI * self.periods[i] as f64 * s).sin();
            (line + wobble).clamp(lo[i], hi[i])
        })
    }
}

/// Per-frame source state. `positions` may be empty when the track was read
/// back from a label file.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub positions: Vec<[f64; 3]>,
    pub azimuth_deg: Vec<f64>,
    pub active: Vec<bool>,
}

impl Trajectory {
    pub fn n_frames(&self) -> usize {
        self.azimuth_deg.len()
    }

    /// Evaluates `spec` at every frame centre of a `duration_s` signal.
    pub fn from_spec(
        spec: &TrajectorySpec,
        room: [f64; 3],
        array: &ArrayGeometry,
        n_frames: usize,
        duration_s: f64,
        stft: StftConfig,
        sample_rate: u32,
    ) -> Result<Self> {
        let clip = 0.05;
        let lo = [clip; 3];
        let hi = room.map(|r| r - clip);
        let positions: Vec<[f64; 3]> = frame_centre_times(n_frames, stft, sample_rate)
            .into_iter()
            .map(|t| spec.position(t / duration_s, lo, hi))
            .collect();
        let azimuth_deg = positions
            .iter()
            .map(|&p| azimuth_of(p, array))
            .collect::<Result<_>>()?;
        Ok(Self {
            positions,
            azimuth_deg,
            active: vec![true; n_frames],
        })
    }
}

/// Centre time in seconds of each analysis frame.
pub fn frame_centre_times(n_frames: usize, stft: StftConfig, sample_rate: u32) -> Vec<f64> {
    (0..n_frames)
        .map(|n| (n * stft.hop) as f64 / sample_rate as f64 + stft.window_len as f64 / (2.0 * sample_rate as f64))
        .collect()
}

fn sample_point<R: Rng + ?Sized>(
    rng: &mut R,
    room: [f64; 3],
    margin: f64,
    avoid: [f64; 3],
    min_dist: f64,
) -> [f64; 3] {
    let mut p = [0.0; 3];
    for _ in 0..1000 {
        p = std::array::from_fn(|i| rng.random_range(margin..=room[i] - margin));
        if norm(sub(p, avoid)) >= min_dist {
            break;
        }
    }
    p
}

/// Random start/end points (away from `array`) and perturbation parameters.
pub(crate) fn sample_trajectory_spec<R: Rng + ?Sized>(
    rng: &mut R,
    room: [f64; 3],
    array: &ArrayGeometry,
    moving: bool,
    wall_margin: f64,
    min_dist: f64,
) -> TrajectorySpec {
    let c = array.center();
    let start = sample_point(rng, room, wall_margin, c, min_dist);
    if !moving {
        return TrajectorySpec::fixed(start);
    }
    let end = sample_point(rng, room, wall_margin, c, min_dist);
    TrajectorySpec {
        start,
        end,
        moving: true,
        amplitudes: std::array::from_fn(|_| rng.random_range(0.0..=0.5)),
        periods: std::array::from_fn(|_| rng.random_range(1..=3)),
    }
}

/// Samples a trajectory and evaluates it at `n_frames` frame centres spread
/// over `duration_s`.
#[allow(clippy::too_many_arguments)]
pub fn gen_trajectory<R: Rng + ?Sized>(
    rng: &mut R,
    room: [f64; 3],
    array: &ArrayGeometry,
    n_frames: usize,
    duration_s: f64,
    moving: bool,
    stft: StftConfig,
    sample_rate: u32,
) -> Result<(TrajectorySpec, Trajectory)> {
    let spec = sample_trajectory_spec(rng, room, array, moving, 0.5, 1.0);
    let t = Trajectory::from_spec(&spec, room, array, n_frames, duration_s, stft, sample_rate)?;
    Ok((spec, t))
}
