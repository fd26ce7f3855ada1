//! Two-microphone array geometry and the STFT frequency grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPEED_OF_SOUND: f64 = 343.0;
pub const MIC_SPACING: f64 = 0.08;
pub const SAMPLE_RATE: u32 = 16_000;

/// Two microphones on a horizontal plane. Microphone index 0 is the reference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayGeometry {
    pub mics: [[f64; 3]; 2],
    pub speed_of_sound: f64,
}

impl ArrayGeometry {
    /// Array centred at `center` with its mic-1 → mic-2 axis at `orientation`
    /// radians in the horizontal plane.
    pub fn new(center: [f64; 3], spacing: f64, orientation: f64) -> Self {
        let half = [
            0.5 * spacing * orientation.cos(),
            0.5 * spacing * orientation.sin(),
            0.0,
        ];
        Self {
            mics: [
                [center[0] - half[0], center[1] - half[1], center[2]],
                [center[0] + half[0], center[1] + half[1], center[2]],
            ],
            speed_of_sound: SPEED_OF_SOUND,
        }
    }

    pub fn spacing(&self) -> f64 {
        norm(sub(self.mics[1], self.mics[0]))
    }

    pub fn center(&self) -> [f64; 3] {
        std::array::from_fn(|i| 0.5 * (self.mics[0][i] + self.mics[1][i]))
    }

    /// Unit vector from microphone 1 to microphone 2.
    pub fn axis(&self) -> [f64; 3] {
        let a = sub(self.mics[1], self.mics[0]);
        let n = norm(a);
        a.map(|v| v / n)
    }

    /// Inter-channel time difference `d cos(θ) / c` in seconds.
    ///
    /// Channel 2 lags the reference by this amount; the rendering, targets and
    /// templates all share this sign convention.
    pub fn tdoa(&self, azimuth_deg: f64) -> f64 {
        self.spacing() * azimuth_deg.to_radians().cos() / self.speed_of_sound
    }

    /// Frequency above which the inter-channel phase wraps, `c / (2 d)`.
    pub fn aliasing_frequency(&self) -> f64 {
        self.speed_of_sound / (2.0 * self.spacing())
    }
}

/// Azimuth in degrees, `[0, 180]`, between the mic axis and the direction
/// from the array centre to `position`.
pub fn azimuth_of(position: [f64; 3], array: &ArrayGeometry) -> Result<f64> {
    let dir = sub(position, array.center());
    let n = norm(dir);
    if n < 1e-12 {
        return Err(Error::Input(
            "source position coincides with the array centre".into(),
        ));
    }
    let cos = dot(dir, array.axis()) / n;
    Ok(cos.clamp(-1.0, 1.0).acos().to_degrees())
}

/// One-sided STFT bin frequencies, `ν_k = k · fs / n_fft`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub sample_rate: u32,
    pub fft_len: usize,
}

impl Default for FrequencyGrid {
    fn default() -> Self {
        Self {
            sample_rate: SAMPLE_RATE,
            fft_len: 512,
        }
    }
}

impl FrequencyGrid {
    pub fn n_bins(&self) -> usize {
        self.fft_len / 2 + 1
    }

    pub fn frequency(&self, k: usize) -> f64 {
        k as f64 * self.sample_rate as f64 / self.fft_len as f64
    }
}

pub(crate) fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}
