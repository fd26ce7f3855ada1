use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::MIC_SPACING;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    White,
    SpeechShaped,
}

/// Sampling ranges for [`super::sample_scene`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub room_min: [f64; 3],
    pub room_max: [f64; 3],
    pub snr_db: [f64; 2],
    pub p_moving: f64,
    pub p_two_sources: f64,
    pub duration_s: f64,
    pub mic_spacing: f64,
    /// Forces the source count instead of sampling it.
    pub n_sources: Option<usize>,
    /// Forces every source static (`false`) or moving (`true`).
    pub moving: Option<bool>,
    /// Fixed noise type; sampled 50/50 when absent.
    pub noise: Option<NoiseKind>,
    /// Directory of mono 16 kHz WAV files; synthetic sources when absent.
    pub source_dir: Option<PathBuf>,
    /// Smallest allowed distance between a source and the array centre, metres.
    pub min_source_distance: f64,
    /// Clearance kept between sources and walls, metres.
    pub wall_margin: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            room_min: [6.0, 6.0, 2.5],
            room_max: [10.0, 8.0, 6.0],
            snr_db: [-5.0, 15.0],
            p_moving: 0.5,
            p_two_sources: 0.5,
            duration_s: 4.5,
            mic_spacing: MIC_SPACING,
            n_sources: None,
            moving: None,
            noise: None,
            source_dir: None,
            min_source_distance: 1.0,
            wall_margin: 0.5,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        for i in 0..3 {
            if !(self.room_min[i] > 2.0 * self.wall_margin && self.room_min[i] <= self.room_max[i]) {
                return bad(format!(
                    "room range {:?}..{:?} invalid for margin {}",
                    self.room_min, self.room_max, self.wall_margin
                ));
            }
        }
        if !(self.snr_db[0] <= self.snr_db[1]) || !self.snr_db.iter().all(|v| v.is_finite()) {
            return bad(format!("snr range {:?}", self.snr_db));
        }
        for (name, p) in [("p_moving", self.p_moving), ("p_two_sources", self.p_two_sources)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        if !(self.duration_s >= 0.1 && self.duration_s <= 600.0) {
            return bad(format!("duration {} s", self.duration_s));
        }
        if !(self.mic_spacing > 0.0) {
            return bad(format!("mic spacing {}", self.mic_spacing));
        }
        if let Some(n) = self.n_sources {
            if !(1..=2).contains(&n) {
                return bad(format!("n_sources = {n}, supported 1 or 2"));
            }
        }
        if self.min_source_distance < 0.0 || self.wall_margin < 0.0 {
            return bad("negative distance".into());
        }
        Ok(())
    }
}
