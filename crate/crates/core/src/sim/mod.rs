//! Seeded desk-scale scene simulation: trajectories, free-field direct-path
//! rendering, spherically diffuse noise, SNR mixing and dataset files.

mod config;
mod dataset;
mod mix;
mod noise;
mod render;
mod scene;
mod source;
mod trajectory;

pub use config::{NoiseKind, SceneConfig};
pub use dataset::{
    build_dataset, load_manifest, read_labels, regenerate, scene_seed, write_labels, DatasetConfig,
    Manifest, SceneEntry, MANIFEST_FILE, MANIFEST_VERSION,
};
pub use mix::{active_power, mix_at_snr, Mixture};
pub use noise::{gen_diffuse_noise, spherical_coherence, welch_coherence};
pub use render::render_direct_path;
pub use scene::{render_scene, sample_scene, RenderedScene, SceneSpec, SignalSpec, SourceSpec};
pub use source::synthetic_speech;
pub use trajectory::{frame_centre_times, gen_trajectory, Trajectory, TrajectorySpec};
