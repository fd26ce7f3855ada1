use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{render_scene, sample_scene, SceneConfig, SceneSpec, Trajectory};
use crate::dsp::{write_wav, StftConfig, StftEngine, WavFormat};
use crate::error::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub scene: SceneConfig,
    pub count: usize,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            scene: SceneConfig::default(),
            count: 8,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneEntry {
    pub id: String,
    pub seed: u64,
    /// Paths relative to the manifest directory.
    pub wav: String,
    pub labels: String,
    pub n_frames: usize,
    pub spec: SceneSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub config: DatasetConfig,
    pub stft: StftConfig,
    pub scenes: Vec<SceneEntry>,
    /// Directory the manifest was loaded from.
    #[serde(skip)]
    pub root: PathBuf,
}

impl Manifest {
    pub fn wav_path(&self, e: &SceneEntry) -> PathBuf {
        self.root.join(&e.wav)
    }

    pub fn labels_path(&self, e: &SceneEntry) -> PathBuf {
        self.root.join(&e.labels)
    }
}

/// Seed of scene `index` derived from the dataset seed (SplitMix64 finalizer).
pub fn scene_seed(base: u64, index: usize) -> u64 {
    let mut z = base.wrapping_add((index as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn source_pool(config: &SceneConfig) -> Result<Vec<PathBuf>> {
    let Some(dir) = &config.source_dir else {
        return Ok(Vec::new());
    };
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Input(format!("no WAV files in {}", dir.display())));
    }
    Ok(files)
}

/// CSV with one row per (frame, source): `frame_index,source_index,azimuth_deg,active`.
pub fn write_labels(path: &Path, trajs: &[Trajectory]) -> Result<()> {
    let mut s = String::from("frame_index,source_index,azimuth_deg,active\n");
    let n = trajs.first().map_or(0, |t| t.n_frames());
    for f in 0..n {
        for (p, t) in trajs.iter().enumerate() {
            writeln!(s, "{f},{p},{},{}", t.azimuth_deg[f], t.active[f] as u8).expect("string write");
        }
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_labels(path: &Path) -> Result<Vec<Trajectory>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("frame_index,source_index,azimuth_deg,active") {
        return Err(Error::format(path, "missing label header"));
    }
    let mut trajs: Vec<Trajectory> = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = |m: &str| Error::format(path, format!("line {}: {m}", i + 2));
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 4 {
            return Err(bad("expected 4 fields"));
        }
        let frame: usize = f[0].parse().map_err(|_| bad("frame index"))?;
        let src: usize = f[1].parse().map_err(|_| bad("source index"))?;
        let az: f64 = f[2].parse().map_err(|_| bad("azimuth"))?;
        let active = match f[3] {
            "0" => false,
            "1" => true,
            _ => return Err(bad("active flag")),
        };
        if !(0.0..=180.0).contains(&az) {
            return Err(bad("azimuth outside [0, 180]"));
        }
        while trajs.len() <= src {
            trajs.push(Trajectory {
                positions: Vec::new(),
                azimuth_deg: Vec::new(),
                active: Vec::new(),
            });
        }
        let t = &mut trajs[src];
        if t.azimuth_deg.len() != frame {
            return Err(bad("frames out of order"));
        }
        t.azimuth_deg.push(az);
        t.active.push(active);
    }
    Ok(trajs)
}

/// Renders `config.count` scenes into `out_dir` and writes the manifest.
pub fn build_dataset(config: &DatasetConfig, out_dir: &Path) -> Result<Manifest> {
    config.scene.validate()?;
    let pool = source_pool(&config.scene)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let stft = StftConfig::default();
    let engine = StftEngine::new(stft)?;
    let scenes: Vec<SceneEntry> = (0..config.count)
        .into_par_iter()
        .map(|i| -> Result<SceneEntry> {
            let seed = scene_seed(config.seed, i);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spec = sample_scene(&mut rng, &config.scene, &pool)?;
            let scene = render_scene(&spec, &engine)?;
            let id = format!("scene_{i:05}");
            let wav = format!("{id}.wav");
            let labels = format!("{id}.csv");
            write_wav(out_dir.join(&wav), &scene.mixture, WavFormat::Float32)?;
            write_labels(&out_dir.join(&labels), &scene.trajectories)?;
            Ok(SceneEntry {
                id,
                seed,
                wav,
                labels,
                n_frames: scene.n_frames,
                spec,
            })
        })
        .collect::<Result<_>>()?;
    let manifest = Manifest {
        format_version: MANIFEST_VERSION,
        config: config.clone(),
        stft,
        scenes,
        root: out_dir.to_path_buf(),
    };
    let path = out_dir.join(MANIFEST_FILE);
    let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Loads a manifest from a file or from a dataset directory.
pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let file = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
    let bytes = std::fs::read(&file).map_err(|e| Error::io(&file, e))?;
    let mut m: Manifest = serde_json::from_slice(&bytes).map_err(|e| Error::format(&file, e))?;
    if m.format_version != MANIFEST_VERSION {
        return Err(Error::format(
            &file,
            format!("manifest version {} (supported {MANIFEST_VERSION})", m.format_version),
        ));
    }
    m.root = file.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(m)
}

/// Rebuilds the dataset described by `manifest` into `out_dir`.
pub fn regenerate(manifest: &Manifest, out_dir: &Path) -> Result<Manifest> {
    build_dataset(&manifest.config, out_dir)
}
