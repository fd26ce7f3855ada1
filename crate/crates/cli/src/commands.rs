use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use funssl_core::dprtf::{TemplateBank, CHUNK_FRAMES};
use funssl_core::dsp::{frame_energies, read_wav, StftConfig, StftEngine};
use funssl_core::eval::*;
use funssl_core::geometry::{ArrayGeometry, SAMPLE_RATE};
use funssl_core::network::*;
use funssl_core::sim::{build_dataset, load_manifest, DatasetConfig, Manifest, MANIFEST_FILE};
use funssl_core::training::*;

use crate::config::RunConfig;

pub const EFFECTIVE_CONFIG: &str = "config.json";
pub const METRICS_CSV: &str = "metrics.csv";
pub const SUMMARY_JSON: &str = "summary.json";

pub fn simulate(config: Option<&Path>, out: &Path, count: Option<usize>, seed: Option<u64>) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let data = DatasetConfig {
        scene: cfg.scene.clone(),
        count: count.unwrap_or(cfg.count),
        seed: seed.unwrap_or(cfg.seed),
    };
    let manifest = build_dataset(&data, out)?;
    println!("{}", out.join(MANIFEST_FILE).display());
    eprintln!("{} scenes", manifest.scenes.len());
    Ok(())
}

pub struct TrainArgs {
    pub config: Option<PathBuf>,
    pub data: PathBuf,
    pub val: Option<PathBuf>,
    pub out: PathBuf,
    pub resume: bool,
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
}

fn load(path: &Path, model: &ModelConfig) -> Result<(Manifest, Vec<Sample>)> {
    let m = load_manifest(path)?;
    let samples = load_samples(&m, model).with_context(|| format!("loading {}", path.display()))?;
    Ok((m, samples))
}

pub fn train(a: TrainArgs) -> Result<()> {
    let mut cfg = RunConfig::load(a.config.as_deref())?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(e) = a.epochs {
        cfg.train.epochs = e;
    }
    cfg.validate()?;
    let (_, train) = load(&a.data, &cfg.model)?;
    let val = a.val.as_deref().map(|p| load(p, &cfg.model)).transpose()?.map(|(_, s)| s);
    let mut trainer = if a.resume {
        let t = Trainer::resume(&a.out, Some(cfg.train.clone()))?;
        if t.model.config != cfg.model {
            bail!("checkpoint in {} was trained with another model configuration", a.out.display());
        }
        eprintln!("resuming after epoch {} (step {})", t.epoch, t.step);
        t
    } else {
        Trainer::new(Model::new(cfg.model.clone(), cfg.seed)?, cfg.train.clone())?
    };
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    cfg.write(&a.out.join(EFFECTIVE_CONFIG))?;
    eprintln!(
        "{} parameters, {} training scenes, {} steps per epoch",
        trainer.model.params.numel(),
        train.len(),
        cfg.train.steps_per_epoch(train.len())
    );
    trainer.fit(&train, val.as_deref(), Some(&a.out), |s| {
        let val = s.val_loss.map(|v| format!(" val {v:.5}")).unwrap_or_default();
        eprintln!(
            "epoch {:>4} lr {:.3e} train {:.5}{val}{}",
            s.epoch,
            s.lr,
            s.train_loss,
            if s.improved { " *" } else { "" }
        );
    })?;
    println!("{}", a.out.join(BEST_CHECKPOINT).display());
    Ok(())
}

pub struct EvalArgs {
    pub config: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub data: PathBuf,
    pub threshold: Option<f64>,
    pub calibrate: bool,
    pub calib_data: Option<PathBuf>,
    /// Without a checkpoint the ground-truth targets are decoded.
    pub out: PathBuf,
}

fn decode_with(model: Option<&Model>, cfg: &ModelConfig, manifest: &Manifest, samples: &[Sample]) -> Result<Vec<SceneResult>> {
    Ok(match model {
        Some(m) => decode_samples(m, samples, manifest.stft)?,
        None => decode_targets(samples, manifest.stft, cfg.n_sources)?,
    })
}

fn load_model(path: &Path) -> Result<Model> {
    let (m, _) = Checkpoint::load(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
    Ok(m)
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let cfg = RunConfig::load(a.config.as_deref())?;
    let model = a.checkpoint.as_deref().map(load_model).transpose()?;
    let model_cfg = model.as_ref().map(|m| m.config.clone()).unwrap_or(cfg.model.clone());
    let tol = cfg.eval.tolerance_deg;
    let (manifest, samples) = load(&a.data, &model_cfg)?;
    let results = decode_with(model.as_ref(), &model_cfg, &manifest, &samples)?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let threshold = if a.calibrate {
        let cal = match &a.calib_data {
            Some(p) => {
                let (m, s) = load(p, &model_cfg)?;
                decode_with(model.as_ref(), &model_cfg, &m, &s)?
            }
            None => results.clone(),
        };
        let p = calibrate_threshold(&cal, tol)?;
        let n_chunks: usize = cal.iter().map(|r| r.labels.n_chunks()).sum();
        println!("threshold {:.6} (MDR {:.4}, FAR {:.4}, {n_chunks} chunks)", p.threshold, p.mdr, p.far);
        p.threshold
    } else {
        a.threshold.unwrap_or(cfg.eval.threshold)
    };
    let (report, rows) = evaluate(&results, threshold, tol)?;
    write_metrics_csv(&a.out.join(METRICS_CSV), &rows)?;
    write_summary(&a.out.join(SUMMARY_JSON), &report)?;
    cfg.write(&a.out.join(EFFECTIVE_CONFIG))?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

pub fn calibrate(config: Option<&Path>, checkpoint: &Path, data: &Path, sweep: Option<&Path>) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let model = load_model(checkpoint)?;
    let (manifest, samples) = load(data, &model.config)?;
    let results = decode_samples(&model, &samples, manifest.stft)?;
    let tol = cfg.eval.tolerance_deg;
    if let Some(path) = sweep {
        let mut s = String::from("threshold,mdr,far\n");
        for p in threshold_sweep(&results, tol)? {
            s.push_str(&format!("{},{},{}\n", p.threshold, p.mdr, p.far));
        }
        std::fs::write(path, s).with_context(|| format!("writing {}", path.display()))?;
    }
    let p = calibrate_threshold(&results, tol)?;
    let n_chunks: usize = results.iter().map(|r| r.labels.n_chunks()).sum();
    println!("{}", serde_json::json!({ "threshold": p.threshold, "mdr": p.mdr, "far": p.far, "n_chunks": n_chunks }));
    Ok(())
}

pub fn infer(config: Option<&Path>, checkpoint: &Path, wav: &Path, threshold: Option<f64>, out: Option<&Path>) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let model = load_model(checkpoint)?;
    let w = read_wav(wav)?;
    if w.sample_rate != SAMPLE_RATE {
        return Err(funssl_core::Error::Input(format!("{} Hz audio, expected {SAMPLE_RATE}", w.sample_rate)).into());
    }
    if w.n_channels() != model.config.n_mics {
        return Err(funssl_core::Error::Input(format!(
            "{} channels, the model expects {}",
            w.n_channels(),
            model.config.n_mics
        ))
        .into());
    }
    let stft = StftConfig::default();
    let engine = StftEngine::new(stft)?;
    let x = prepare_features(&w, &engine)?;
    let est = model.infer(&x)?;
    let array = ArrayGeometry::new([0.0; 3], cfg.scene.mic_spacing, 0.0);
    let bank = TemplateBank::new(&array, &stft.grid(w.sample_rate));
    let d = decode(&est, &bank, model.config.n_sources)?;
    let tau = threshold.unwrap_or(cfg.eval.threshold);
    // chunks of digital silence carry no direction
    let energy = frame_energies(&w, stft);
    let silent: Vec<bool> = (0..d.n_chunks())
        .map(|c| energy[c * CHUNK_FRAMES..(c + 1) * CHUNK_FRAMES].iter().all(|&e| e == 0.0))
        .collect();
    let mut s = String::from("chunk,slot,azimuth_deg,score,active\n");
    for c in 0..d.n_chunks() {
        for q in 0..d.n_slots {
            let e = d.get(c, q);
            let active = !silent[c] && d.is_active(c, q, tau);
            s.push_str(&format!("{c},{q},{},{:.6},{}\n", e.azimuth_deg, e.score, active as u8));
        }
    }
    match out {
        Some(p) => std::fs::write(p, s).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().write_all(s.as_bytes())?,
    }
    Ok(())
}

pub fn complexity(config: Option<&Path>, blocks: &[usize], kind: Option<BlockKind>, c1: Option<usize>, csv: bool) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let mut base = cfg.model;
    if let Some(k) = kind {
        base.kind = k;
    }
    if let Some(c) = c1 {
        base.c1 = c;
    }
    let blocks = if blocks.is_empty() { vec![base.n_blocks] } else { blocks.to_vec() };
    for &n in &blocks {
        ModelConfig { n_blocks: n, ..base.clone() }.validate()?;
    }
    let rows = complexity_table(&base, &blocks, StftConfig::default().frames_per_second());
    if csv {
        println!("kind,n_blocks,c1,params,flops_per_second");
        for r in &rows {
            println!("{},{},{},{},{}", format!("{:?}", r.kind).to_lowercase(), r.n_blocks, r.c1, r.params, r.flops_per_second);
        }
    } else {
        println!("{:<5} {:>6} {:>4} {:>10} {:>9}", "kind", "blocks", "C1", "params(M)", "G/s");
        for r in &rows {
            println!(
                "{:<5} {:>6} {:>4} {:>10.3} {:>9.2}",
                format!("{:?}", r.kind).to_lowercase(),
                r.n_blocks,
                r.c1,
                r.params as f64 / 1e6,
                r.flops_per_second / 1e9
            );
        }
    }
    Ok(())
}
