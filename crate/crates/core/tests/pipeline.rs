use funssl_core::eval::*;
use funssl_core::network::*;
use funssl_core::sim::*;
use funssl_core::training::*;
use tempfile::TempDir;

fn dataset(count: usize, n_sources: Option<usize>) -> (TempDir, Manifest) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = DatasetConfig {
        scene: SceneConfig {
            duration_s: 0.8,
            n_sources,
            ..SceneConfig::default()
        },
        count,
        seed: 91,
    };
    let m = build_dataset(&cfg, dir.path()).unwrap();
    (dir, m)
}

fn small_model() -> ModelConfig {
    ModelConfig {
        n_blocks: 1,
        c1: 8,
        c2: 8,
        ..ModelConfig::default()
    }
}

#[test]
fn oracle_targets_decode_exactly() {
    let (_d, m) = dataset(6, None);
    let samples = load_samples(&m, &small_model()).unwrap();
    let res = decode_targets(&samples, m.stft, 2).unwrap();
    let (r, _) = evaluate(&res, 0.5, ERROR_TOLERANCE_DEG).unwrap();
    assert_eq!(r.gross_acc, 1.0);
    assert!(r.fine_error.unwrap() <= 0.5, "{:?}", r.fine_error);
    assert_eq!((r.mdr, r.far), (0.0, 0.0));
}

#[test]
fn zero_output_loss_is_half_the_active_fraction() {
    let (_d, m) = dataset(4, None);
    let cfg = small_model();
    let samples = load_samples(&m, &cfg).unwrap();
    let mut model = Model::new(cfg, 0).unwrap();
    // zero head weights and bias give an all-zero output
    for (n, t) in model.params.names.iter().zip(model.params.tensors.iter_mut()) {
        if n.starts_with("head.pw2") {
            t.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
    }
    for s in &samples {
        let loss = evaluate_loss(&model, std::slice::from_ref(s)).unwrap();
        let frac = s.labels.n_active() as f64 / s.labels.active.len() as f64;
        assert!((loss - frac / 2.0).abs() < 1e-5, "{}: {loss} vs {frac}", s.id);
    }
}

#[test]
fn repeated_batch_loss_decreases() {
    let (_d, m) = dataset(2, Some(1));
    let cfg = small_model();
    let samples = load_samples(&m, &cfg).unwrap();
    let mut t = Trainer::new(Model::new(cfg, 1).unwrap(), TrainConfig::default()).unwrap();
    let batch: Vec<&Sample> = samples.iter().collect();
    let losses: Vec<f64> = (0..50).map(|_| t.train_step(&batch, 1e-3).unwrap()).collect();
    let violations = losses.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(violations <= 5, "{violations} increases: {losses:?}");
    assert!(losses[49] < 0.8 * losses[0], "{} -> {}", losses[0], losses[49]);
}

#[test]
fn batch_loss_matches_evaluation() {
    let (_d, m) = dataset(3, None);
    let cfg = small_model();
    let samples = load_samples(&m, &cfg).unwrap();
    let t = Trainer::new(Model::new(cfg, 2).unwrap(), TrainConfig::default()).unwrap();
    let batch: Vec<&Sample> = samples.iter().collect();
    let (loss, grads) = t.batch_gradient(&batch).unwrap();
    let eval = evaluate_loss(&t.model, &samples).unwrap();
    assert!((loss - eval).abs() <= 1e-6 * eval.max(1.0), "{loss} vs {eval}");
    assert_eq!(grads.len(), t.model.params.len());
}

#[test]
fn resume_reproduces_uninterrupted_run() {
    let (_d, m) = dataset(4, None);
    let cfg = small_model();
    let samples = load_samples(&m, &cfg).unwrap();
    let (train, val) = samples.split_at(3);
    let tc = TrainConfig {
        epochs: 4,
        batch_size: 2,
        seed: 5,
        ..TrainConfig::default()
    };

    let full_dir = tempfile::tempdir().unwrap();
    let mut full = Trainer::new(Model::new(cfg.clone(), 3).unwrap(), tc.clone()).unwrap();
    let a = full.fit(train, Some(val), Some(full_dir.path()), |_| {}).unwrap();

    let part_dir = tempfile::tempdir().unwrap();
    let half = TrainConfig { epochs: 2, ..tc.clone() };
    let mut first = Trainer::new(Model::new(cfg, 3).unwrap(), half).unwrap();
    let mut b = first.fit(train, Some(val), Some(part_dir.path()), |_| {}).unwrap();
    drop(first);
    let mut resumed = Trainer::resume(part_dir.path(), Some(tc)).unwrap();
    assert_eq!((resumed.epoch, resumed.step), (2, 4));
    b.extend(resumed.fit(train, Some(val), Some(part_dir.path()), |_| {}).unwrap());

    assert_eq!(a, b);
    assert_eq!(full.model.params, resumed.model.params);
    let csv_a = std::fs::read_to_string(full_dir.path().join(LOSS_CSV)).unwrap();
    let csv_b = std::fs::read_to_string(part_dir.path().join(LOSS_CSV)).unwrap();
    assert_eq!(csv_a, csv_b);
    assert_eq!(csv_a.lines().count(), 1 + 4 * 3);
}

#[test]
fn checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let model = Model::new(small_model(), 4).unwrap();
    let path = dir.path().join("m.ckpt");
    Checkpoint::save(&model, &path, serde_json::json!({ "note": 1 })).unwrap();
    let (back, meta) = Checkpoint::load(&path).unwrap();
    assert_eq!(back.config, model.config);
    assert_eq!(back.params, model.params);
    assert_eq!(meta["note"], 1);
    std::fs::write(&path, b"FUNSSL01garbage").unwrap();
    assert!(Checkpoint::load(&path).is_err());
}
