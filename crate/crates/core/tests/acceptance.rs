//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use funssl_autograd::{
    grad_check_inputs, Graph, LstmParams, LstmState, Padding, Result as AgResult, Tensor, Var, GRAD_CHECK_EPS,
};
use funssl_core::dprtf::{ChunkLabels, TemplateBank, N_AZIMUTHS};
use funssl_core::dsp::{one_sided_weights, StftConfig, Waveform};
use funssl_core::eval::*;
use funssl_core::geometry::SAMPLE_RATE;
use funssl_core::network::*;
use funssl_core::sim::*;
use funssl_core::training::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

type Outcome = Result<String, String>;

fn within(name: &str, got: f64, want: f64, rel: f64) -> Outcome {
    let dev = (got - want).abs() / want;
    let msg = format!("{name} {got:.4} vs {want} ({:+.1}%)", 100.0 * (got - want) / want);
    if dev <= rel {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn all(parts: Vec<Outcome>) -> Outcome {
    let ok = parts.iter().all(Result::is_ok);
    let text = parts
        .into_iter()
        .map(|p| p.unwrap_or_else(|e| format!("[{e}]")))
        .collect::<Vec<_>>()
        .join("; ");
    if ok {
        Ok(text)
    } else {
        Err(text)
    }
}

fn complexity() -> Outcome {
    let fps = StftConfig::default().frames_per_second();
    let base = ModelConfig::default();
    let mut parts = vec![
        within("default params M", count_params(&base) as f64 / 1e6, 0.8, 0.06),
        within("default G/s", count_flops(&base, fps) / 1e9, 10.8, 0.20),
    ];
    for row in complexity_table(&base, &[1, 3], fps) {
        let (p, f) = if row.n_blocks == 1 { (0.4, 5.6) } else { (1.2, 16.0) };
        parts.push(within(&format!("{} blocks M", row.n_blocks), row.params as f64 / 1e6, p, 0.10));
        parts.push(within(&format!("{} blocks G/s", row.n_blocks), row.flops_per_second / 1e9, f, 0.20));
    }
    let fnb = ModelConfig {
        kind: BlockKind::Fn,
        n_blocks: 5,
        c1: 56,
        ..base
    };
    parts.push(within("FN 5x56 G/s", count_flops(&fnb, fps) / 1e9, 10.8, 0.20));
    all(parts)
}

fn overfit() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = DatasetConfig {
        scene: SceneConfig {
            duration_s: 0.6,
            snr_db: [15.0, 15.0],
            n_sources: Some(1),
            moving: Some(false),
            ..SceneConfig::default()
        },
        count: 32,
        seed: 2024,
    };
    let m = build_dataset(&data, dir.path()).map_err(|e| e.to_string())?;
    let cfg = ModelConfig {
        n_blocks: 1,
        c1: 32,
        ..ModelConfig::default()
    };
    let samples = load_samples(&m, &cfg).map_err(|e| e.to_string())?;
    let tc = TrainConfig {
        epochs: 200,
        batch_size: 1,
        seed: 3,
        ..TrainConfig::default()
    };
    let mut t = Trainer::new(Model::new(cfg, 7).map_err(|e| e.to_string())?, tc).map_err(|e| e.to_string())?;
    let s = t.fit(&samples, None, None, |_| {}).map_err(|e| e.to_string())?;
    let res = decode_samples(&t.model, &samples, m.stft).map_err(|e| e.to_string())?;
    let cal = calibrate_threshold(&res, ERROR_TOLERANCE_DEG).map_err(|e| e.to_string())?;
    let (r, _) = evaluate(&res, cal.threshold, ERROR_TOLERANCE_DEG).map_err(|e| e.to_string())?;
    let fine = r.fine_error.unwrap_or(f64::INFINITY);
    let secs = start.elapsed().as_secs_f64();
    let msg = format!(
        "{secs:.0}s of 1800s budget, loss {:.4} -> {:.4}, gross {:.1}%, fine {fine:.2} deg, tau {:.3} (MDR {:.3}, FAR {:.3})",
        s[0].train_loss,
        s[s.len() - 1].train_loss,
        100.0 * r.gross_acc,
        r.threshold,
        r.mdr,
        r.far
    );
    if r.gross_acc >= 0.95 && fine <= 3.0 && secs <= 1800.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

type Built = (Vec<Tensor<f64>>, Box<dyn Fn(&mut Graph<f64>, &[Var]) -> AgResult<Var>>);

fn project(g: &mut Graph<f64>, y: Var, seed: u64) -> AgResult<Var> {
    let w = Tensor::uniform(g.shape(y), 1.0, &mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed));
    g.dot_const(y, &w)
}

fn rt(shape: &[usize], r: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::uniform(shape, 1.0, r)
}

/// Worst relative error of `build` over `seeds` random instances.
fn primitive(seeds: u64, build: impl Fn(u64, &mut ChaCha8Rng) -> Built) -> f64 {
    (0..seeds)
        .map(|s| {
            let mut r = ChaCha8Rng::seed_from_u64(1000 + s);
            let (inputs, f) = build(s, &mut r);
            grad_check_inputs(|g, v| f(g, v), &inputs, GRAD_CHECK_EPS, None).expect("grad check")
        })
        .fold(0.0, f64::max)
}

fn gradients() -> Outcome {
    const SEEDS: u64 = 20;
    let checks: Vec<(&str, f64)> = vec![
        ("affine", primitive(SEEDS, |s, r| {
            let (n, i, o) = (r.random_range(1..5), r.random_range(1..6), r.random_range(1..6));
            (vec![rt(&[n, i], r), rt(&[i, o], r), rt(&[o], r)], Box::new(move |g, v| {
                let y = g.affine(v[0], v[1], v[2])?;
                project(g, y, s)
            }))
        })),
        ("prelu", primitive(SEEDS, |s, r| {
            let c = r.random_range(1..5);
            (vec![rt(&[3, c], r), rt(&[1], r)], Box::new(move |g, v| {
                let y = g.prelu(v[0], v[1])?;
                project(g, y, s)
            }))
        })),
        ("cln", primitive(SEEDS, |s, r| {
            let (t, b, c) = (r.random_range(1..5), r.random_range(2..4), r.random_range(2..4));
            (vec![rt(&[t, b, c], r), rt(&[c], r), rt(&[c], r)], Box::new(move |g, v| {
                let y = g.cln(v[0], v[1], v[2])?;
                project(g, y, s)
            }))
        })),
        ("depthwise conv", primitive(SEEDS, |s, r| {
            let c = r.random_range(1..3);
            let k = [r.random_range(1..4), r.random_range(1..4)];
            let st = [r.random_range(1..3), r.random_range(1..3)];
            let pad = Padding { before: [r.random_range(0..2), 0], after: [0, r.random_range(0..2)] };
            let a = [k[0] + r.random_range(0..4), k[1] + r.random_range(0..4)];
            (vec![rt(&[c, a[0], a[1]], r), rt(&[c, k[0], k[1]], r), rt(&[c], r)], Box::new(move |g, v| {
                let y = g.depthwise_conv2d(v[0], v[1], Some(v[2]), st, pad)?;
                project(g, y, s)
            }))
        })),
        ("transposed conv", primitive(SEEDS, |s, r| {
            let c = r.random_range(1..3);
            let k = [r.random_range(2..5), r.random_range(2..5)];
            let st = [r.random_range(1..3), r.random_range(1..4)];
            let b = [r.random_range(1..4), r.random_range(1..4)];
            let crop = [r.random_range(0..2), 0];
            let target = [(b[0] - 1) * st[0] + k[0] - crop[0], (b[1] - 1) * st[1] + k[1] - r.random_range(0..2)];
            (vec![rt(&[c, b[0], b[1]], r), rt(&[c, k[0], k[1]], r), rt(&[c], r)], Box::new(move |g, v| {
                let y = g.depthwise_transposed_conv2d(v[0], v[1], Some(v[2]), st, crop, target)?;
                project(g, y, s)
            }))
        })),
        ("lstm step", primitive(SEEDS, |s, r| {
            let (b, d, h) = (r.random_range(1..4), r.random_range(1..5), r.random_range(1..5));
            let inputs = vec![
                rt(&[b, d], r), rt(&[b, h], r), rt(&[b, h], r),
                rt(&[d, 4 * h], r), rt(&[h, 4 * h], r), rt(&[4 * h], r),
            ];
            (inputs, Box::new(move |g, v| {
                let p = LstmParams { w_ih: v[3], w_hh: v[4], bias: v[5] };
                let (hn, cn) = g.lstm_step(v[0], LstmState { h: v[1], c: v[2] }, &p)?;
                let y = g.concat_last(hn, cn)?;
                project(g, y, s)
            }))
        })),
        ("lstm sequence", primitive(SEEDS, |s, r| {
            let (t, b, d, h) = (r.random_range(1..5), r.random_range(1..3), r.random_range(1..4), r.random_range(1..4));
            let inputs = vec![rt(&[t, b, d], r), rt(&[d, 4 * h], r), rt(&[h, 4 * h], r), rt(&[4 * h], r)];
            (inputs, Box::new(move |g, v| {
                let p = LstmParams { w_ih: v[1], w_hh: v[2], bias: v[3] };
                let y = g.lstm_sequence(v[0], &p, None, s % 2 == 1)?;
                project(g, y, s)
            }))
        })),
        ("bilstm + shape ops", primitive(SEEDS, |s, r| {
            let (t, b, d, h) = (2 * r.random_range(1..3), r.random_range(1..3), r.random_range(1..4), 2);
            let mut inputs = vec![rt(&[t, b, d], r)];
            for _ in 0..2 {
                inputs.extend([rt(&[d, 4 * h], r), rt(&[h, 4 * h], r), rt(&[4 * h], r)]);
            }
            (inputs, Box::new(move |g, v| {
                let f = LstmParams { w_ih: v[1], w_hh: v[2], bias: v[3] };
                let bw = LstmParams { w_ih: v[4], w_hh: v[5], bias: v[6] };
                let xp = g.permute3(v[0], [1, 0, 2])?;
                let x = g.permute3(xp, [1, 0, 2])?;
                let y = g.bilstm(x, &f, &bw)?;
                let y = g.reverse_axis0(y)?;
                let y = g.mean_pool_axis0(y, 2)?;
                let y = g.slice_last(y, 1, 2 * h - 1)?;
                let n = g.shape(y).iter().product::<usize>();
                let y = g.reshape(y, &[n])?;
                project(g, y, s)
            }))
        })),
        ("elementwise", primitive(SEEDS, |s, r| {
            let n = r.random_range(1..8);
            let target = rt(&[n], r);
            (vec![rt(&[n], r), rt(&[n], r)], Box::new(move |g, v| {
                let a = g.add(v[0], v[1])?;
                let b = g.sub(v[0], v[1])?;
                let m = g.mul(a, b)?;
                let t = g.tanh(m);
                let q = g.square(t);
                let sc = g.scale(q, 0.7);
                let e = g.mse(sc, &target)?;
                let mu = g.mean(t);
                let both = g.add(e, mu)?;
                let total = g.sum(both);
                project(g, total, s)
            }))
        })),
        ("pit mse", primitive(SEEDS, |s, r| {
            let (c, k) = (r.random_range(1..3), r.random_range(1..4));
            let target = rt(&[c, k, 4], r);
            let _ = s;
            (vec![rt(&[c, k, 4], r)], Box::new(move |g, v| Ok(pit_mse(g, v[0], &target, 2).expect("pit").0)))
        })),
    ];
    let mut parts: Vec<Outcome> = checks
        .into_iter()
        .map(|(n, e)| {
            let msg = format!("{n} {e:.1e}");
            if e <= 1e-4 { Ok(msg) } else { Err(msg) }
        })
        .collect();
    let worst = (0..20).map(model_grad_error).fold(0.0, f64::max);
    let msg = format!("miniature model {worst:.1e}");
    parts.push(if worst <= 1e-3 { Ok(msg) } else { Err(msg) });
    all(parts)
}

fn model_grad_error(seed: u64) -> f64 {
    let cfg = ModelConfig {
        n_blocks: 2,
        c1: 8,
        c2: 8,
        n_bins: 9,
        ..ModelConfig::default()
    };
    let store = ParamStore::<f32>::init(&declare_params(&cfg), &mut ChaCha8Rng::seed_from_u64(seed)).cast::<f64>();
    let mut r = ChaCha8Rng::seed_from_u64(seed + 500);
    let x = rt(&[24, cfg.n_bins, cfg.input_channels()], &mut r);
    let target = rt(&[2, cfg.n_bins, cfg.output_channels()], &mut r);
    let f = |g: &mut Graph<f64>, vars: &[Var]| -> AgResult<Var> {
        let p = store.bind_vars(vars.to_vec()).expect("bind");
        let xv = g.constant(x.clone());
        let y = model_forward(g, &cfg, &p, xv).expect("forward");
        Ok(pit_mse(g, y, &target, cfg.n_sources).expect("pit").0)
    };
    grad_check_inputs(f, &store.tensors, GRAD_CHECK_EPS, Some((40, seed))).expect("grad check")
}

fn dprtf_oracle() -> Outcome {
    let array = common::array();
    let grid = StftConfig::default().grid(SAMPLE_RATE);
    let bank = TemplateBank::new(&array, &grid);
    let (mut modulus, mut symmetry) = (0.0f64, 0.0f64);
    for theta in 0..N_AZIMUTHS {
        for (a, b) in bank.row(theta).iter().zip(bank.row(180 - theta)) {
            modulus = modulus.max((a.norm() - 1.0).abs());
            symmetry = symmetry.max((a - b.conj()).norm());
        }
    }
    let (mut err, mut score) = (0.0f64, 0.0f64);
    for theta in 0..N_AZIMUTHS {
        let e = decode_vector(bank.row(theta), &bank).map_err(|e| e.to_string())?;
        err = err.max((e.azimuth_deg - theta as f64).abs());
        score = score.max((e.score - 1.0).abs());
    }
    let msg = format!(
        "{} entries: max ||d|-1| {modulus:.1e}, max conj gap {symmetry:.1e}; decode max error {err} deg, max |score-1| {score:.1e}",
        bank.values.len()
    );
    if modulus <= 1e-12 && symmetry <= 1e-9 && err == 0.0 && score <= 1e-9 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn pit_invariance() -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(55);
    let (mut changed, mut wrong_perm) = (0, 0);
    for _ in 0..100 {
        let (c, k) = (r.random_range(1..5), r.random_range(1..20));
        let pred: Tensor<f64> = Tensor::uniform(&[c, k, 4], 1.0, &mut r);
        let target: Tensor<f64> = Tensor::uniform(&[c, k, 4], 1.0, &mut r);
        let swapped = permute_slots(&target, 2, &[1, 0]);
        let (a, _) = pit_mse_value(&pred, &target, 2).map_err(|e| e.to_string())?;
        let (b, _) = pit_mse_value(&pred, &swapped, 2).map_err(|e| e.to_string())?;
        if a.to_bits() != b.to_bits() {
            changed += 1;
        }
        let (l, perm) = pit_mse_value(&pred, &permute_slots(&pred, 2, &[1, 0]), 2).map_err(|e| e.to_string())?;
        if l != 0.0 || perm != [1, 0] {
            wrong_perm += 1;
        }
    }
    let msg = format!("100 pairs: {changed} loss changes, {wrong_perm} wrong permutations");
    if changed == 0 && wrong_perm == 0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn causality() -> Outcome {
    let cfg = ModelConfig::default();
    let model = Model::new(cfg.clone(), 21).map_err(|e| e.to_string())?;
    let per_in = cfg.n_bins * cfg.input_channels();
    let per_out = cfg.n_bins * cfg.output_channels();
    let mut broken = Vec::new();
    for i in 0..10u64 {
        let mut r = ChaCha8Rng::seed_from_u64(300 + i);
        let x: Tensor<f32> = Tensor::uniform(&[36, cfg.n_bins, cfg.input_channels()], 1.5, &mut r);
        let cut = r.random_range(1..3);
        let mut y = x.clone();
        y.data_mut()[cut * cfg.chunk * per_in..]
            .iter_mut()
            .for_each(|v| *v = r.random_range(-2.0..2.0));
        let a = model.infer(&x).map_err(|e| e.to_string())?;
        let b = model.infer(&y).map_err(|e| e.to_string())?;
        let keep = cut * per_out;
        if a.data()[..keep] != b.data()[..keep] || a.data()[keep..] == b.data()[keep..] {
            broken.push(i);
        }
    }
    let msg = format!("default model, 10 inputs of 36 frames, violations {broken:?}");
    if broken.is_empty() {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn simulator() -> Outcome {
    let mut parts = Vec::new();
    for (i, kind) in [NoiseKind::White, NoiseKind::SpeechShaped].into_iter().enumerate() {
        let mae = common::coherence_mae(kind, 70 + i as u64, 8.0);
        let msg = format!("{kind:?} coherence MAE {mae:.4}");
        parts.push(if mae <= 0.1 { Ok(msg) } else { Err(msg) });
    }
    let mut worst_snr = 0.0f64;
    for seed in 0..6u64 {
        let snr = -5.0 + 4.0 * seed as f64;
        let (_, r) = common::render(&common::scene_config(1 + seed as usize % 2, seed % 3 == 0, snr, 1.0), seed);
        worst_snr = worst_snr.max((common::measured_snr_db(&r) - snr).abs());
    }
    let msg = format!("SNR max error {worst_snr:.2e} dB");
    parts.push(if worst_snr <= 0.1 { Ok(msg) } else { Err(msg) });
    let ipd = (0..5).map(common::static_ipd_rms).fold(0.0, f64::max);
    let msg = format!("static IPD max RMS {ipd:.4} rad");
    parts.push(if ipd <= 0.1 { Ok(msg) } else { Err(msg) });
    all(parts)
}

fn calibration() -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(8);
    let on = Normal::new(0.7, 0.15).unwrap();
    let off = Normal::new(0.45, 0.15).unwrap();
    let mut results = Vec::new();
    let mut n_chunks = 0;
    for s in 0..20 {
        let chunks = r.random_range(10..40);
        n_chunks += chunks;
        let mut labels = ChunkLabels { n_slots: 2, active: Vec::new(), azimuth_deg: Vec::new() };
        let mut slots = Vec::new();
        for _ in 0..2 * chunks {
            let active = r.random_bool(0.6);
            let az = r.random_range(0.0..180.0f64).round();
            labels.active.push(active);
            labels.azimuth_deg.push(if active { az } else { 0.0 });
            let score = if active { on.sample(&mut r) } else { off.sample(&mut r) };
            slots.push(SlotEstimate { azimuth_deg: az, score });
        }
        results.push(SceneResult {
            id: format!("syn{s}"),
            decoding: Decoding { n_slots: 2, slots },
            labels,
        });
    }
    let p = calibrate_threshold(&results, ERROR_TOLERANCE_DEG).map_err(|e| e.to_string())?;
    let (m, _) = evaluate(&results, p.threshold, ERROR_TOLERANCE_DEG).map_err(|e| e.to_string())?;
    let gap = (m.mdr - m.far).abs();
    let msg = format!(
        "{n_chunks} chunks: tau {:.4}, MDR {:.4}, FAR {:.4}, gap {gap:.4} (bound {:.4})",
        p.threshold,
        m.mdr,
        m.far,
        1.0 / n_chunks as f64
    );
    if gap <= 1.0 / n_chunks as f64 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn stft_checks() -> Outcome {
    let engine = common::engine();
    let cfg = engine.config();
    let mut r = ChaCha8Rng::seed_from_u64(12);
    let (mut worst_snr, mut worst_parseval) = (f64::INFINITY, 0.0f64);
    for trial in 0..5 {
        let len = 16000 + trial * 777;
        let x: Vec<f64> = (0..len).map(|_| r.random_range(-1.0..1.0)).collect();
        let w = Waveform::mono(x.clone(), SAMPLE_RATE);
        let s = engine.stft(&w).map_err(|e| e.to_string())?;
        let y = engine.istft(&s).map_err(|e| e.to_string())?;
        // compare where at least two windows overlap
        let (lo, hi) = (cfg.window_len, y.len() - cfg.window_len);
        let sig: f64 = x[lo..hi].iter().map(|v| v * v).sum();
        let err: f64 = x[lo..hi].iter().zip(&y.channels[0][lo..hi]).map(|(a, b)| (a - b).powi(2)).sum();
        worst_snr = worst_snr.min(10.0 * (sig / err.max(1e-300)).log10());

        let weights = one_sided_weights(cfg.fft_len);
        let win = engine.window();
        for n in 0..s.n_frames {
            let time: f64 = (0..cfg.window_len).map(|i| (x[n * cfg.hop + i] * win[i]).powi(2)).sum();
            let freq: f64 = (0..s.n_bins)
                .map(|k| weights[k] * s.get(n, k, 0).norm_sqr())
                .sum::<f64>()
                / cfg.fft_len as f64;
            worst_parseval = worst_parseval.max((time - freq).abs() / time);
        }
    }
    let msg = format!("round trip min SNR {worst_snr:.1} dB, Parseval max rel. error {worst_parseval:.1e}");
    if worst_snr >= 50.0 && worst_parseval <= 1e-5 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("complexity", complexity),
        ("overfit", overfit),
        ("gradients", gradients),
        ("dprtf oracle", dprtf_oracle),
        ("pit invariance", pit_invariance),
        ("causality", causality),
        ("simulator statistics", simulator),
        ("calibration", calibration),
        ("stft", stft_checks),
    ];
    let only: Option<usize> = std::env::var("FUNSSL_CRITERION").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if only.is_some_and(|o| o != i + 1) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("PASS criterion {} ({name}, {secs:.1}s): {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {} ({name}, {secs:.1}s): {msg}", i + 1)
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
