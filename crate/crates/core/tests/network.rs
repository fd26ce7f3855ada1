use funssl_autograd::{grad_check_inputs, Graph, Result as AgResult, Tensor, Var, GRAD_CHECK_EPS};
use funssl_core::network::*;
use funssl_core::training::pit_mse;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mini(kind: BlockKind, n_blocks: usize) -> ModelConfig {
    ModelConfig {
        kind,
        n_blocks,
        c1: 8,
        c2: 8,
        n_bins: 9,
        ..ModelConfig::default()
    }
}

fn input(cfg: &ModelConfig, n: usize, seed: u64) -> Tensor<f64> {
    Tensor::uniform(&[n, cfg.n_bins, cfg.input_channels()], 1.0, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Full-model finite-difference check over a sample of parameter coordinates.
fn model_grad_error(cfg: &ModelConfig, seed: u64, coords: usize) -> f64 {
    let store = ParamStore::<f32>::init(&declare_params(cfg), &mut ChaCha8Rng::seed_from_u64(seed)).cast::<f64>();
    let x = input(cfg, 24, seed + 100);
    let n_out = 24 / cfg.chunk;
    let target: Tensor<f64> = Tensor::uniform(
        &[n_out, cfg.n_bins, cfg.output_channels()],
        1.0,
        &mut ChaCha8Rng::seed_from_u64(seed + 200),
    );
    let f = |g: &mut Graph<f64>, vars: &[Var]| -> AgResult<Var> {
        let p = store.bind_vars(vars.to_vec()).expect("bind");
        let xv = g.constant(x.clone());
        let y = model_forward(g, cfg, &p, xv).expect("forward");
        Ok(pit_mse(g, y, &target, cfg.n_sources).expect("pit").0)
    };
    grad_check_inputs(f, &store.tensors, GRAD_CHECK_EPS, Some((coords, seed))).unwrap()
}

#[test]
fn miniature_fun_model_gradients() {
    for seed in 0..4 {
        let err = model_grad_error(&mini(BlockKind::Fun, 2), seed, 40);
        assert!(err <= 1e-3, "seed {seed}: {err}");
    }
}

#[test]
fn fn_block_gradients() {
    for seed in 0..6 {
        let cfg = ModelConfig {
            c1: 4,
            n_bins: 5,
            ..mini(BlockKind::Fn, 1)
        };
        let store = ParamStore::<f32>::init(&declare_params(&cfg), &mut ChaCha8Rng::seed_from_u64(seed)).cast::<f64>();
        let names = store.names.clone();
        let x = input(&cfg, 3, seed);
        let w = Tensor::uniform(&[3, 5, 4], 1.0, &mut ChaCha8Rng::seed_from_u64(seed + 9));
        let block: Vec<usize> = (0..names.len()).filter(|&i| names[i].starts_with("block0")).collect();
        let mut inputs = vec![x];
        inputs.extend(block.iter().map(|&i| store.tensors[i].clone()));
        let err = grad_check_inputs(
            |g, v| {
                let mut vars: Vec<Var> = store.tensors.iter().map(|t| g.constant(t.clone())).collect();
                for (k, &i) in block.iter().enumerate() {
                    vars[i] = v[k + 1];
                }
                let p = store.bind_vars(vars).unwrap();
                let y = fn_block(g, &p, 0, v[0]).unwrap();
                g.dot_const(y, &w)
            },
            &inputs,
            GRAD_CHECK_EPS,
            None,
        )
        .unwrap();
        assert!(err <= 1e-4, "seed {seed}: {err}");
    }
}

#[test]
fn fun_block_input_gradients() {
    // K = 5, N = 12, C1 = 4: every input coordinate through the full U-Net
    let cfg = ModelConfig {
        c1: 4,
        n_bins: 5,
        ..mini(BlockKind::Fun, 1)
    };
    for seed in 0..3 {
        let store = ParamStore::<f32>::init(&declare_params(&cfg), &mut ChaCha8Rng::seed_from_u64(seed)).cast::<f64>();
        let x = input(&cfg, 12, seed);
        let w = Tensor::uniform(&[12, 5, 4], 1.0, &mut ChaCha8Rng::seed_from_u64(seed + 3));
        let err = grad_check_inputs(
            |g, v| {
                let p = store.bind(g, false);
                let (y, _) = fun_block(g, &cfg, &p, 0, v[0], &BlockSkips::default()).unwrap();
                g.dot_const(y, &w)
            },
            &[x],
            GRAD_CHECK_EPS,
            None,
        )
        .unwrap();
        assert!(err <= 1e-4, "seed {seed}: {err}");
    }
}

#[test]
fn every_parameter_receives_gradient() {
    for kind in [BlockKind::Fun, BlockKind::Fn] {
        let cfg = mini(kind, 2);
        let m = Model::new(cfg.clone(), 5).unwrap();
        let mut g = Graph::new();
        let p = m.params.bind(&mut g, true);
        let x = g.constant(input(&cfg, 24, 1).cast::<f32>());
        let y = model_forward(&mut g, &cfg, &p, x).unwrap();
        let w: Tensor<f32> = Tensor::uniform(g.shape(y), 1.0, &mut ChaCha8Rng::seed_from_u64(4));
        let l = g.dot_const(y, &w).unwrap();
        let grads = g.backward(l).unwrap();
        for (name, &v) in m.params.names.iter().zip(&p.vars) {
            let gr = grads.get(v);
            assert!(
                gr.is_some_and(|t| t.data().iter().any(|&d| d != 0.0)),
                "{kind:?}: {name} has no gradient"
            );
        }
    }
}

fn forward(m: &Model, x: &Tensor<f32>) -> Tensor<f32> {
    m.infer(x).unwrap()
}

#[test]
fn chunk_causality() {
    for kind in [BlockKind::Fun, BlockKind::Fn] {
        let cfg = ModelConfig {
            c1: 8,
            c2: 8,
            n_bins: 17,
            kind,
            ..ModelConfig::default()
        };
        let m = Model::new(cfg.clone(), 11).unwrap();
        let x = input(&cfg, 48, 2).cast::<f32>();
        let base = forward(&m, &x);
        let per_chunk = cfg.n_bins * cfg.output_channels();
        for t in 0..3 {
            let mut y = x.clone();
            let from = (t + 1) * cfg.chunk * cfg.n_bins * cfg.input_channels();
            y.data_mut()[from..].iter_mut().for_each(|v| *v = -3.0 * *v + 0.5);
            let out = forward(&m, &y);
            let keep = (t + 1) * per_chunk;
            assert_eq!(&out.data()[..keep], &base.data()[..keep], "{kind:?}: chunk {t} changed");
            assert_ne!(&out.data()[keep..], &base.data()[keep..]);
        }
    }
}

#[test]
fn deterministic_and_reseeded() {
    let cfg = mini(BlockKind::Fun, 2);
    let x = input(&cfg, 36, 0).cast::<f32>();
    let a = forward(&Model::new(cfg.clone(), 1).unwrap(), &x);
    let b = forward(&Model::new(cfg.clone(), 1).unwrap(), &x);
    let c = forward(&Model::new(cfg, 2).unwrap(), &x);
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn zero_skips_equal_absent_skips() {
    let cfg = mini(BlockKind::Fun, 1);
    let m = Model::new(cfg.clone(), 3).unwrap();
    let x = input(&cfg, 24, 3).cast::<f32>();
    let mut g = Graph::new();
    let p = m.params.bind(&mut g, false);
    let xv = g.constant(x);
    let (a, _) = fun_block(&mut g, &cfg, &p, 0, xv, &BlockSkips::default()).unwrap();
    let ext = scale_extents(&cfg, 24);
    let mut skips = BlockSkips::default();
    for j in 0..3 {
        let [t, f] = ext[j + 1];
        skips.s[j] = Some(g.constant(Tensor::zeros(&[t, f, cfg.c1])));
    }
    let (b, _) = fun_block(&mut g, &cfg, &p, 0, xv, &skips).unwrap();
    assert_eq!(g.value(a), g.value(b));
}

#[test]
fn downsampled_extents_for_default_bins() {
    let cfg = ModelConfig {
        c1: 4,
        ..ModelConfig::default()
    };
    let m = Model::new(cfg.clone(), 0).unwrap();
    let mut g = Graph::new();
    let p = m.params.bind(&mut g, false);
    let mut x = g.constant(Tensor::<f32>::full(&[24, 257, 4], 0.1));
    let mut got = vec![[24, 257]];
    for j in 1..=3 {
        x = downsample(&mut g, &p, &format!("block0.down{j}"), x, cfg.h[j - 1], None).unwrap();
        got.push([g.shape(x)[0], g.shape(x)[1]]);
    }
    assert_eq!(got, vec![[24, 257], [12, 129], [6, 65], [2, 33]]);
    assert_eq!(got, scale_extents(&cfg, 24).to_vec());
}

#[test]
fn head_shape_and_constant_input() {
    let cfg = ModelConfig {
        c1: 8,
        c2: 8,
        ..ModelConfig::default()
    };
    let m = Model::new(cfg.clone(), 0).unwrap();
    let mut g = Graph::new();
    let p = m.params.bind(&mut g, false);
    let x = g.constant(Tensor::<f32>::full(&[60, 257, 8], 0.3));
    let y = output_head(&mut g, &cfg, &p, x).unwrap();
    assert_eq!(g.shape(y), &[5, 257, 4]);
    // the causal time kernel spans three chunks; from the third chunk on the
    // zero padding is out of reach and the output no longer changes
    let per = 257 * 4;
    let d = g.value(y).data();
    for c in 3..5 {
        assert_eq!(&d[c * per..(c + 1) * per], &d[2 * per..3 * per]);
    }
    let short = g.constant(Tensor::<f32>::zeros(&[11, 257, 8]));
    assert!(output_head(&mut g, &cfg, &p, short).is_err());
}

#[test]
fn wrong_input_shape_rejected() {
    let cfg = mini(BlockKind::Fun, 1);
    let m = Model::new(cfg, 0).unwrap();
    assert!(m.infer(&Tensor::zeros(&[24, 8, 4])).is_err());
    assert!(m.infer(&Tensor::zeros(&[24, 9, 3])).is_err());
    assert!(m.infer(&Tensor::zeros(&[11, 9, 4])).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn shape_algebra_for_any_length(n in 12usize..=200) {
        // default bins and down-sampling; narrow channels keep this fast
        let cfg = ModelConfig { c1: 4, c2: 4, ..ModelConfig::default() };
        let m = Model::new(cfg, 0).unwrap();
        let x = Tensor::<f32>::full(&[n, 257, 4], 0.25);
        let y = m.infer(&x).unwrap();
        prop_assert_eq!(y.shape(), &[n / 12, 257, 4]);
        prop_assert!(y.is_finite());
    }
}
