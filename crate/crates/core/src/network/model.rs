use funssl_autograd::{Graph, Scalar, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{declare_params, fn_block, fun_block, output_head, BlockKind, BlockSkips, Bound, ModelConfig, ParamStore};
use crate::error::{Error, Result};

/// `[T, F]` extents at scales 0..=3 for `n_frames` input frames.
pub fn scale_extents(cfg: &ModelConfig, n_frames: usize) -> [[usize; 2]; 4] {
    let mut out = [[n_frames, cfg.n_bins]; 4];
    for j in 1..4 {
        out[j] = [out[j - 1][0].div_ceil(cfg.h[j - 1]), out[j - 1][1].div_ceil(2)];
    }
    out
}

/// Full forward pass on `x: [N, K, 2M]`, returning `[N / chunk, K, 2 (M − 1) Q]`.
pub fn model_forward<T: Scalar>(g: &mut Graph<T>, cfg: &ModelConfig, p: &Bound, x: Var) -> Result<Var> {
    let s = g.shape(x).to_vec();
    if s.len() != 3 || s[1] != cfg.n_bins || s[2] != cfg.input_channels() {
        return Err(Error::Dimension(format!(
            "model input {s:?}, expected [N, {}, {}]",
            cfg.n_bins,
            cfg.input_channels()
        )));
    }
    if s[0] < cfg.chunk {
        return Err(Error::Input(format!("{} frames is less than one chunk", s[0])));
    }
    let mut h = x;
    let mut skips = BlockSkips::default();
    for i in 0..cfg.n_blocks {
        h = match cfg.kind {
            BlockKind::Fun => {
                let (out, next) = fun_block(g, cfg, p, i, h, &skips)?;
                skips = next;
                out
            }
            BlockKind::Fn => fn_block(g, p, i, h)?,
        };
    }
    output_head(g, cfg, p, h)
}

/// A configuration together with its f32 parameters.
#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamStore<f32>,
}

impl Model {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let params = ParamStore::init(&declare_params(&config), &mut ChaCha8Rng::seed_from_u64(seed));
        Ok(Self { config, params })
    }

    pub fn from_params(config: ModelConfig, params: ParamStore<f32>) -> Result<Self> {
        config.validate()?;
        params.check_against(&declare_params(&config))?;
        Ok(Self { config, params })
    }

    /// Inference without gradient bookkeeping.
    pub fn infer(&self, x: &Tensor<f32>) -> Result<Tensor<f32>> {
        let mut g = Graph::new();
        let p = self.params.bind(&mut g, false);
        let xv = g.constant(x.clone());
        let y = model_forward(&mut g, &self.config, &p, xv)?;
        Ok(g.value(y).clone())
    }
}
