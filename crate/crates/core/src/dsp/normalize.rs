use funssl_autograd::Tensor;

use super::Spectrogram;
use crate::error::{Error, Result};

pub const LAPLACE_EPS: f64 = 1e-8;

/// Causal magnitude normalization against the reference channel.
///
/// Frame `n` is divided by `μ_n + ε`, where `μ_n` is the running mean over
/// frames `≤ n` of the bin-averaged reference magnitude. The output is
/// `[N, K, 2M]` with channels interleaved as `re_1, im_1, re_2, im_2, ...`.
pub fn laplace_normalize(s: &Spectrogram) -> Result<Tensor<f32>> {
    if s.n_channels < 2 {
        return Err(Error::Input(format!(
            "normalization needs at least two channels, got {}",
            s.n_channels
        )));
    }
    let (n_frames, k, m) = (s.n_frames, s.n_bins, s.n_channels);
    let mut out = Vec::with_capacity(n_frames * k * 2 * m);
    let mut running = 0.0;
    for n in 0..n_frames {
        let frame_mean = (0..k).map(|b| s.get(n, b, 0).norm()).sum::<f64>() / k as f64;
        running += frame_mean;
        let mu = running / (n + 1) as f64;
        let scale = 1.0 / (mu + LAPLACE_EPS);
        for b in 0..k {
            for c in 0..m {
                let v = s.get(n, b, c) * scale;
                out.push(v.re as f32);
                out.push(v.im as f32);
            }
        }
    }
    Ok(Tensor::new(&[n_frames, k, 2 * m], out)?)
}
