use funssl_autograd::{Graph, Padding, Scalar, Var};

use super::{Bound, ModelConfig};
use crate::error::{Error, Result};

/// Narrow-band outputs at scales 1..=3 handed from one FUN block to the next.
#[derive(Clone, Copy, Debug, Default)]
pub struct BlockSkips {
    pub s: [Option<Var>; 3],
}

/// `[T, F, C]` to the `[C, F, T]` layout of the convolution primitives and back.
const SWAP_TC: [usize; 3] = [2, 1, 0];

fn dims3<T: Scalar>(g: &Graph<T>, x: Var, what: &str) -> Result<[usize; 3]> {
    match *g.shape(x) {
        [a, b, c] => Ok([a, b, c]),
        ref s => Err(Error::Dimension(format!("{what}: expected [T, F, C], got {s:?}"))),
    }
}

fn act_norm<T: Scalar>(g: &mut Graph<T>, p: &Bound, prefix: &str, x: Var) -> Result<Var> {
    let y = g.prelu(x, p.var(&format!("{prefix}.prelu"))?)?;
    Ok(g.cln(
        y,
        p.var(&format!("{prefix}.cln.gain"))?,
        p.var(&format!("{prefix}.cln.bias"))?,
    )?)
}

/// Depth-wise conv with kernel `(5, 2h)` and stride `(2, h)` over
/// (frequency, time), PReLU, cLN, plus the skip from the previous block.
///
/// Frequency is padded by 2 on both sides. Time is padded by `h` in front and
/// by just enough at the back to reach `ceil(T / h)` outputs; output frame
/// `o` then sees input frames `≤ (o + 1) h − 1` only.
pub fn downsample<T: Scalar>(
    g: &mut Graph<T>,
    p: &Bound,
    prefix: &str,
    x: Var,
    h: usize,
    skip: Option<Var>,
) -> Result<Var> {
    let [t, _, _] = dims3(g, x, prefix)?;
    let right = t.div_ceil(h) * h - t;
    let pad = Padding {
        before: [2, h],
        after: [2, right],
    };
    let xc = g.permute3(x, SWAP_TC)?;
    let y = g.depthwise_conv2d(
        xc,
        p.var(&format!("{prefix}.kernel"))?,
        Some(p.var(&format!("{prefix}.bias"))?),
        [2, h],
        pad,
    )?;
    let y = g.permute3(y, SWAP_TC)?;
    let y = act_norm(g, p, prefix, y)?;
    match skip {
        Some(s) => g.add(y, s).map_err(|e| Error::Dimension(format!("{prefix} skip: {e}"))),
        None => Ok(y),
    }
}

/// Depth-wise transposed conv with kernel `(5, 2h)` and stride `(2, h)`,
/// PReLU and cLN, trimmed to `target = [T, F]`.
///
/// The frequency crop of 2 mirrors the down-sampling pad. No time crop is
/// applied, so a coarse frame only reaches its own and the following fine
/// frames.
pub fn upsample<T: Scalar>(
    g: &mut Graph<T>,
    p: &Bound,
    prefix: &str,
    x: Var,
    h: usize,
    target: [usize; 2],
) -> Result<Var> {
    let xc = g.permute3(x, SWAP_TC)?;
    let y = g.depthwise_transposed_conv2d(
        xc,
        p.var(&format!("{prefix}.kernel"))?,
        Some(p.var(&format!("{prefix}.bias"))?),
        [2, h],
        [2, 0],
        [target[1], target[0]],
    )?;
    let y = g.permute3(y, SWAP_TC)?;
    act_norm(g, p, prefix, y)
}

/// Bidirectional LSTM along the frequency axis of `[T, F, C]`, batched over frames.
fn fullband<T: Scalar>(g: &mut Graph<T>, p: &Bound, prefix: &str, x: Var) -> Result<Var> {
    let xf = g.permute3(x, [1, 0, 2])?;
    let y = g.bilstm(xf, &p.lstm(&format!("{prefix}.fwd"))?, &p.lstm(&format!("{prefix}.bwd"))?)?;
    Ok(g.permute3(y, [1, 0, 2])?)
}

/// One FUN block. Returns the scale-0 output and the skips for the next block.
pub fn fun_block<T: Scalar>(
    g: &mut Graph<T>,
    cfg: &ModelConfig,
    p: &Bound,
    index: usize,
    x: Var,
    prev: &BlockSkips,
) -> Result<(Var, BlockSkips)> {
    let b = format!("block{index}");
    let e = g.affine(x, p.var(&format!("{b}.embed.fc.w"))?, p.var(&format!("{b}.embed.fc.b"))?)?;
    let e = act_norm(g, p, &format!("{b}.embed"), e)?;
    let mut d = [fullband(g, p, &format!("{b}.full"), e)?; 4];
    for j in 1..=3 {
        d[j] = downsample(g, p, &format!("{b}.down{j}"), d[j - 1], cfg.h[j - 1], prev.s[j - 1])?;
    }
    let mut skips = BlockSkips::default();
    let mut u: Option<Var> = None;
    let mut out = d[0];
    for j in 1..=4 {
        let scale = 4 - j;
        let input = match u {
            Some(u) => g.add(u, d[scale])?,
            None => d[scale],
        };
        let s = g.lstm_sequence(input, &p.lstm(&format!("{b}.narrow{scale}"))?, None, false)?;
        if scale > 0 {
            skips.s[scale - 1] = Some(s);
            let [t, f, _] = dims3(g, d[scale - 1], &b)?;
            u = Some(upsample(g, p, &format!("{b}.up{j}"), s, cfg.h[scale - 1], [t, f])?);
        } else {
            out = s;
        }
    }
    Ok((out, skips))
}

/// Baseline block: `y1 = [BLSTM_freq(x), x]`, `y = FC([LSTM_time(y1), x])`.
pub fn fn_block<T: Scalar>(g: &mut Graph<T>, p: &Bound, index: usize, x: Var) -> Result<Var> {
    let b = format!("block{index}");
    let f = fullband(g, p, &format!("{b}.full"), x)?;
    let y1 = g.concat_last(f, x)?;
    let n = g.lstm_sequence(y1, &p.lstm(&format!("{b}.narrow"))?, None, false)?;
    let y2 = g.concat_last(n, x)?;
    Ok(g.affine(y2, p.var(&format!("{b}.proj.w"))?, p.var(&format!("{b}.proj.b"))?)?)
}
