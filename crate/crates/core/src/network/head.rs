use funssl_autograd::{Graph, Padding, Scalar, Var};

use super::{Bound, ModelConfig};
use crate::error::{Error, Result};

/// Chunk pooling and the causal output block.
///
/// Mean-pools time by `chunk`, then point-wise conv to `C2`, PReLU, a
/// depth-wise `(3, 3)` conv (frequency padded 1/1, time padded 2 in front) and
/// a linear point-wise conv to `2 (M − 1) Q` channels. Output `[N / chunk, K, 2 (M − 1) Q]`.
pub fn output_head<T: Scalar>(g: &mut Graph<T>, cfg: &ModelConfig, p: &Bound, x: Var) -> Result<Var> {
    let n = g.shape(x)[0];
    if n < cfg.chunk {
        return Err(Error::Input(format!(
            "{n} frames is less than one {}-frame chunk",
            cfg.chunk
        )));
    }
    let pooled = g.mean_pool_axis0(x, cfg.chunk)?;
    let y = g.affine(pooled, p.var("head.pw1.w")?, p.var("head.pw1.b")?)?;
    let y = g.prelu(y, p.var("head.prelu")?)?;
    let yc = g.permute3(y, [2, 1, 0])?;
    let pad = Padding {
        before: [1, 2],
        after: [1, 0],
    };
    let z = g.depthwise_conv2d(yc, p.var("head.dw.kernel")?, Some(p.var("head.dw.bias")?), [1, 1], pad)?;
    let z = g.permute3(z, [2, 1, 0])?;
    Ok(g.affine(z, p.var("head.pw2.w")?, p.var("head.pw2.b")?)?)
}
