use crate::error::{dim_err, Result};
use crate::scalar::mm;
use crate::{Graph, Scalar, Tensor, Var};

impl<T: Scalar> Graph<T> {
    /// `y = x W + b` over the last axis of `x`, batched over all leading axes.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let ws = self.shape(w).to_vec();
        let bs = self.shape(b).to_vec();
        let (&din, Some(&dout)) = (xs.last().unwrap_or(&0), ws.get(1)) else {
            return dim_err("affine", format!("weight must be 2-D, got {ws:?}"));
        };
        if ws.len() != 2 || ws[0] != din || bs != [dout] {
            return dim_err(
                "affine",
                format!("x {xs:?}, W {ws:?}, b {bs:?}"),
            );
        }
        let rows = self.value(x).numel() / din.max(1);
        let mut out = vec![T::zero(); rows * dout];
        let bias = self.value(b).data();
        for r in 0..rows {
            out[r * dout..(r + 1) * dout].copy_from_slice(bias);
        }
        mm::nn(rows, din, dout, self.value(x).data(), self.value(w).data(), T::one(), &mut out);
        let mut shape = xs;
        *shape.last_mut().unwrap() = dout;
        Ok(self.push(
            Tensor::new(&shape, out)?,
            &[x, w, b],
            Box::new(move |ctx| {
                let (xv, wv) = (ctx.inputs[0].data(), ctx.inputs[1].data());
                let g = ctx.grad;
                let dx = ctx.needs[0].then(|| {
                    let mut dx = vec![T::zero(); rows * din];
                    mm::nt(rows, dout, din, g, wv, T::zero(), &mut dx);
                    dx
                });
                let dw = ctx.needs[1].then(|| {
                    let mut dw = vec![T::zero(); din * dout];
                    mm::tn(din, rows, dout, xv, g, T::zero(), &mut dw);
                    dw
                });
                let db = ctx.needs[2].then(|| {
                    let mut db = vec![T::zero(); dout];
                    for r in 0..rows {
                        db.iter_mut()
                            .zip(&g[r * dout..(r + 1) * dout])
                            .for_each(|(a, &v)| *a += v);
                    }
                    db
                });
                vec![dx, dw, db]
            }),
        ))
    }
}
