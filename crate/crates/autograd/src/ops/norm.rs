use crate::error::{dim_err, Result};
use crate::{Graph, Scalar, Tensor, Var};

/// Variance floor of cumulative layer normalization.
pub const CLN_EPS: f64 = 1e-8;

impl<T: Scalar> Graph<T> {
    /// Cumulative layer normalization over `x: [T, B, C]`.
    ///
    /// Frame `t` is normalized with the mean and variance of every entry of
    /// frames `0..=t`, so the output at `t` never depends on later frames.
    /// Statistics are accumulated sequentially in f64.
    pub fn cln(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var> {
        let s = self.shape(x).to_vec();
        let &[nt, nb, nc] = s.as_slice() else {
            return dim_err("cln", format!("expected [T, B, C], got {s:?}"));
        };
        if self.shape(gain) != [nc] || self.shape(bias) != [nc] {
            return dim_err(
                "cln",
                format!(
                    "gain {:?} / bias {:?} for {nc} channels",
                    self.shape(gain),
                    self.shape(bias)
                ),
            );
        }
        let row = nb * nc;
        let xv = self.value(x).data();
        let gv = self.value(gain).data();
        let bv = self.value(bias).data();

        let mut means = Vec::with_capacity(nt);
        let mut rstd = Vec::with_capacity(nt);
        let mut live = Vec::with_capacity(nt);
        let (mut s1, mut s2) = (0.0f64, 0.0f64);
        for t in 0..nt {
            for &v in &xv[t * row..(t + 1) * row] {
                let v = v.to_f64().unwrap_or(f64::NAN);
                s1 += v;
                s2 += v * v;
            }
            let n = ((t + 1) * row) as f64;
            let mean = s1 / n;
            let raw = s2 / n - mean * mean;
            live.push(raw > 0.0);
            let var = raw.max(0.0);
            means.push(mean);
            rstd.push(1.0 / (var + CLN_EPS).sqrt());
        }

        let mut out = Vec::with_capacity(xv.len());
        for t in 0..nt {
            let (m, r) = (T::lit(means[t]), T::lit(rstd[t]));
            for (i, &v) in xv[t * row..(t + 1) * row].iter().enumerate() {
                let c = i % nc;
                out.push(gv[c] * (v - m) * r + bv[c]);
            }
        }

        Ok(self.push(
            Tensor::new(&s, out)?,
            &[x, gain, bias],
            Box::new(move |ctx| {
                let xv = ctx.inputs[0].data();
                let gv = ctx.inputs[1].data();
                let dy = ctx.grad;
                let mut dgain = vec![T::zero(); nc];
                let mut dbias = vec![T::zero(); nc];
                let mut dz = vec![0.0f64; row];
                let mut ds1 = vec![0.0f64; nt];
                let mut ds2 = vec![0.0f64; nt];
                let mut dx = ctx.needs[0].then(|| vec![T::zero(); xv.len()]);
                for t in 0..nt {
                    let (m, r) = (means[t], rstd[t]);
                    let (mut a, mut b) = (0.0f64, 0.0f64);
                    for i in 0..row {
                        let c = i % nc;
                        let idx = t * row + i;
                        let g = dy[idx].to_f64().unwrap_or(f64::NAN);
                        let centered = xv[idx].to_f64().unwrap_or(f64::NAN) - m;
                        dgain[c] += dy[idx] * T::lit(centered * r);
                        dbias[c] += dy[idx];
                        let d = g * gv[c].to_f64().unwrap_or(f64::NAN);
                        dz[i] = d;
                        a += d;
                        b += d * centered;
                    }
                    if let Some(dx) = dx.as_mut() {
                        for i in 0..row {
                            dx[t * row + i] = T::lit(dz[i] * r);
                        }
                    }
                    let n = ((t + 1) * row) as f64;
                    let mut dmean = -r * a;
                    if live[t] {
                        let dvar = -0.5 * b * r * r * r;
                        ds2[t] = dvar / n;
                        dmean -= 2.0 * m * dvar;
                    }
                    ds1[t] = dmean / n;
                }
                if let Some(dx) = dx.as_mut() {
                    let (mut r1, mut r2) = (0.0f64, 0.0f64);
                    for t in (0..nt).rev() {
                        r1 += ds1[t];
                        r2 += ds2[t];
                        for i in 0..row {
                            let idx = t * row + i;
                            let v = xv[idx].to_f64().unwrap_or(f64::NAN);
                            dx[idx] += T::lit(r1 + 2.0 * v * r2);
                        }
                    }
                }
                vec![
                    dx,
                    ctx.needs[1].then_some(dgain),
                    ctx.needs[2].then_some(dbias),
                ]
            }),
        ))
    }
}
