//! Fused LSTM layers.
//!
//! Gate layout along the `4H` axis is `[input, forget, cell, output]`. The
//! whole sequence is one tape node: the input projection runs as a single
//! matrix product, and backward replays the saved gate activations.

use crate::error::{dim_err, Result};
use crate::scalar::mm;
use crate::{Graph, Scalar, Tensor, Var};

/// Trainable tensors of one LSTM direction: `w_ih: [Din, 4H]`,
/// `w_hh: [H, 4H]`, `bias: [4H]`.
#[derive(Clone, Copy, Debug)]
pub struct LstmParams {
    pub w_ih: Var,
    pub w_hh: Var,
    pub bias: Var,
}

/// Hidden and cell state, each `[B, H]`.
#[derive(Clone, Copy, Debug)]
pub struct LstmState {
    pub h: Var,
    pub c: Var,
}

#[inline]
fn sigmoid<T: Scalar>(v: T) -> T {
    T::one() / (T::one() + (-v).exp())
}

/// Activates `gates` in place and writes the new cell state, `tanh(c)` and `h`.
fn cell_forward<T: Scalar>(
    gates: &mut [T],
    c_prev: Option<&[T]>,
    c: &mut [T],
    tanh_c: &mut [T],
    h: &mut [T],
    hidden: usize,
) {
    let rows = c.len() / hidden;
    for r in 0..rows {
        let g = &mut gates[r * 4 * hidden..(r + 1) * 4 * hidden];
        for j in 0..hidden {
            let i_g = sigmoid(g[j]);
            let f_g = sigmoid(g[hidden + j]);
            let c_g = g[2 * hidden + j].tanh();
            let o_g = sigmoid(g[3 * hidden + j]);
            g[j] = i_g;
            g[hidden + j] = f_g;
            g[2 * hidden + j] = c_g;
            g[3 * hidden + j] = o_g;
            let prev = c_prev.map_or(T::zero(), |cp| cp[r * hidden + j]);
            let cv = f_g * prev + i_g * c_g;
            let tc = cv.tanh();
            c[r * hidden + j] = cv;
            tanh_c[r * hidden + j] = tc;
            h[r * hidden + j] = o_g * tc;
        }
    }
}

/// Writes pre-activation gate gradients and the gradient w.r.t. `c_prev`.
/// `dc` holds the cell-state gradient arriving from the next step.
#[allow(clippy::too_many_arguments)]
fn cell_backward<T: Scalar>(
    gates: &[T],
    c_prev: Option<&[T]>,
    tanh_c: &[T],
    dh: &[T],
    dc: &[T],
    d_pre: &mut [T],
    dc_prev: &mut [T],
    hidden: usize,
) {
    let one = T::one();
    let rows = dh.len() / hidden;
    for r in 0..rows {
        let g = &gates[r * 4 * hidden..(r + 1) * 4 * hidden];
        let d = &mut d_pre[r * 4 * hidden..(r + 1) * 4 * hidden];
        for j in 0..hidden {
            let k = r * hidden + j;
            let (i_g, f_g, c_g, o_g) = (g[j], g[hidden + j], g[2 * hidden + j], g[3 * hidden + j]);
            let tc = tanh_c[k];
            let d_o = dh[k] * tc;
            let d_c = dh[k] * o_g * (one - tc * tc) + dc[k];
            let prev = c_prev.map_or(T::zero(), |cp| cp[k]);
            d[j] = d_c * c_g * i_g * (one - i_g);
            d[hidden + j] = d_c * prev * f_g * (one - f_g);
            d[2 * hidden + j] = d_c * i_g * (one - c_g * c_g);
            d[3 * hidden + j] = d_o * o_g * (one - o_g);
            dc_prev[k] = d_c * f_g;
        }
    }
}

impl<T: Scalar> Graph<T> {
    fn lstm_dims(&self, op: &'static str, din: usize, p: &LstmParams) -> Result<usize> {
        let (wi, wh, b) = (self.shape(p.w_ih), self.shape(p.w_hh), self.shape(p.bias));
        let h = wh.first().copied().unwrap_or(0);
        if h == 0 || wi != [din, 4 * h] || wh != [h, 4 * h] || b != [4 * h] {
            return dim_err(
                op,
                format!("Din {din}: w_ih {wi:?}, w_hh {wh:?}, bias {b:?}"),
            );
        }
        Ok(h)
    }

    fn check_state(&self, op: &'static str, s: &LstmState, b: usize, h: usize) -> Result<()> {
        if self.shape(s.h) != [b, h] || self.shape(s.c) != [b, h] {
            return dim_err(
                op,
                format!("state {:?}/{:?}, expected [{b}, {h}]", self.shape(s.h), self.shape(s.c)),
            );
        }
        Ok(())
    }

    /// One LSTM cell update on `x: [B, Din]`. Returns `(h', c')`.
    pub fn lstm_step(&mut self, x: Var, state: LstmState, p: &LstmParams) -> Result<(Var, Var)> {
        let xs = self.shape(x).to_vec();
        let &[b, din] = xs.as_slice() else {
            return dim_err("lstm_step", format!("x must be [B, Din], got {xs:?}"));
        };
        let hd = self.lstm_dims("lstm_step", din, p)?;
        self.check_state("lstm_step", &state, b, hd)?;
        let h0 = state.h;
        let c0 = state.c;
        // The sequence kernel keeps c internal, so the step is its own node with
        // [h', c'] laid side by side.
        let mut gates = vec![T::zero(); b * 4 * hd];
        for r in 0..b {
            gates[r * 4 * hd..(r + 1) * 4 * hd].copy_from_slice(self.value(p.bias).data());
        }
        mm::nn(b, din, 4 * hd, self.value(x).data(), self.value(p.w_ih).data(), T::one(), &mut gates);
        mm::nn(b, hd, 4 * hd, self.value(h0).data(), self.value(p.w_hh).data(), T::one(), &mut gates);
        let mut c = vec![T::zero(); b * hd];
        let mut tc = vec![T::zero(); b * hd];
        let mut h = vec![T::zero(); b * hd];
        cell_forward(&mut gates, Some(self.value(c0).data()), &mut c, &mut tc, &mut h, hd);
        let mut out = Vec::with_capacity(2 * b * hd);
        for r in 0..b {
            out.extend_from_slice(&h[r * hd..(r + 1) * hd]);
            out.extend_from_slice(&c[r * hd..(r + 1) * hd]);
        }
        let node = self.push(
            Tensor::new(&[b, 2 * hd], out)?,
            &[x, p.w_ih, p.w_hh, p.bias, h0, c0],
            Box::new(move |ctx| {
                let (xv, wi, wh) = (ctx.inputs[0].data(), ctx.inputs[1].data(), ctx.inputs[2].data());
                let (hv, cv) = (ctx.inputs[4].data(), ctx.inputs[5].data());
                let mut dh = vec![T::zero(); b * hd];
                let mut dc = vec![T::zero(); b * hd];
                for r in 0..b {
                    dh[r * hd..(r + 1) * hd].copy_from_slice(&ctx.grad[r * 2 * hd..r * 2 * hd + hd]);
                    dc[r * hd..(r + 1) * hd]
                        .copy_from_slice(&ctx.grad[r * 2 * hd + hd..(r + 1) * 2 * hd]);
                }
                let mut d_pre = vec![T::zero(); b * 4 * hd];
                let mut dc_prev = vec![T::zero(); b * hd];
                cell_backward(&gates, Some(cv), &tc, &dh, &dc, &mut d_pre, &mut dc_prev, hd);
                let dx = ctx.needs[0].then(|| {
                    let mut dx = vec![T::zero(); b * din];
                    mm::nt(b, 4 * hd, din, &d_pre, wi, T::zero(), &mut dx);
                    dx
                });
                let dwi = ctx.needs[1].then(|| {
                    let mut d = vec![T::zero(); din * 4 * hd];
                    mm::tn(din, b, 4 * hd, xv, &d_pre, T::zero(), &mut d);
                    d
                });
                let dwh = ctx.needs[2].then(|| {
                    let mut d = vec![T::zero(); hd * 4 * hd];
                    mm::tn(hd, b, 4 * hd, hv, &d_pre, T::zero(), &mut d);
                    d
                });
                let db = ctx.needs[3].then(|| column_sums(&d_pre, 4 * hd));
                let dh0 = ctx.needs[4].then(|| {
                    let mut d = vec![T::zero(); b * hd];
                    mm::nt(b, 4 * hd, hd, &d_pre, wh, T::zero(), &mut d);
                    d
                });
                vec![dx, dwi, dwh, db, dh0, ctx.needs[5].then_some(dc_prev)]
            }),
        );
        let h_out = self.slice_last(node, 0, hd)?;
        let c_out = self.slice_last(node, hd, hd)?;
        Ok((h_out, c_out))
    }

    /// Unrolls an LSTM over the leading axis of `x: [T, B, Din]`, returning
    /// the hidden sequence `[T, B, H]`. With `reverse` the recurrence runs from
    /// the last step to the first; outputs stay aligned with their inputs.
    /// Missing initial state means zeros.
    pub fn lstm_sequence(
        &mut self,
        x: Var,
        p: &LstmParams,
        init: Option<LstmState>,
        reverse: bool,
    ) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let &[nt, b, din] = xs.as_slice() else {
            return dim_err("lstm_sequence", format!("x must be [T, B, Din], got {xs:?}"));
        };
        let hd = self.lstm_dims("lstm_sequence", din, p)?;
        if let Some(s) = &init {
            self.check_state("lstm_sequence", s, b, hd)?;
        }
        let g4 = 4 * hd;
        let rows = nt * b;
        let mut gates = vec![T::zero(); rows * g4];
        let bias = self.value(p.bias).data();
        for r in 0..rows {
            gates[r * g4..(r + 1) * g4].copy_from_slice(bias);
        }
        mm::nn(rows, din, g4, self.value(x).data(), self.value(p.w_ih).data(), T::one(), &mut gates);

        let wh = self.value(p.w_hh).data();
        let h0 = init.map(|s| self.value(s.h).data().to_vec());
        let c0 = init.map(|s| self.value(s.c).data().to_vec());
        let step_count = b * hd;
        let mut c_all = vec![T::zero(); rows * hd];
        let mut tc_all = vec![T::zero(); rows * hd];
        let mut h_all = vec![T::zero(); rows * hd];
        let order: Vec<usize> = if reverse { (0..nt).rev().collect() } else { (0..nt).collect() };
        let mut h_prev = h0.clone();
        let mut c_prev = c0.clone();
        let mut c_cur = vec![T::zero(); step_count];
        for &t in &order {
            let span = t * step_count..(t + 1) * step_count;
            let g = &mut gates[t * b * g4..(t + 1) * b * g4];
            if let Some(hp) = &h_prev {
                mm::nn(b, hd, g4, hp, wh, T::one(), g);
            }
            cell_forward(
                g,
                c_prev.as_deref(),
                &mut c_cur,
                &mut tc_all[span.clone()],
                &mut h_all[span.clone()],
                hd,
            );
            c_all[span.clone()].copy_from_slice(&c_cur);
            h_prev.get_or_insert_with(|| vec![T::zero(); step_count]).copy_from_slice(&h_all[span]);
            c_prev.get_or_insert_with(|| vec![T::zero(); step_count]).copy_from_slice(&c_cur);
        }

        let mut parents = vec![x, p.w_ih, p.w_hh, p.bias];
        if let Some(s) = init {
            parents.push(s.h);
            parents.push(s.c);
        }
        Ok(self.push(
            Tensor::new(&[nt, b, hd], h_all)?,
            &parents,
            Box::new(move |ctx| {
                let (xv, wi, wh) = (ctx.inputs[0].data(), ctx.inputs[1].data(), ctx.inputs[2].data());
                let h_all = ctx.output.data();
                let h0 = ctx.inputs.get(4).map(|t| t.data());
                let c0 = ctx.inputs.get(5).map(|t| t.data());
                let mut d_pre = vec![T::zero(); rows * g4];
                let mut dh = vec![T::zero(); step_count];
                let mut dh_next = vec![T::zero(); step_count];
                let mut dc_next = vec![T::zero(); step_count];
                let mut dc_prev = vec![T::zero(); step_count];
                let mut dwh = vec![T::zero(); hd * g4];
                for s in (0..nt).rev() {
                    let t = order[s];
                    let prev_t = (s > 0).then(|| order[s - 1]);
                    let span = t * step_count..(t + 1) * step_count;
                    dh.iter_mut()
                        .zip(&ctx.grad[span.clone()])
                        .zip(&dh_next)
                        .for_each(|((d, &a), &b)| *d = a + b);
                    let c_prev = match prev_t {
                        Some(pt) => Some(&c_all[pt * step_count..(pt + 1) * step_count]),
                        None => c0,
                    };
                    let dp = &mut d_pre[t * b * g4..(t + 1) * b * g4];
                    cell_backward(
                        &gates[t * b * g4..(t + 1) * b * g4],
                        c_prev,
                        &tc_all[span],
                        &dh,
                        &dc_next,
                        dp,
                        &mut dc_prev,
                        hd,
                    );
                    std::mem::swap(&mut dc_next, &mut dc_prev);
                    mm::nt(b, g4, hd, dp, wh, T::zero(), &mut dh_next);
                    let h_prev = match prev_t {
                        Some(pt) => Some(&h_all[pt * step_count..(pt + 1) * step_count]),
                        None => h0,
                    };
                    if let Some(hp) = h_prev {
                        mm::tn(hd, b, g4, hp, dp, T::one(), &mut dwh);
                    }
                }
                let dx = ctx.needs[0].then(|| {
                    let mut dx = vec![T::zero(); rows * din];
                    mm::nt(rows, g4, din, &d_pre, wi, T::zero(), &mut dx);
                    dx
                });
                let dwi = ctx.needs[1].then(|| {
                    let mut d = vec![T::zero(); din * g4];
                    mm::tn(din, rows, g4, xv, &d_pre, T::zero(), &mut d);
                    d
                });
                let db = ctx.needs[3].then(|| column_sums(&d_pre, g4));
                let mut grads = vec![dx, dwi, ctx.needs[2].then_some(dwh), db];
                if ctx.inputs.len() == 6 {
                    grads.push(ctx.needs[4].then_some(dh_next));
                    grads.push(ctx.needs[5].then_some(dc_next));
                }
                grads
            }),
        ))
    }

    /// Bidirectional LSTM: forward and reversed passes concatenated on the
    /// feature axis, `[T, B, 2H]`.
    pub fn bilstm(&mut self, x: Var, fwd: &LstmParams, bwd: &LstmParams) -> Result<Var> {
        let f = self.lstm_sequence(x, fwd, None, false)?;
        let r = self.lstm_sequence(x, bwd, None, true)?;
        self.concat_last(f, r)
    }
}

fn column_sums<T: Scalar>(m: &[T], cols: usize) -> Vec<T> {
    let mut out = vec![T::zero(); cols];
    for row in m.chunks_exact(cols) {
        out.iter_mut().zip(row).for_each(|(a, &v)| *a += v);
    }
    out
}
