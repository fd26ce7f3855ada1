//! Depth-wise 2D convolution and its transpose over `[C, A1, A2]` tensors.
//!
//! Both primitives share one index map: a coarse position `o` and kernel tap
//! `k` touch fine position `i = o * s + k - p` along each axis. The forward
//! convolution gathers fine into coarse; the transposed one scatters coarse
//! into fine. Each is the other's vector-Jacobian product.

use crate::error::{dim_err, Result};
use crate::{Graph, Scalar, Tensor, Var};

/// Zero padding applied before the first and after the last element of each axis.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Padding {
    pub before: [usize; 2],
    pub after: [usize; 2],
}

impl Padding {
    pub fn none() -> Self {
        Self::default()
    }
}

/// Output extent of a strided correlation, `None` if the kernel does not fit.
pub fn conv_out_extent(input: usize, kernel: usize, stride: usize, before: usize, after: usize) -> Option<usize> {
    let padded = input + before + after;
    (stride > 0 && padded >= kernel).then(|| (padded - kernel) / stride + 1)
}

#[derive(Clone, Copy)]
struct Geometry {
    channels: usize,
    fine: [usize; 2],
    coarse: [usize; 2],
    kernel: [usize; 2],
    stride: [usize; 2],
    offset: [usize; 2],
}

impl Geometry {
    /// Calls `f(fine_index, coarse_index, kernel_index)` for every valid triple.
    #[inline]
    fn for_each(&self, mut f: impl FnMut(usize, usize, usize)) {
        let [a1, a2] = self.fine;
        let [o1n, o2n] = self.coarse;
        let [k1n, k2n] = self.kernel;
        let [s1, s2] = self.stride;
        let [p1, p2] = self.offset;
        for c in 0..self.channels {
            let fbase = c * a1 * a2;
            let cbase = c * o1n * o2n;
            let kbase = c * k1n * k2n;
            for o1 in 0..o1n {
                for k1 in 0..k1n {
                    let Some(i1) = (o1 * s1 + k1).checked_sub(p1).filter(|&i| i < a1) else {
                        continue;
                    };
                    for o2 in 0..o2n {
                        let start = o2 * s2;
                        for k2 in 0..k2n {
                            let Some(i2) = (start + k2).checked_sub(p2).filter(|&i| i < a2) else {
                                continue;
                            };
                            f(
                                fbase + i1 * a2 + i2,
                                cbase + o1 * o2n + o2,
                                kbase + k1 * k2n + k2,
                            );
                        }
                    }
                }
            }
        }
    }

    fn gather<T: Scalar>(&self, fine: &[T], kernel: &[T], coarse: &mut [T]) {
        self.for_each(|i, o, k| coarse[o] += kernel[k] * fine[i]);
    }

    fn scatter<T: Scalar>(&self, coarse: &[T], kernel: &[T], fine: &mut [T]) {
        self.for_each(|i, o, k| fine[i] += kernel[k] * coarse[o]);
    }

    fn kernel_grad<T: Scalar>(&self, fine: &[T], coarse: &[T]) -> Vec<T> {
        let mut dk = vec![T::zero(); self.channels * self.kernel[0] * self.kernel[1]];
        self.for_each(|i, o, k| dk[k] += fine[i] * coarse[o]);
        dk
    }

    fn fine_len(&self) -> usize {
        self.channels * self.fine[0] * self.fine[1]
    }
}

fn channel_sums<T: Scalar>(g: &[T], channels: usize) -> Vec<T> {
    let per = g.len() / channels.max(1);
    (0..channels)
        .map(|c| g[c * per..(c + 1) * per].iter().copied().sum())
        .collect()
}

fn add_bias<T: Scalar>(data: &mut [T], bias: &[T]) {
    let per = data.len() / bias.len().max(1);
    for (c, &b) in bias.iter().enumerate() {
        data[c * per..(c + 1) * per].iter_mut().for_each(|v| *v += b);
    }
}

impl<T: Scalar> Graph<T> {
    fn check_depthwise(
        &self,
        op: &'static str,
        x: Var,
        kernel: Var,
        bias: Option<Var>,
        stride: [usize; 2],
    ) -> Result<([usize; 3], [usize; 2])> {
        let (xs, ks) = (self.shape(x), self.shape(kernel));
        let (&[c, a1, a2], &[kc, k1, k2]) = (xs, ks) else {
            return dim_err(op, format!("x {xs:?} and kernel {ks:?} must be 3-D"));
        };
        if kc != c {
            return dim_err(op, format!("{kc} kernel slices for {c} channels"));
        }
        if stride.contains(&0) {
            return dim_err(op, "zero stride");
        }
        if let Some(b) = bias {
            if self.shape(b) != [c] {
                return dim_err(op, format!("bias {:?} for {c} channels", self.shape(b)));
            }
        }
        Ok(([c, a1, a2], [k1, k2]))
    }

    /// Per-channel strided cross-correlation with zero padding.
    pub fn depthwise_conv2d(
        &mut self,
        x: Var,
        kernel: Var,
        bias: Option<Var>,
        stride: [usize; 2],
        padding: Padding,
    ) -> Result<Var> {
        let ([c, a1, a2], [k1, k2]) = self.check_depthwise("depthwise_conv2d", x, kernel, bias, stride)?;
        let o1 = conv_out_extent(a1, k1, stride[0], padding.before[0], padding.after[0]);
        let o2 = conv_out_extent(a2, k2, stride[1], padding.before[1], padding.after[1]);
        let (Some(o1), Some(o2)) = (o1, o2) else {
            return dim_err(
                "depthwise_conv2d",
                format!("kernel ({k1}, {k2}) larger than padded input ({a1}, {a2}) with {padding:?}"),
            );
        };
        let geo = Geometry {
            channels: c,
            fine: [a1, a2],
            coarse: [o1, o2],
            kernel: [k1, k2],
            stride,
            offset: padding.before,
        };
        let mut out = vec![T::zero(); c * o1 * o2];
        geo.gather(self.value(x).data(), self.value(kernel).data(), &mut out);
        if let Some(b) = bias {
            add_bias(&mut out, self.value(b).data());
        }
        let mut parents = vec![x, kernel];
        parents.extend(bias);
        Ok(self.push(
            Tensor::new(&[c, o1, o2], out)?,
            &parents,
            Box::new(move |ctx| {
                let (xv, kv) = (ctx.inputs[0].data(), ctx.inputs[1].data());
                let dx = ctx.needs[0].then(|| {
                    let mut dx = vec![T::zero(); geo.fine_len()];
                    geo.scatter(ctx.grad, kv, &mut dx);
                    dx
                });
                let dk = ctx.needs[1].then(|| geo.kernel_grad(xv, ctx.grad));
                let mut grads = vec![dx, dk];
                if ctx.inputs.len() == 3 {
                    grads.push(ctx.needs[2].then(|| channel_sums(ctx.grad, c)));
                }
                grads
            }),
        ))
    }

    /// Per-channel transposed convolution, the adjoint of
    /// [`depthwise_conv2d`](Self::depthwise_conv2d) with leading padding `crop_front`.
    ///
    /// The natural output `(B - 1) * s + K` is cropped by `crop_front` at the
    /// start of each axis and trimmed at the trailing edge to `target`.
    pub fn depthwise_transposed_conv2d(
        &mut self,
        x: Var,
        kernel: Var,
        bias: Option<Var>,
        stride: [usize; 2],
        crop_front: [usize; 2],
        target: [usize; 2],
    ) -> Result<Var> {
        let ([c, b1, b2], [k1, k2]) =
            self.check_depthwise("depthwise_transposed_conv2d", x, kernel, bias, stride)?;
        for axis in 0..2 {
            let b = [b1, b2][axis];
            let natural = (b.max(1) - 1) * stride[axis] + [k1, k2][axis];
            if b == 0 || natural < crop_front[axis] + target[axis] {
                return dim_err(
                    "depthwise_transposed_conv2d",
                    format!(
                        "axis {axis}: natural extent {natural} minus crop {} is smaller than target {}",
                        crop_front[axis], target[axis]
                    ),
                );
            }
        }
        let geo = Geometry {
            channels: c,
            fine: target,
            coarse: [b1, b2],
            kernel: [k1, k2],
            stride,
            offset: crop_front,
        };
        let mut out = vec![T::zero(); geo.fine_len()];
        geo.scatter(self.value(x).data(), self.value(kernel).data(), &mut out);
        if let Some(b) = bias {
            add_bias(&mut out, self.value(b).data());
        }
        let mut parents = vec![x, kernel];
        parents.extend(bias);
        Ok(self.push(
            Tensor::new(&[c, target[0], target[1]], out)?,
            &parents,
            Box::new(move |ctx| {
                let (xv, kv) = (ctx.inputs[0].data(), ctx.inputs[1].data());
                let dx = ctx.needs[0].then(|| {
                    let mut dx = vec![T::zero(); c * b1 * b2];
                    geo.gather(ctx.grad, kv, &mut dx);
                    dx
                });
                let dk = ctx.needs[1].then(|| geo.kernel_grad(ctx.grad, xv));
                let mut grads = vec![dx, dk];
                if ctx.inputs.len() == 3 {
                    grads.push(ctx.needs[2].then(|| channel_sums(ctx.grad, c)));
                }
                grads
            }),
        ))
    }
}
