use crate::error::{dim_err, Result};
use crate::{Graph, Scalar, Tensor, Var};

impl<T: Scalar> Graph<T> {
    /// Parametric ReLU. `slope` holds one value or one per channel of the last axis.
    pub fn prelu(&mut self, x: Var, slope: Var) -> Result<Var> {
        let c = *self.shape(x).last().unwrap_or(&1);
        let ns = self.value(slope).numel();
        if ns != 1 && ns != c {
            return dim_err("prelu", format!("{ns} slopes for {c} channels"));
        }
        let a = self.value(slope).data().to_vec();
        let xv = self.value(x);
        let data = xv
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                if v >= T::zero() {
                    v
                } else {
                    a[if ns == 1 { 0 } else { i % c }] * v
                }
            })
            .collect();
        let out = Tensor::new(xv.shape(), data)?;
        Ok(self.push(
            out,
            &[x, slope],
            Box::new(move |ctx| {
                let xv = ctx.inputs[0].data();
                let a = ctx.inputs[1].data();
                let ch = |i: usize| if ns == 1 { 0 } else { i % c };
                let dx = ctx.needs[0].then(|| {
                    xv.iter()
                        .zip(ctx.grad)
                        .enumerate()
                        .map(|(i, (&v, &g))| if v >= T::zero() { g } else { a[ch(i)] * g })
                        .collect()
                });
                let da = ctx.needs[1].then(|| {
                    let mut da = vec![T::zero(); ns];
                    for (i, (&v, &g)) in xv.iter().zip(ctx.grad).enumerate() {
                        if v < T::zero() {
                            da[ch(i)] += g * v;
                        }
                    }
                    da
                });
                vec![dx, da]
            }),
        ))
    }
}

#[cfg(test)]
mod tests {
    use crate::{Graph, Tensor};

    fn run(a: f64, x: &[f64]) -> Vec<f64> {
        let mut g = Graph::<f64>::new();
        let xv = g.constant(Tensor::from_f64(&[x.len()], x).unwrap());
        let av = g.constant(Tensor::scalar(a));
        let y = g.prelu(xv, av).unwrap();
        g.value(y).data().to_vec()
    }

    #[test]
    fn definition() {
        assert_eq!(run(0.25, &[-2.0]), vec![-0.5]);
        assert_eq!(run(0.25, &[3.0]), vec![3.0]);
        let xs = [-3.0, -0.1, 0.0, 2.5];
        assert_eq!(run(1.0, &xs), xs.to_vec());
    }

    #[test]
    fn per_channel_slopes() {
        let mut g = Graph::<f64>::new();
        let x = g.constant(Tensor::from_f64(&[2, 2], &[-1.0, -1.0, -2.0, 2.0]).unwrap());
        let a = g.constant(Tensor::from_f64(&[2], &[0.1, 0.5]).unwrap());
        let y = g.prelu(x, a).unwrap();
        assert_eq!(g.value(y).data(), &[-0.1, -0.5, -0.2, 2.0]);
        let bad = g.constant(Tensor::zeros(&[3]));
        assert!(g.prelu(x, bad).is_err());
    }
}
