use crate::error::{dim_err, Result};
use crate::{Graph, Scalar, Tensor, Var};

impl<T: Scalar> Graph<T> {
    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return dim_err(
                op,
                format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            );
        }
        Ok(())
    }

    /// Shape-exact elementwise sum. No broadcasting.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let va = self.value(a);
        let vb = self.value(b);
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| x + y).collect();
        let out = Tensor::new(va.shape(), data)?;
        Ok(self.push(
            out,
            &[a, b],
            Box::new(|ctx| {
                vec![
                    ctx.needs[0].then(|| ctx.grad.to_vec()),
                    ctx.needs[1].then(|| ctx.grad.to_vec()),
                ]
            }),
        ))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let va = self.value(a);
        let vb = self.value(b);
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| x - y).collect();
        let out = Tensor::new(va.shape(), data)?;
        Ok(self.push(
            out,
            &[a, b],
            Box::new(|ctx| {
                vec![
                    ctx.needs[0].then(|| ctx.grad.to_vec()),
                    ctx.needs[1].then(|| ctx.grad.iter().map(|&g| -g).collect()),
                ]
            }),
        ))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let va = self.value(a);
        let vb = self.value(b);
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| x * y).collect();
        let out = Tensor::new(va.shape(), data)?;
        Ok(self.push(
            out,
            &[a, b],
            Box::new(|ctx| {
                let (x, y) = (ctx.inputs[0].data(), ctx.inputs[1].data());
                vec![
                    ctx.needs[0].then(|| ctx.grad.iter().zip(y).map(|(&g, &v)| g * v).collect()),
                    ctx.needs[1].then(|| ctx.grad.iter().zip(x).map(|(&g, &v)| g * v).collect()),
                ]
            }),
        ))
    }

    pub fn scale(&mut self, x: Var, factor: T) -> Var {
        let out = self.value(x).map(|v| v * factor);
        self.push(
            out,
            &[x],
            Box::new(move |ctx| vec![Some(ctx.grad.iter().map(|&g| g * factor).collect())]),
        )
    }

    pub fn square(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| v * v);
        self.push(
            out,
            &[x],
            Box::new(|ctx| {
                let two = T::lit(2.0);
                vec![Some(
                    ctx.grad
                        .iter()
                        .zip(ctx.inputs[0].data())
                        .map(|(&g, &v)| two * g * v)
                        .collect(),
                )]
            }),
        )
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| v.tanh());
        self.push(
            out,
            &[x],
            Box::new(|ctx| {
                vec![Some(
                    ctx.grad
                        .iter()
                        .zip(ctx.output.data())
                        .map(|(&g, &y)| g * (T::one() - y * y))
                        .collect(),
                )]
            }),
        )
    }

    /// Sum of all elements as a one-element tensor.
    pub fn sum(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let n = v.numel();
        let out = Tensor::scalar(v.sum());
        self.push(out, &[x], Box::new(move |ctx| vec![Some(vec![ctx.grad[0]; n])]))
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let n = self.value(x).numel().max(1);
        let s = self.sum(x);
        self.scale(s, T::one() / T::lit(n as f64))
    }

    /// Mean squared difference against a constant target.
    pub fn mse(&mut self, pred: Var, target: &Tensor<T>) -> Result<Var> {
        if self.shape(pred) != target.shape() {
            return dim_err(
                "mse",
                format!("{:?} vs {:?}", self.shape(pred), target.shape()),
            );
        }
        let p = self.value(pred);
        let n = T::lit(p.numel().max(1) as f64);
        let diff: Vec<T> = p.data().iter().zip(target.data()).map(|(&a, &b)| a - b).collect();
        let loss = diff.iter().map(|&d| d * d).sum::<T>() / n;
        Ok(self.push(
            Tensor::scalar(loss),
            &[pred],
            Box::new(move |ctx| {
                let k = T::lit(2.0) * ctx.grad[0] / n;
                vec![Some(diff.iter().map(|&d| k * d).collect())]
            }),
        ))
    }

    /// Weighted sum `Σ w_i x_i` against constant weights; a convenient random
    /// projection for gradient checks.
    pub fn dot_const(&mut self, x: Var, weights: &Tensor<T>) -> Result<Var> {
        if self.value(x).numel() != weights.numel() {
            return dim_err(
                "dot_const",
                format!("{:?} vs {:?}", self.shape(x), weights.shape()),
            );
        }
        let s = self
            .value(x)
            .data()
            .iter()
            .zip(weights.data())
            .map(|(&a, &b)| a * b)
            .sum();
        let w = weights.data().to_vec();
        Ok(self.push(
            Tensor::scalar(s),
            &[x],
            Box::new(move |ctx| vec![Some(w.iter().map(|&v| v * ctx.grad[0]).collect())]),
        ))
    }
}
