use crate::error::{AutogradError, Result};
use crate::{Scalar, Tensor};

/// Moment estimates of the Adam optimizer, one pair per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl<T: Scalar> AdamState<T> {
    /// Zero moments mirroring `params`, with β1 = 0.9, β2 = 0.999, ε = 1e-8.
    pub fn new(params: &[Tensor<T>]) -> Self {
        Self::with_hyper(params, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyper(params: &[Tensor<T>], beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            step: 0,
            beta1,
            beta2,
            eps,
        }
    }
}

/// One bias-corrected Adam step. Nothing is modified if any gradient is
/// non-finite or a shape disagrees.
pub fn adam_update<T: Scalar>(
    params: &mut [Tensor<T>],
    grads: &[Tensor<T>],
    state: &mut AdamState<T>,
    lr: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(AutogradError::Invalid(format!(
            "adam: {} params, {} grads, {} moments",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || p.shape() != state.m[i].shape() {
            return Err(AutogradError::Dimension {
                op: "adam_update",
                detail: format!("param {i}: {:?} vs grad {:?}", p.shape(), g.shape()),
            });
        }
        if !g.is_finite() {
            return Err(AutogradError::NonFinite { op: "adam_update" });
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let (b1t, b2t) = (T::lit(b1), T::lit(b2));
    let (one_b1, one_b2) = (T::lit(1.0 - b1), T::lit(1.0 - b2));
    let step = T::lit(lr / c1);
    let c2s = T::lit(c2.sqrt());
    let eps = T::lit(state.eps);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        for (((pv, &gv), mv), vv) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *mv = b1t * *mv + one_b1 * gv;
            *vv = b2t * *vv + one_b2 * gv * gv;
            // lr * m_hat / (sqrt(v_hat) + eps)
            *pv -= step * *mv / (vv.sqrt() / c2s + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut p = vec![Tensor::<f64>::from_f64(&[3], &[1.0, 1.0, 1.0]).unwrap()];
        let g = vec![Tensor::from_f64(&[3], &[2.5, -0.3, 40.0]).unwrap()];
        let mut st = AdamState::new(&p);
        adam_update(&mut p, &g, &mut st, 0.01).unwrap();
        let d = p[0].data();
        assert!((d[0] - 0.99).abs() < 1e-9);
        assert!((d[1] - 1.01).abs() < 1e-9);
        assert!((d[2] - 0.99).abs() < 1e-9);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn zero_gradient_is_noop() {
        let mut p = vec![Tensor::<f32>::from_f64(&[2], &[0.5, -2.0]).unwrap()];
        let before = p.clone();
        let g = vec![Tensor::zeros(&[2])];
        let mut st = AdamState::new(&p);
        adam_update(&mut p, &g, &mut st, 0.1).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn two_constant_steps_match_hand_recurrence() {
        let (lr, g) = (0.1, 0.5);
        let mut p = vec![Tensor::<f64>::scalar(1.0)];
        let grads = vec![Tensor::scalar(g)];
        let mut st = AdamState::new(&p);
        adam_update(&mut p, &grads, &mut st, lr).unwrap();
        adam_update(&mut p, &grads, &mut st, lr).unwrap();
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8f64);
        let mut theta = 1.0;
        let (mut m, mut v) = (0.0, 0.0);
        for t in 1..=2 {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t));
            let vh = v / (1.0 - b2.powi(t));
            theta -= lr * mh / (vh.sqrt() + eps);
        }
        assert!((p[0].data()[0] - theta).abs() < 1e-12);
        assert!(st.v[0].data()[0] >= 0.0);
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut p = vec![Tensor::<f64>::scalar(1.0)];
        let g = vec![Tensor::scalar(f64::INFINITY)];
        let mut st = AdamState::new(&p);
        assert!(adam_update(&mut p, &g, &mut st, 0.1).is_err());
        assert_eq!(p[0].data()[0], 1.0);
        assert_eq!(st.step, 0);
    }
}
