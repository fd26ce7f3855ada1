//! Central finite-difference checks of analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{AutogradError, Result};
use crate::{Graph, Tensor, Var};

/// Default central-difference step.
pub const GRAD_CHECK_EPS: f64 = 1e-5;

/// Relative discrepancy between two derivative estimates.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-12)
}

/// Max relative error of d f / d x over every coordinate of `x`.
pub fn grad_check<F>(f: F, x: &Tensor<f64>, eps: f64) -> Result<f64>
where
    F: Fn(&mut Graph<f64>, Var) -> Result<Var>,
{
    grad_check_inputs(
        |g, vars| f(g, vars[0]),
        std::slice::from_ref(x),
        eps,
        None,
    )
}

/// Like [`grad_check`] for several inputs at once. With `sample = Some((n, seed))`
/// only `n` coordinates, drawn uniformly across all inputs, are perturbed.
pub fn grad_check_inputs<F>(
    f: F,
    inputs: &[Tensor<f64>],
    eps: f64,
    sample_coords: Option<(usize, u64)>,
) -> Result<f64>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let eval = |vals: &[Tensor<f64>], with_grad: bool| -> Result<(f64, Vec<Tensor<f64>>)> {
        let mut g = Graph::new();
        let vars: Vec<Var> = vals
            .iter()
            .map(|t| if with_grad { g.leaf(t.clone()) } else { g.constant(t.clone()) })
            .collect();
        let out = f(&mut g, &vars)?;
        let value = g.value(out).data()[0];
        if !with_grad {
            return Ok((value, Vec::new()));
        }
        let mut grads = g.backward(out)?;
        let gs = vars
            .iter()
            .zip(vals)
            .map(|(&v, t)| grads.take_or_zeros(v, t.shape()))
            .collect();
        Ok((value, gs))
    };

    let (_, analytic) = eval(inputs, true)?;
    let total: usize = inputs.iter().map(|t| t.numel()).sum();
    if total == 0 {
        return Err(AutogradError::Invalid("grad_check on empty input".into()));
    }
    let coords: Vec<usize> = match sample_coords {
        Some((n, seed)) if n < total => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut c = sample(&mut rng, total, n).into_vec();
            c.sort_unstable();
            c
        }
        _ => (0..total).collect(),
    };

    let mut vals = inputs.to_vec();
    let mut worst = 0.0f64;
    for flat in coords {
        let (mut which, mut idx) = (0, flat);
        while idx >= vals[which].numel() {
            idx -= vals[which].numel();
            which += 1;
        }
        let orig = vals[which].data()[idx];
        vals[which].data_mut()[idx] = orig + eps;
        let (plus, _) = eval(&vals, false)?;
        vals[which].data_mut()[idx] = orig - eps;
        let (minus, _) = eval(&vals, false)?;
        vals[which].data_mut()[idx] = orig;
        let numeric = (plus - minus) / (2.0 * eps);
        worst = worst.max(relative_error(analytic[which].data()[idx], numeric));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_is_exact() {
        let x = Tensor::from_f64(&[4], &[0.1, -2.0, 3.0, 7.5]).unwrap();
        let err = grad_check(|g, v| Ok(g.sum(v)), &x, GRAD_CHECK_EPS).unwrap();
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn sum_of_squares() {
        let x = Tensor::from_f64(&[2], &[1.0, 2.0]).unwrap();
        let mut g = Graph::new();
        let v = g.leaf(x.clone());
        let sq = g.square(v);
        let s = g.sum(sq);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(v).unwrap().data(), &[2.0, 4.0]);
        let err = grad_check(
            |g, v| {
                let sq = g.square(v);
                Ok(g.sum(sq))
            },
            &x,
            GRAD_CHECK_EPS,
        )
        .unwrap();
        assert!(err <= 1e-8, "{err}");
    }
}
