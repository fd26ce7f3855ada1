//! Permutation-invariant MSE over source slots.
//!
//! Estimates and targets share the real layout `[chunk, k, 2·pairs·Q]` with
//! channel `(pair·Q + slot)·2 + re/im`. For a permutation `perm`, estimate
//! slot `q` is compared with target slot `perm[q]`. The permuted target is
//! materialized and the squared error summed in estimate order, so relabelling
//! the target slots leaves the minimum bit-identical.

use funssl_autograd::{Graph, Scalar, Tensor, Var};

use crate::error::{Error, Result};

/// All permutations of `0..n` in lexicographic order (identity first).
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut cur: Vec<usize> = (0..n).collect();
    let mut out = vec![cur.clone()];
    loop {
        let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else {
            return out;
        };
        let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).expect("successor exists");
        cur.swap(i - 1, j);
        cur[i..].reverse();
        out.push(cur.clone());
    }
}

fn check_layout(pred: &[usize], target: &[usize], n_slots: usize) -> Result<()> {
    if pred != target {
        return Err(Error::Dimension(format!(
            "estimate {pred:?} and target {target:?} differ"
        )));
    }
    let ch = pred.last().copied().unwrap_or(0);
    if n_slots == 0 || ch % (2 * n_slots) != 0 {
        return Err(Error::Dimension(format!(
            "{ch} channels do not split into {n_slots} complex slots"
        )));
    }
    Ok(())
}

/// Target with slot `perm[q]` moved into slot `q`.
pub fn permute_slots<T: Scalar>(target: &Tensor<T>, n_slots: usize, perm: &[usize]) -> Tensor<T> {
    let ch = *target.shape().last().expect("non-scalar target");
    let pairs = ch / (2 * n_slots);
    let src = target.data();
    let mut out = vec![T::zero(); src.len()];
    for (orow, irow) in out.chunks_exact_mut(ch).zip(src.chunks_exact(ch)) {
        for p in 0..pairs {
            for (q, &from) in perm.iter().enumerate() {
                let o = (p * n_slots + q) * 2;
                let i = (p * n_slots + from) * 2;
                orow[o..o + 2].copy_from_slice(&irow[i..i + 2]);
            }
        }
    }
    Tensor::new(target.shape(), out).expect("same shape")
}

fn mse<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = T::lit(a.len().max(1) as f64);
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<T>() / n
}

/// Minimum MSE over slot permutations and the permutation attaining it
/// (the lexicographically first on ties).
pub fn pit_mse_value<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>, n_slots: usize) -> Result<(T, Vec<usize>)> {
    check_layout(pred.shape(), target.shape(), n_slots)?;
    let mut best: Option<(T, Vec<usize>)> = None;
    for perm in permutations(n_slots) {
        let t = permute_slots(target, n_slots, &perm);
        let l = mse(pred.data(), t.data());
        if best.as_ref().is_none_or(|(b, _)| l < *b) {
            best = Some((l, perm));
        }
    }
    Ok(best.expect("at least one permutation"))
}

/// PIT-MSE recorded on `g`. The selected permutation is held fixed for the
/// backward pass, which is the exact gradient away from ties.
pub fn pit_mse<T: Scalar>(g: &mut Graph<T>, pred: Var, target: &Tensor<T>, n_slots: usize) -> Result<(Var, Vec<usize>)> {
    let (_, perm) = pit_mse_value(g.value(pred), target, n_slots)?;
    let permuted = permute_slots(target, n_slots, &perm);
    Ok((g.mse(pred, &permuted)?, perm))
}
