use crate::error::{dim_err, Result};
use crate::{Graph, Scalar, Tensor, Var};

fn permute3_data<T: Copy>(src: &[T], dims: [usize; 3], perm: [usize; 3]) -> (Vec<T>, [usize; 3]) {
    let out_dims = [dims[perm[0]], dims[perm[1]], dims[perm[2]]];
    let in_strides = [dims[1] * dims[2], dims[2], 1];
    let s = [in_strides[perm[0]], in_strides[perm[1]], in_strides[perm[2]]];
    let mut out = Vec::with_capacity(src.len());
    for i in 0..out_dims[0] {
        for j in 0..out_dims[1] {
            let base = i * s[0] + j * s[1];
            for k in 0..out_dims[2] {
                out.push(src[base + k * s[2]]);
            }
        }
    }
    (out, out_dims)
}

fn three(op: &'static str, shape: &[usize]) -> Result<[usize; 3]> {
    match shape {
        &[a, b, c] => Ok([a, b, c]),
        s => dim_err(op, format!("expected a 3-axis tensor, got {s:?}")),
    }
}

impl<T: Scalar> Graph<T> {
    /// Axis permutation of a 3-axis tensor: output axis `i` is input axis `perm[i]`.
    pub fn permute3(&mut self, x: Var, perm: [usize; 3]) -> Result<Var> {
        let dims = three("permute3", self.shape(x))?;
        let mut seen = [false; 3];
        for &p in &perm {
            if p > 2 || seen[p] {
                return dim_err("permute3", format!("invalid permutation {perm:?}"));
            }
            seen[p] = true;
        }
        let (data, out_dims) = permute3_data(self.value(x).data(), dims, perm);
        let mut inv = [0; 3];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        Ok(self.push(
            Tensor::new(&out_dims, data)?,
            &[x],
            Box::new(move |ctx| vec![Some(permute3_data(ctx.grad, out_dims, inv).0)]),
        ))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(x).clone().reshape(shape)?;
        Ok(self.push(out, &[x], Box::new(|ctx| vec![Some(ctx.grad.to_vec())])))
    }

    /// Concatenation along the last axis; leading axes must agree.
    pub fn concat_last(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != sb.len() || sa.is_empty() || sa[..sa.len() - 1] != sb[..sb.len() - 1] {
            return dim_err("concat_last", format!("{sa:?} vs {sb:?}"));
        }
        let (ca, cb) = (*sa.last().unwrap(), *sb.last().unwrap());
        let rows = self.value(a).numel() / ca.max(1);
        let (da, db) = (self.value(a).data(), self.value(b).data());
        let mut data = Vec::with_capacity(da.len() + db.len());
        for r in 0..rows {
            data.extend_from_slice(&da[r * ca..(r + 1) * ca]);
            data.extend_from_slice(&db[r * cb..(r + 1) * cb]);
        }
        let mut shape = sa.clone();
        *shape.last_mut().unwrap() = ca + cb;
        Ok(self.push(
            Tensor::new(&shape, data)?,
            &[a, b],
            Box::new(move |ctx| {
                let c = ca + cb;
                let ga = ctx.needs[0].then(|| {
                    (0..rows)
                        .flat_map(|r| ctx.grad[r * c..r * c + ca].iter().copied())
                        .collect()
                });
                let gb = ctx.needs[1].then(|| {
                    (0..rows)
                        .flat_map(|r| ctx.grad[r * c + ca..(r + 1) * c].iter().copied())
                        .collect()
                });
                vec![ga, gb]
            }),
        ))
    }

    /// Slice `[start, start + len)` of the last axis.
    pub fn slice_last(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let s = self.shape(x).to_vec();
        let Some(&c) = s.last() else {
            return dim_err("slice_last", "scalar input");
        };
        if start + len > c {
            return dim_err("slice_last", format!("[{start}, {}) exceeds {c}", start + len));
        }
        let rows = self.value(x).numel() / c.max(1);
        let d = self.value(x).data();
        let data = (0..rows)
            .flat_map(|r| d[r * c + start..r * c + start + len].iter().copied())
            .collect();
        let mut shape = s;
        *shape.last_mut().unwrap() = len;
        Ok(self.push(
            Tensor::new(&shape, data)?,
            &[x],
            Box::new(move |ctx| {
                let mut g = vec![T::zero(); rows * c];
                for r in 0..rows {
                    g[r * c + start..r * c + start + len]
                        .copy_from_slice(&ctx.grad[r * len..(r + 1) * len]);
                }
                vec![Some(g)]
            }),
        ))
    }

    /// Reverses the order of the leading axis.
    pub fn reverse_axis0(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x).to_vec();
        let Some(&t) = s.first() else {
            return dim_err("reverse_axis0", "scalar input");
        };
        let row = self.value(x).numel() / t.max(1);
        let rev = |src: &[T]| -> Vec<T> {
            (0..t)
                .rev()
                .flat_map(|i| src[i * row..(i + 1) * row].iter().copied())
                .collect()
        };
        let data = rev(self.value(x).data());
        Ok(self.push(
            Tensor::new(&s, data)?,
            &[x],
            Box::new(move |ctx| {
                let g = (0..t)
                    .rev()
                    .flat_map(|i| ctx.grad[i * row..(i + 1) * row].iter().copied())
                    .collect();
                vec![Some(g)]
            }),
        ))
    }

    /// Non-overlapping mean pool over the leading axis by `factor`; a trailing
    /// partial group is dropped.
    pub fn mean_pool_axis0(&mut self, x: Var, factor: usize) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.is_empty() || factor == 0 || s[0] < factor {
            return dim_err(
                "mean_pool_axis0",
                format!("cannot pool {s:?} by {factor}"),
            );
        }
        let groups = s[0] / factor;
        let row = self.value(x).numel() / s[0];
        let inv = T::one() / T::lit(factor as f64);
        let d = self.value(x).data();
        let mut data = vec![T::zero(); groups * row];
        for gi in 0..groups {
            let dst = &mut data[gi * row..(gi + 1) * row];
            for f in 0..factor {
                let src = &d[(gi * factor + f) * row..(gi * factor + f + 1) * row];
                dst.iter_mut().zip(src).for_each(|(a, &b)| *a += b);
            }
            dst.iter_mut().for_each(|a| *a *= inv);
        }
        let mut shape = s.clone();
        shape[0] = groups;
        let total = s[0];
        Ok(self.push(
            Tensor::new(&shape, data)?,
            &[x],
            Box::new(move |ctx| {
                let mut g = vec![T::zero(); total * row];
                for gi in 0..groups {
                    for f in 0..factor {
                        let t = gi * factor + f;
                        g[t * row..(t + 1) * row]
                            .iter_mut()
                            .zip(&ctx.grad[gi * row..(gi + 1) * row])
                            .for_each(|(a, &b)| *a = b * inv);
                    }
                }
                vec![Some(g)]
            }),
        ))
    }
}

#[cfg(test)]
mod tests {
    use crate::{Graph, Tensor};

    #[test]
    fn permute_round_trip() {
        let mut g = Graph::<f64>::new();
        let data: Vec<f64> = (0..24).map(f64::from).collect();
        let x = g.constant(Tensor::new(&[2, 3, 4], data.clone()).unwrap());
        let y = g.permute3(x, [2, 0, 1]).unwrap();
        assert_eq!(g.shape(y), &[4, 2, 3]);
        // y[k, i, j] = x[i, j, k]
        assert_eq!(g.value(y).data()[1 * 6 + 1 * 3 + 2], data[1 * 12 + 2 * 4 + 1]);
        let z = g.permute3(y, [1, 2, 0]).unwrap();
        assert_eq!(g.value(z).data(), &data[..]);
    }

    #[test]
    fn pool_drops_partial_group() {
        let mut g = Graph::<f64>::new();
        let x = g.constant(Tensor::from_f64(&[5, 1], &[1.0, 3.0, 5.0, 7.0, 100.0]).unwrap());
        let y = g.mean_pool_axis0(x, 2).unwrap();
        assert_eq!(g.value(y).data(), &[2.0, 6.0]);
        assert!(g.mean_pool_axis0(x, 6).is_err());
    }
}
