use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point element type of a [`Tensor`](crate::Tensor).
///
/// `f32` is used for training and inference, `f64` for gradient checks.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + 'static
{
    /// Row/column strided general matrix multiply,
    /// `C <- alpha * A B + beta * C` with `A: m x k`, `B: k x n`.
    #[allow(clippy::too_many_arguments)]
    fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        a_strides: (isize, isize),
        b: &[Self],
        b_strides: (isize, isize),
        beta: Self,
        c: &mut [Self],
        c_strides: (isize, isize),
    );

    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable")
    }
}

fn check_extent(len: usize, rows: usize, cols: usize, rs: isize, cs: isize) {
    if rows == 0 || cols == 0 {
        return;
    }
    let last = (rows as isize - 1) * rs + (cols as isize - 1) * cs;
    assert!(rs >= 0 && cs >= 0 && (last as usize) < len, "gemm operand out of bounds");
}

macro_rules! impl_scalar {
    ($t:ty, $gemm:path) => {
        impl Scalar for $t {
            fn gemm_raw(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                a_strides: (isize, isize),
                b: &[Self],
                b_strides: (isize, isize),
                beta: Self,
                c: &mut [Self],
                c_strides: (isize, isize),
            ) {
                if m == 0 || n == 0 {
                    return;
                }
                check_extent(a.len(), m, k, a_strides.0, a_strides.1);
                check_extent(b.len(), k, n, b_strides.0, b_strides.1);
                check_extent(c.len(), m, n, c_strides.0, c_strides.1);
                // SAFETY: every operand's strided extent was checked against its slice length.
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        a_strides.0,
                        a_strides.1,
                        b.as_ptr(),
                        b_strides.0,
                        b_strides.1,
                        beta,
                        c.as_mut_ptr(),
                        c_strides.0,
                        c_strides.1,
                    );
                }
            }
        }
    };
}

impl_scalar!(f32, matrixmultiply::sgemm);
impl_scalar!(f64, matrixmultiply::dgemm);

/// Dense row-major matrix product helpers built on [`Scalar::gemm_raw`].
pub(crate) mod mm {
    use super::Scalar;

    /// `C (m x n) <- A (m x k) B (k x n) + beta C`, all row-major contiguous.
    pub fn nn<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T], beta: T, c: &mut [T]) {
        T::gemm_raw(
            m,
            k,
            n,
            T::one(),
            a,
            (k as isize, 1),
            b,
            (n as isize, 1),
            beta,
            c,
            (n as isize, 1),
        );
    }

    /// `C (m x n) <- A^T B + beta C` where `A` is stored `k x m`.
    pub fn tn<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T], beta: T, c: &mut [T]) {
        T::gemm_raw(
            m,
            k,
            n,
            T::one(),
            a,
            (1, m as isize),
            b,
            (n as isize, 1),
            beta,
            c,
            (n as isize, 1),
        );
    }

    /// `C (m x n) <- A B^T + beta C` where `B` is stored `n x k`.
    pub fn nt<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T], beta: T, c: &mut [T]) {
        T::gemm_raw(
            m,
            k,
            n,
            T::one(),
            a,
            (k as isize, 1),
            b,
            (1, k as isize),
            beta,
            c,
            (n as isize, 1),
        );
    }
}
