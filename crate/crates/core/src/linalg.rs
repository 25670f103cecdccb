//! Dense matrix products over row-major slices, dispatched to `matrixmultiply`.

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::Float;

/// Floating-point element type for the network and reconstruction kernels.
pub trait Real: Float + Default + Debug + Send + Sync + Sum + 'static {
    /// `c = alpha · a · b + beta · c` with explicit row/column strides.
    ///
    /// `a` is `m × k`, `b` is `k × n`, `c` is `m × n`.
    #[allow(clippy::too_many_arguments)]
    fn gemm_strided(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        rsa: isize,
        csa: isize,
        b: &[Self],
        rsb: isize,
        csb: isize,
        beta: Self,
        c: &mut [Self],
        rsc: isize,
        csc: isize,
    );

    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
    fn as_f32(self) -> f32;
}

fn check_extent(len: usize, rows: usize, cols: usize, rs: isize, cs: isize, name: &str) {
    if rows == 0 || cols == 0 {
        return;
    }
    assert!(rs >= 0 && cs >= 0, "negative stride for {name}");
    let last = (rows - 1) * rs as usize + (cols - 1) * cs as usize;
    assert!(last < len, "{name} too short: need {} elements, have {len}", last + 1);
}

macro_rules! impl_real {
    ($t:ty, $gemm:path) => {
        impl Real for $t {
            fn gemm_strided(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                rsa: isize,
                csa: isize,
                b: &[Self],
                rsb: isize,
                csb: isize,
                beta: Self,
                c: &mut [Self],
                rsc: isize,
                csc: isize,
            ) {
                check_extent(a.len(), m, k, rsa, csa, "a");
                check_extent(b.len(), k, n, rsb, csb, "b");
                check_extent(c.len(), m, n, rsc, csc, "c");
                if m == 0 || n == 0 {
                    return;
                }
                // SAFETY: the extents of all three operands were checked above,
                // and `c` is borrowed mutably so it cannot alias `a` or `b`.
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        rsa,
                        csa,
                        b.as_ptr(),
                        rsb,
                        csb,
                        beta,
                        c.as_mut_ptr(),
                        rsc,
                        csc,
                    );
                }
            }

            fn from_f64(v: f64) -> Self {
                v as $t
            }

            fn as_f64(self) -> f64 {
                self as f64
            }

            fn as_f32(self) -> f32 {
                self as f32
            }
        }
    };
}

impl_real!(f32, matrixmultiply::sgemm);
impl_real!(f64, matrixmultiply::dgemm);

/// Transpose flags for [`gemm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    N,
    T,
}

/// `c = alpha · op(a) · op(b) + beta · c` on contiguous row-major storage.
///
/// `op(a)` is `m × k`, `op(b)` is `k × n`.
#[allow(clippy::too_many_arguments)]
pub fn gemm<T: Real>(
    op_a: Op,
    op_b: Op,
    m: usize,
    k: usize,
    n: usize,
    alpha: T,
    a: &[T],
    b: &[T],
    beta: T,
    c: &mut [T],
) {
    let (rsa, csa) = match op_a {
        Op::N => (k as isize, 1),
        Op::T => (1, m as isize),
    };
    let (rsb, csb) = match op_b {
        Op::N => (n as isize, 1),
        Op::T => (1, k as isize),
    };
    T::gemm_strided(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, n as isize, 1);
}
