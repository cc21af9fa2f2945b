//! Dense kernels on feature-major (`[features][batch]`) buffers.

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Scalar type the network can run in.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Default + Debug + Sum + Send + Sync + 'static
{
    const BYTES: usize;

    /// `c = alpha * a * b + beta * c` with explicit strides (see `matrixmultiply`).
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
}

impl Real for f32 {
    const BYTES: usize = 4;

    fn gemm_strided(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: &[f32],
        rsa: isize,
        csa: isize,
        b: &[f32],
        rsb: isize,
        csb: isize,
        beta: f32,
        c: &mut [f32],
        rsc: isize,
        csc: isize,
    ) {
        // SAFETY: `gemm` checks every slice covers the strided extent.
        unsafe {
            matrixmultiply::sgemm(
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
            )
        }
    }
}

impl Real for f64 {
    const BYTES: usize = 8;

    fn gemm_strided(
        m: usize,
        k: usize,
        n: usize,
        alpha: f64,
        a: &[f64],
        rsa: isize,
        csa: isize,
        b: &[f64],
        rsb: isize,
        csb: isize,
        beta: f64,
        c: &mut [f64],
        rsc: isize,
        csc: isize,
    ) {
        // SAFETY: `gemm` checks every slice covers the strided extent.
        unsafe {
            matrixmultiply::dgemm(
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
            )
        }
    }
}

#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("representable constant")
}

/// `c (m x n) = op(a) (m x k) * op(b) (k x n) + beta * c`, all row-major.
///
/// With `ta` set, `a` is stored as `k x m`; with `tb`, `b` is stored `n x k`.
#[allow(clippy::too_many_arguments)]
pub fn gemm<T: Real>(
    m: usize,
    k: usize,
    n: usize,
    a: &[T],
    ta: bool,
    b: &[T],
    tb: bool,
    beta: T,
    c: &mut [T],
) {
    assert_eq!(a.len(), m * k, "gemm: lhs size");
    assert_eq!(b.len(), k * n, "gemm: rhs size");
    assert_eq!(c.len(), m * n, "gemm: out size");
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    T::gemm_strided(
        m,
        k,
        n,
        T::one(),
        a,
        rsa,
        csa,
        b,
        rsb,
        csb,
        beta,
        c,
        n as isize,
        1,
    );
}

/// Geometry of one 3x3 stride-1 convolution on a square map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub in_size: usize,
    pub pad: usize,
}

impl ConvGeom {
    pub fn out_size(self) -> usize {
        self.in_size + 2 * self.pad - 2
    }
}

/// Unfold `[cin][batch * s * s]` into `[cin * 9][batch * o * o]`.
pub fn im2col<T: Real>(input: &[T], cin: usize, batch: usize, g: ConvGeom) -> Vec<T> {
    let s = g.in_size;
    let o = g.out_size();
    let n = batch * o * o;
    let mut col = vec![T::zero(); cin * 9 * n];
    for ci in 0..cin {
        let plane = &input[ci * batch * s * s..(ci + 1) * batch * s * s];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut col[((ci * 9) + ky * 3 + kx) * n..][..n];
                for b in 0..batch {
                    for oy in 0..o {
                        let iy = (oy + ky) as isize - g.pad as isize;
                        if iy < 0 || iy >= s as isize {
                            continue;
                        }
                        for ox in 0..o {
                            let ix = (ox + kx) as isize - g.pad as isize;
                            if ix < 0 || ix >= s as isize {
                                continue;
                            }
                            row[b * o * o + oy * o + ox] =
                                plane[b * s * s + iy as usize * s + ix as usize];
                        }
                    }
                }
            }
        }
    }
    col
}

/// Adjoint of [`im2col`]: accumulate columns back into `[cin][batch * s * s]`.
pub fn col2im<T: Real>(col: &[T], cin: usize, batch: usize, g: ConvGeom) -> Vec<T> {
    let s = g.in_size;
    let o = g.out_size();
    let n = batch * o * o;
    let mut out = vec![T::zero(); cin * batch * s * s];
    for ci in 0..cin {
        let plane = &mut out[ci * batch * s * s..(ci + 1) * batch * s * s];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &col[((ci * 9) + ky * 3 + kx) * n..][..n];
                for b in 0..batch {
                    for oy in 0..o {
                        let iy = (oy + ky) as isize - g.pad as isize;
                        if iy < 0 || iy >= s as isize {
                            continue;
                        }
                        for ox in 0..o {
                            let ix = (ox + kx) as isize - g.pad as isize;
                            if ix < 0 || ix >= s as isize {
                                continue;
                            }
                            plane[b * s * s + iy as usize * s + ix as usize] =
                                plane[b * s * s + iy as usize * s + ix as usize]
                                    + row[b * o * o + oy * o + ox];
                        }
                    }
                }
            }
        }
    }
    out
}

pub const BN_EPS: f64 = 1e-5;

/// Per-row batch-norm state kept for the backward pass.
#[derive(Debug, Clone)]
pub struct BnCache<T> {
    pub xhat: Vec<T>,
    pub invstd: Vec<T>,
    pub batch_stats: bool,
}

/// Normalizes each row of `x` (`rows x n`) in place to `gamma * xhat + beta`.
///
/// With `batch_stats` the row mean and biased variance are used and the
/// running buffers updated as `running = momentum * running + (1 - momentum) * batch`
/// (unbiased variance); otherwise the running buffers are used.
#[allow(clippy::too_many_arguments)]
pub fn batch_norm_forward<T: Real>(
    x: &mut [T],
    rows: usize,
    n: usize,
    gamma: &[T],
    beta: &[T],
    running_mean: &mut [T],
    running_var: &mut [T],
    batch_stats: bool,
    momentum: T,
) -> BnCache<T> {
    let eps: T = lit(BN_EPS);
    let mut xhat = vec![T::zero(); rows * n];
    let mut invstd = vec![T::zero(); rows];
    let nt = T::from_usize(n).unwrap();
    for r in 0..rows {
        let row = &mut x[r * n..(r + 1) * n];
        let (mean, var) = if batch_stats {
            let mean = row.iter().copied().sum::<T>() / nt;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / nt;
            if n > 1 {
                let unbiased = var * nt / (nt - T::one());
                running_mean[r] = momentum * running_mean[r] + (T::one() - momentum) * mean;
                running_var[r] = momentum * running_var[r] + (T::one() - momentum) * unbiased;
            }
            (mean, var)
        } else {
            (running_mean[r], running_var[r])
        };
        let is = T::one() / (var + eps).sqrt();
        invstd[r] = is;
        let xh = &mut xhat[r * n..(r + 1) * n];
        for (v, h) in row.iter_mut().zip(xh.iter_mut()) {
            *h = (*v - mean) * is;
            *v = gamma[r] * *h + beta[r];
        }
    }
    BnCache {
        xhat,
        invstd,
        batch_stats,
    }
}

/// Returns dx; accumulates dgamma/dbeta.
pub fn batch_norm_backward<T: Real>(
    dy: &[T],
    rows: usize,
    n: usize,
    gamma: &[T],
    cache: &BnCache<T>,
    dgamma: &mut [T],
    dbeta: &mut [T],
) -> Vec<T> {
    let nt = T::from_usize(n).unwrap();
    let mut dx = vec![T::zero(); rows * n];
    for r in 0..rows {
        let dyr = &dy[r * n..(r + 1) * n];
        let xh = &cache.xhat[r * n..(r + 1) * n];
        let sum_dy: T = dyr.iter().copied().sum();
        let sum_dy_xh: T = dyr.iter().zip(xh).map(|(&a, &b)| a * b).sum();
        dgamma[r] = dgamma[r] + sum_dy_xh;
        dbeta[r] = dbeta[r] + sum_dy;
        let dxr = &mut dx[r * n..(r + 1) * n];
        let g = gamma[r] * cache.invstd[r];
        if cache.batch_stats {
            // dx = g/N * (N*dy - sum(dy) - xhat * sum(dy*xhat))
            for i in 0..n {
                dxr[i] = g / nt * (nt * dyr[i] - sum_dy - xh[i] * sum_dy_xh);
            }
        } else {
            for i in 0..n {
                dxr[i] = g * dyr[i];
            }
        }
    }
    dx
}

pub fn relu_inplace<T: Real>(x: &mut [T]) {
    for v in x {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

/// Zeroes `grad` where the ReLU output was not positive.
pub fn relu_backward<T: Real>(grad: &mut [T], out: &[T]) {
    for (g, &o) in grad.iter_mut().zip(out) {
        if o <= T::zero() {
            *g = T::zero();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_transposes() {
        // a = [[1,2,3],[4,5,6]] (2x3), b = [[1,0],[0,1],[1,1]] (3x2)
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [1.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let mut c = [0.0f64; 4];
        gemm(2, 3, 2, &a, false, &b, false, 0.0, &mut c);
        assert_eq!(c, [4.0, 5.0, 10.0, 11.0]);
        let at = [1.0, 4.0, 2.0, 5.0, 3.0, 6.0];
        let bt = [1.0, 0.0, 1.0, 0.0, 1.0, 1.0];
        let mut c2 = [0.0f64; 4];
        gemm(2, 3, 2, &at, true, &bt, true, 0.0, &mut c2);
        assert_eq!(c2, c);
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        // <im2col(x), y> == <x, col2im(y)>
        for g in [
            ConvGeom { in_size: 5, pad: 1 },
            ConvGeom { in_size: 5, pad: 0 },
            ConvGeom { in_size: 3, pad: 0 },
        ] {
            let (cin, batch) = (2, 3);
            let x: Vec<f64> = (0..cin * batch * g.in_size * g.in_size)
                .map(|i| ((i * 7919) % 13) as f64 - 6.0)
                .collect();
            let col = im2col(&x, cin, batch, g);
            let y: Vec<f64> = (0..col.len()).map(|i| ((i * 104729) % 17) as f64 - 8.0).collect();
            let lhs: f64 = col.iter().zip(&y).map(|(a, b)| a * b).sum();
            let back = col2im(&y, cin, batch, g);
            let rhs: f64 = x.iter().zip(&back).map(|(a, b)| a * b).sum();
            assert_eq!(lhs, rhs);
        }
    }
}
