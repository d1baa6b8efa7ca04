//! Fused forward kernels for the max-min activation and the two
//! activation-pooling layers, with the attaining indices backward needs.
//!
//! Parameters are per channel: slopes and intercepts are `[C, M, N]`
//! (row `j`, column `i`), window weights are `[C, J, R]` with `R` the
//! window length. Plane `p` of the input uses channel `p % C`.

use crate::error::{Error, Result};
use crate::morphops::kernels::{planes_2d, pooled_shape};
use crate::morphops::PoolSpec;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Which input element, max-min slot and window position produced an output.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Trace {
    pub src: u32,
    pub j: u16,
    pub i: u16,
    pub u: u16,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Dims {
    pub channels: usize,
    pub m: usize,
    pub n: usize,
}

impl Dims {
    pub fn of_params<T: Scalar>(beta: &Tensor<T>, alpha: &Tensor<T>) -> Result<Self> {
        let &[channels, m, n] = beta.shape() else {
            return Err(Error::InvalidShape {
                shape: beta.shape().to_vec(),
                reason: "slopes must be [channels, M, N]".into(),
            });
        };
        beta.check_same_shape(alpha)?;
        if m > u16::MAX as usize || n > u16::MAX as usize {
            return Err(Error::InvalidParameter("too many max-min terms".into()));
        }
        Ok(Self { channels, m, n })
    }

    fn check_planes(&self, planes: usize) -> Result<()> {
        if !planes.is_multiple_of(self.channels) {
            return Err(Error::InvalidParameter(format!(
                "{} parameter channels do not divide {planes} planes",
                self.channels
            )));
        }
        Ok(())
    }

    pub fn check_weights<T: Scalar>(&self, weights: &Tensor<T>, banks: usize, window: usize) -> Result<()> {
        let expected = vec![self.channels, banks, window];
        if weights.shape() != expected.as_slice() {
            return Err(Error::ShapeMismatch {
                expected,
                found: weights.shape().to_vec(),
            });
        }
        Ok(())
    }
}

/// `max_i β[i]·x + α[i]` over one row, first attainer on ties.
#[inline]
fn row_max<T: Scalar>(beta: &[T], alpha: &[T], x: T) -> (T, usize) {
    let mut best = beta[0] * x + alpha[0];
    let mut arg = 0;
    for (i, (&b, &a)) in beta.iter().zip(alpha).enumerate().skip(1) {
        let v = b * x + a;
        if v > best {
            best = v;
            arg = i;
        }
    }
    (best, arg)
}

/// Elementwise `min_j max_i β[j][i]·x + α[j][i]`.
pub(crate) fn pl_activation<T: Scalar>(
    f: &Tensor<T>,
    beta: &Tensor<T>,
    alpha: &Tensor<T>,
    spatial_rank: usize,
) -> Result<(Tensor<T>, Vec<Trace>)> {
    let d = Dims::of_params(beta, alpha)?;
    let (planes, h, w) = planes_2d(f.shape(), spatial_rank)?;
    d.check_planes(planes)?;
    let plen = h * w;
    let mn = d.m * d.n;
    let mut out = Vec::with_capacity(f.len());
    let mut trace = Vec::with_capacity(f.len());
    for (p, xs) in f.data().chunks_exact(plen).enumerate() {
        let c = p % d.channels;
        let (bc, ac) = (&beta.data()[c * mn..][..mn], &alpha.data()[c * mn..][..mn]);
        for (k, &x) in xs.iter().enumerate() {
            let (mut best, mut bj, mut bi) = (T::zero(), 0, 0);
            for (j, (br, ar)) in bc.chunks_exact(d.n).zip(ac.chunks_exact(d.n)).enumerate() {
                let (v, i) = row_max(br, ar, x);
                if j == 0 || v < best {
                    (best, bj, bi) = (v, j, i);
                }
            }
            out.push(best);
            trace.push(Trace {
                src: (p * plen + k) as u32,
                j: bj as u16,
                i: bi as u16,
                u: 0,
            });
        }
    }
    Ok((Tensor::new(f.shape().to_vec(), out)?, trace))
}

struct Windows {
    planes: usize,
    h: usize,
    w: usize,
    oh: usize,
    ow: usize,
    rw: usize,
    kh: usize,
    kw: usize,
    len: usize,
}

impl Windows {
    fn new(shape: &[usize], pool: &PoolSpec) -> Result<(Self, Vec<usize>)> {
        let out_shape = pooled_shape(shape, pool)?;
        let (planes, h, w) = planes_2d(shape, pool.rank())?;
        let ((rh, rw), (kh, kw)) = pool.as_2d();
        let win = Self {
            planes,
            h,
            w,
            oh: (h - rh) / kh + 1,
            ow: (w - rw) / kw + 1,
            rw,
            kh,
            kw,
            len: rh * rw,
        };
        Ok((win, out_shape))
    }

    /// Flat input index of window position `u` for output `(y, x)` of `plane`.
    #[inline]
    fn source(&self, plane: usize, y: usize, x: usize, u: usize) -> usize {
        plane * self.h * self.w + (y * self.kh + u / self.rw) * self.w + x * self.kw + u % self.rw
    }
}

/// Activate then pool: `min_j max_u [max_i β[j][i]·f(Kx+u) + α[j][i]] + b_j(u)`.
pub(crate) fn act1<T: Scalar>(
    f: &Tensor<T>,
    beta: &Tensor<T>,
    alpha: &Tensor<T>,
    weights: &Tensor<T>,
    pool: &PoolSpec,
) -> Result<(Tensor<T>, Vec<Trace>)> {
    let d = Dims::of_params(beta, alpha)?;
    let (win, out_shape) = Windows::new(f.shape(), pool)?;
    d.check_planes(win.planes)?;
    d.check_weights(weights, d.m, win.len)?;
    let (mn, r) = (d.m * d.n, win.len);
    let data = f.data();
    let n_out = win.planes * win.oh * win.ow;
    let mut out = Vec::with_capacity(n_out);
    let mut trace = Vec::with_capacity(n_out);
    for p in 0..win.planes {
        let c = p % d.channels;
        let (bc, ac) = (&beta.data()[c * mn..][..mn], &alpha.data()[c * mn..][..mn]);
        let wc = &weights.data()[c * d.m * r..][..d.m * r];
        for y in 0..win.oh {
            for x in 0..win.ow {
                let mut best_min = T::zero();
                let mut t = Trace::default();
                for j in 0..d.m {
                    let (brow, arow) = (&bc[j * d.n..][..d.n], &ac[j * d.n..][..d.n]);
                    let mut best_max = T::zero();
                    let mut tj = Trace::default();
                    for u in 0..r {
                        let s = win.source(p, y, x, u);
                        let (a, i) = row_max(brow, arow, data[s]);
                        let v = a + wc[j * r + u];
                        if u == 0 || v > best_max {
                            best_max = v;
                            tj = Trace {
                                src: s as u32,
                                j: j as u16,
                                i: i as u16,
                                u: u as u16,
                            };
                        }
                    }
                    if j == 0 || best_max < best_min {
                        best_min = best_max;
                        t = tj;
                    }
                }
                out.push(best_min);
                trace.push(t);
            }
        }
    }
    Ok((Tensor::new(out_shape, out)?, trace))
}

/// Pool then activate: `min_i max_j β[j][i]·(max_u f(Kx+u) + b_i(u)) + α[j][i]`.
pub(crate) fn act2<T: Scalar>(
    f: &Tensor<T>,
    beta: &Tensor<T>,
    alpha: &Tensor<T>,
    weights: &Tensor<T>,
    pool: &PoolSpec,
) -> Result<(Tensor<T>, Vec<Trace>)> {
    let d = Dims::of_params(beta, alpha)?;
    let (win, out_shape) = Windows::new(f.shape(), pool)?;
    d.check_planes(win.planes)?;
    d.check_weights(weights, d.n, win.len)?;
    let (mn, r) = (d.m * d.n, win.len);
    let data = f.data();
    let n_out = win.planes * win.oh * win.ow;
    let mut out = Vec::with_capacity(n_out);
    let mut trace = Vec::with_capacity(n_out);
    for p in 0..win.planes {
        let c = p % d.channels;
        let (bc, ac) = (&beta.data()[c * mn..][..mn], &alpha.data()[c * mn..][..mn]);
        let wc = &weights.data()[c * d.n * r..][..d.n * r];
        for y in 0..win.oh {
            for x in 0..win.ow {
                let mut best_min = T::zero();
                let mut t = Trace::default();
                for i in 0..d.n {
                    let mut pooled = T::zero();
                    let (mut src, mut best_u) = (0, 0);
                    for u in 0..r {
                        let s = win.source(p, y, x, u);
                        let v = data[s] + wc[i * r + u];
                        if u == 0 || v > pooled {
                            pooled = v;
                            src = s;
                            best_u = u;
                        }
                    }
                    let mut q = T::zero();
                    let mut best_j = 0;
                    for j in 0..d.m {
                        let v = bc[j * d.n + i] * pooled + ac[j * d.n + i];
                        if j == 0 || v > q {
                            q = v;
                            best_j = j;
                        }
                    }
                    if i == 0 || q < best_min {
                        best_min = q;
                        t = Trace {
                            src: src as u32,
                            j: best_j as u16,
                            i: i as u16,
                            u: best_u as u16,
                        };
                    }
                }
                out.push(best_min);
                trace.push(t);
            }
        }
    }
    Ok((Tensor::new(out_shape, out)?, trace))
}

