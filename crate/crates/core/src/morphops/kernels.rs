//! Forward kernels shared by the pure and differentiable operators. Each
//! returns the attaining input position per output so backward can route
//! gradients; ties resolve to the first attainer in scan order.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{PlaneLayout, Tensor};

use super::{PoolSpec, StructuringFunction};

/// `(planes, rows, cols)` of a tensor with `rank` trailing spatial axes;
/// 1-D signals are a single row.
pub(crate) fn planes_2d(shape: &[usize], rank: usize) -> Result<(usize, usize, usize)> {
    let l = PlaneLayout::of(shape, rank)?;
    Ok(match l.extent.as_slice() {
        [n] => (l.planes, 1, *n),
        [h, w] => (l.planes, *h, *w),
        _ => unreachable!("rank 1 or 2"),
    })
}

pub(crate) struct Extremum<T> {
    pub value: Tensor<T>,
    /// Flat input index attaining each output.
    pub source: Vec<usize>,
    /// Offset (or window position) index attaining each output.
    pub slot: Vec<usize>,
}

/// Full-resolution dilation (`erode == false`) or erosion.
pub(crate) fn morph<T: Scalar>(f: &Tensor<T>, g: &StructuringFunction<T>, erode: bool) -> Result<Extremum<T>> {
    let (planes, h, w) = planes_2d(f.shape(), g.rank())?;
    let offsets = g.offsets_2d();
    let weights = g.weights();
    let plen = h * w;
    let mut value = Vec::with_capacity(f.len());
    let mut source = Vec::with_capacity(f.len());
    let mut slot = Vec::with_capacity(f.len());
    for p in 0..planes {
        let base = p * plen;
        for r in 0..h as i64 {
            for c in 0..w as i64 {
                let mut best: Option<(T, usize, usize)> = None;
                for (k, (&(dr, dc), &wk)) in offsets.iter().zip(weights).enumerate() {
                    if wk == T::neg_infinity() {
                        continue;
                    }
                    // dilation reads f(x - y), erosion reads f(x + y)
                    let (sr, sc) = if erode { (r + dr, c + dc) } else { (r - dr, c - dc) };
                    if sr < 0 || sc < 0 || sr >= h as i64 || sc >= w as i64 {
                        continue;
                    }
                    let idx = base + sr as usize * w + sc as usize;
                    let v = if erode { f.data()[idx] - wk } else { f.data()[idx] + wk };
                    let better = match best {
                        None => true,
                        Some((b, _, _)) => {
                            if erode {
                                v < b
                            } else {
                                v > b
                            }
                        }
                    };
                    if better {
                        best = Some((v, idx, k));
                    }
                }
                let Some((v, idx, k)) = best else {
                    let mut position = vec![r as usize, c as usize];
                    if g.rank() == 1 {
                        position.remove(0);
                    }
                    return Err(Error::EmptyWindow { position });
                };
                value.push(v);
                source.push(idx);
                slot.push(k);
            }
        }
    }
    Ok(Extremum {
        value: Tensor::new(f.shape().to_vec(), value)?,
        source,
        slot,
    })
}

/// Output shape of pooling `shape` with `p`.
pub(crate) fn pooled_shape(shape: &[usize], p: &PoolSpec) -> Result<Vec<usize>> {
    let layout = PlaneLayout::of(shape, p.rank())?;
    let out = p.output_extent(&layout.extent)?;
    let mut s = shape[..shape.len() - p.rank()].to_vec();
    s.extend(out);
    Ok(s)
}

/// Strided window maximum (`maximize`) or minimum, plus the additive weight
/// `weights(plane, u)` at window position `u` when given. The window for
/// output `x` covers inputs `[K·x, K·x + R − 1]` on each axis.
pub(crate) fn pool<T: Scalar>(
    f: &Tensor<T>,
    p: &PoolSpec,
    maximize: bool,
    weights: Option<&dyn Fn(usize, usize) -> T>,
) -> Result<Extremum<T>> {
    let out_shape = pooled_shape(f.shape(), p)?;
    let (planes, h, w) = planes_2d(f.shape(), p.rank())?;
    let ((rh, rw), (kh, kw)) = p.as_2d();
    let (oh, ow) = ((h - rh) / kh + 1, (w - rw) / kw + 1);
    let n = planes * oh * ow;
    let mut value = Vec::with_capacity(n);
    let mut source = Vec::with_capacity(n);
    let mut slot = Vec::with_capacity(n);
    let data = f.data();
    for pl in 0..planes {
        let base = pl * h * w;
        for y in 0..oh {
            for x in 0..ow {
                let start = base + y * kh * w + x * kw;
                let mut best = start;
                let mut best_u = 0;
                let mut best_v = data[start] + weights.map_or(T::zero(), |b| b(pl, 0));
                for a in 0..rh {
                    for b in 0..rw {
                        let u = a * rw + b;
                        if u == 0 {
                            continue;
                        }
                        let idx = start + a * w + b;
                        let v = data[idx] + weights.map_or(T::zero(), |wt| wt(pl, u));
                        if (maximize && v > best_v) || (!maximize && v < best_v) {
                            best = idx;
                            best_u = u;
                            best_v = v;
                        }
                    }
                }
                value.push(best_v);
                source.push(best);
                slot.push(best_u);
            }
        }
    }
    Ok(Extremum {
        value: Tensor::new(out_shape, value)?,
        source,
        slot,
    })
}

/// Scatter `up[k]` into position `source[k]` of a zero tensor of `shape`.
pub(crate) fn scatter<T: Scalar>(shape: &[usize], up: &Tensor<T>, source: &[usize]) -> Tensor<T> {
    let mut out = Tensor::zeros(shape);
    let d = out.data_mut();
    for (&u, &s) in up.data().iter().zip(source) {
        d[s] += u;
    }
    out
}
