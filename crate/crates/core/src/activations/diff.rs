//! Differentiable max-min activation and activation-pooling layers.
//!
//! Slopes and intercepts are `[C, M, N]` variables, window weights are
//! `[C, M, R]` for [`morpho_act1`] and `[C, N, R]` for [`morpho_act2`],
//! with `R` the number of positions in the pooling window.

use std::rc::Rc;

use super::kernels::{self, Dims, Trace};
use crate::autodiff::Var;
use crate::error::Result;
use crate::morphops::kernels::planes_2d;
use crate::morphops::PoolSpec;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Pointwise,
    ActThenPool,
    PoolThenAct,
}

struct Saved<T> {
    kind: Kind,
    x: Rc<Tensor<T>>,
    beta: Rc<Tensor<T>>,
    weights: Option<Rc<Tensor<T>>>,
    dims: Dims,
    window: usize,
    plane_len: usize,
    trace: Vec<Trace>,
}

impl<T: Scalar> Saved<T> {
    fn backward(&self, up: &Tensor<T>, needs: &[bool]) -> Vec<Option<Tensor<T>>> {
        let Dims { channels, m, n } = self.dims;
        let mut df = needs[0].then(|| Tensor::zeros_like(&self.x));
        let mut dbeta = needs[1].then(|| Tensor::zeros(&[channels, m, n]));
        let mut dalpha = needs[2].then(|| Tensor::zeros(&[channels, m, n]));
        let banks = if self.kind == Kind::PoolThenAct { n } else { m };
        let mut dw = (needs.len() > 3 && needs[3]).then(|| Tensor::zeros(&[channels, banks, self.window]));
        let (xd, bd) = (self.x.data(), self.beta.data());
        let planes = self.x.len() / self.plane_len;
        let out_plane = up.len() / planes;
        for (p, (ups, traces)) in up.data().chunks(out_plane).zip(self.trace.chunks(out_plane)).enumerate() {
            let c = p % channels;
            for (&g, t) in ups.iter().zip(traces) {
                let src = t.src as usize;
                let (j, i, u) = (t.j as usize, t.i as usize, t.u as usize);
                let slot = (c * m + j) * n + i;
                let slope = bd[slot];
                let input = match (self.kind, &self.weights) {
                    (Kind::PoolThenAct, Some(w)) => xd[src] + w.data()[(c * n + i) * self.window + u],
                    _ => xd[src],
                };
                if let Some(df) = df.as_mut() {
                    df.data_mut()[src] += g * slope;
                }
                if let Some(db) = dbeta.as_mut() {
                    db.data_mut()[slot] += g * input;
                }
                if let Some(da) = dalpha.as_mut() {
                    da.data_mut()[slot] += g;
                }
                if let Some(dw) = dw.as_mut() {
                    match self.kind {
                        Kind::ActThenPool => dw.data_mut()[(c * m + j) * self.window + u] += g,
                        Kind::PoolThenAct => dw.data_mut()[(c * n + i) * self.window + u] += g * slope,
                        Kind::Pointwise => {}
                    }
                }
            }
        }
        let mut grads = vec![df, dbeta, dalpha];
        if self.kind != Kind::Pointwise {
            grads.push(dw);
        }
        grads
    }
}

/// Elementwise `min_j max_i β[j][i]·f + α[j][i]` with per-channel parameters.
pub fn pl_activation<'g, T: Scalar>(
    f: Var<'g, T>,
    beta: Var<'g, T>,
    alpha: Var<'g, T>,
    spatial_rank: usize,
) -> Result<Var<'g, T>> {
    let (x, b, a) = (f.value(), beta.value(), alpha.value());
    let (value, trace) = kernels::pl_activation(&x, &b, &a, spatial_rank)?;
    let (_, h, w) = planes_2d(x.shape(), spatial_rank)?;
    let saved = Saved {
        kind: Kind::Pointwise,
        dims: Dims::of_params(&b, &a)?,
        x,
        beta: b,
        weights: None,
        window: 1,
        plane_len: h * w,
        trace,
    };
    Ok(f.graph().record(
        value,
        &[f, beta, alpha],
        Box::new(move |up, needs| saved.backward(up, needs)),
    ))
}

fn layer<'g, T: Scalar>(
    kind: Kind,
    f: Var<'g, T>,
    beta: Var<'g, T>,
    alpha: Var<'g, T>,
    weights: Var<'g, T>,
    pool: &PoolSpec,
) -> Result<Var<'g, T>> {
    let (x, b, a, w) = (f.value(), beta.value(), alpha.value(), weights.value());
    let (value, trace) = match kind {
        Kind::PoolThenAct => kernels::act2(&x, &b, &a, &w, pool)?,
        _ => kernels::act1(&x, &b, &a, &w, pool)?,
    };
    let (_, h, wd) = planes_2d(x.shape(), pool.rank())?;
    let saved = Saved {
        kind,
        dims: Dims::of_params(&b, &a)?,
        x,
        beta: b,
        weights: Some(w),
        window: pool.window_len(),
        plane_len: h * wd,
        trace,
    };
    Ok(f.graph().record(
        value,
        &[f, beta, alpha, weights],
        Box::new(move |up, needs| saved.backward(up, needs)),
    ))
}

/// Activate then pool with per-row structuring functions:
/// `min_j max_u [max_i β[j][i]·f(Kx+u) + α[j][i]] + b_j(u)`.
pub fn morpho_act1<'g, T: Scalar>(
    f: Var<'g, T>,
    beta: Var<'g, T>,
    alpha: Var<'g, T>,
    weights: Var<'g, T>,
    pool: &PoolSpec,
) -> Result<Var<'g, T>> {
    layer(Kind::ActThenPool, f, beta, alpha, weights, pool)
}

/// Pool then activate with per-column structuring functions:
/// `min_i max_j β[j][i]·(max_u f(Kx+u) + b_i(u)) + α[j][i]`.
pub fn morpho_act2<'g, T: Scalar>(
    f: Var<'g, T>,
    beta: Var<'g, T>,
    alpha: Var<'g, T>,
    weights: Var<'g, T>,
    pool: &PoolSpec,
) -> Result<Var<'g, T>> {
    layer(Kind::PoolThenAct, f, beta, alpha, weights, pool)
}
