//! Primitive differentiable operations.

use std::ops::{Add, Mul, Neg, Sub};
use std::rc::Rc;

use super::Var;
#[cfg(test)]
use super::Graph;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{PlaneLayout, Tensor};

/// Binary elementwise operation tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Elementwise {
    Add,
    Sub,
    Mul,
    /// Ties send the gradient to the left operand.
    Max,
    /// Ties send the gradient to the left operand.
    Min,
}

impl Elementwise {
    pub fn apply<T: Scalar>(self, a: T, b: T) -> T {
        match self {
            Self::Add => a + b,
            Self::Sub => a - b,
            Self::Mul => a * b,
            Self::Max => {
                if b > a {
                    b
                } else {
                    a
                }
            }
            Self::Min => {
                if b < a {
                    b
                } else {
                    a
                }
            }
        }
    }

    /// Partial derivatives `(∂/∂a, ∂/∂b)` at `(a, b)`.
    fn partials<T: Scalar>(self, a: T, b: T) -> (T, T) {
        let (one, zero) = (T::one(), T::zero());
        match self {
            Self::Add => (one, one),
            Self::Sub => (one, -one),
            Self::Mul => (b, a),
            Self::Max => {
                if b > a {
                    (zero, one)
                } else {
                    (one, zero)
                }
            }
            Self::Min => {
                if b < a {
                    (zero, one)
                } else {
                    (one, zero)
                }
            }
        }
    }
}

/// Right-hand side of an elementwise operation.
#[derive(Clone, Copy, Debug)]
pub enum Operand<'g, T> {
    Var(Var<'g, T>),
    /// Broadcast constant.
    Scalar(T),
}

impl<'g, T: Scalar> Var<'g, T> {
    /// `result[k] = op(self[k], rhs[k])`.
    pub fn elementwise(self, op: Elementwise, rhs: Operand<'g, T>) -> Result<Var<'g, T>> {
        let g = self.graph;
        let a = self.value();
        match rhs {
            Operand::Scalar(c) => {
                let out = a.map(|x| op.apply(x, c));
                Ok(g.record(
                    out,
                    &[self],
                    Box::new(move |up, _| {
                        let da = a.zip_map(up, |x, u| u * op.partials(x, c).0).expect("same shape");
                        vec![Some(da)]
                    }),
                ))
            }
            Operand::Var(other) => {
                let b = other.value();
                let out = a.zip_map(&b, |x, y| op.apply(x, y))?;
                Ok(g.record(
                    out,
                    &[self, other],
                    Box::new(move |up, needs| {
                        let mut da = needs[0].then(|| Tensor::zeros_like(up));
                        let mut db = needs[1].then(|| Tensor::zeros_like(up));
                        for k in 0..up.len() {
                            let (pa, pb) = op.partials(a.data()[k], b.data()[k]);
                            if let Some(t) = da.as_mut() {
                                t.data_mut()[k] = up.data()[k] * pa;
                            }
                            if let Some(t) = db.as_mut() {
                                t.data_mut()[k] = up.data()[k] * pb;
                            }
                        }
                        vec![da, db]
                    }),
                ))
            }
        }
    }

    pub fn try_add(self, other: Var<'g, T>) -> Result<Var<'g, T>> {
        self.elementwise(Elementwise::Add, Operand::Var(other))
    }

    pub fn try_sub(self, other: Var<'g, T>) -> Result<Var<'g, T>> {
        self.elementwise(Elementwise::Sub, Operand::Var(other))
    }

    pub fn try_mul(self, other: Var<'g, T>) -> Result<Var<'g, T>> {
        self.elementwise(Elementwise::Mul, Operand::Var(other))
    }

    pub fn max(self, other: Var<'g, T>) -> Result<Var<'g, T>> {
        self.elementwise(Elementwise::Max, Operand::Var(other))
    }

    pub fn min(self, other: Var<'g, T>) -> Result<Var<'g, T>> {
        self.elementwise(Elementwise::Min, Operand::Var(other))
    }

    pub fn add_scalar(self, c: T) -> Var<'g, T> {
        self.elementwise(Elementwise::Add, Operand::Scalar(c))
            .expect("scalar operand")
    }

    pub fn mul_scalar(self, c: T) -> Var<'g, T> {
        self.elementwise(Elementwise::Mul, Operand::Scalar(c))
            .expect("scalar operand")
    }

    pub fn max_scalar(self, c: T) -> Var<'g, T> {
        self.elementwise(Elementwise::Max, Operand::Scalar(c))
            .expect("scalar operand")
    }

    pub fn min_scalar(self, c: T) -> Var<'g, T> {
        self.elementwise(Elementwise::Min, Operand::Scalar(c))
            .expect("scalar operand")
    }

    pub fn relu(self) -> Var<'g, T> {
        self.max_scalar(T::zero())
    }

    /// Sum of all elements as a rank-0 tensor.
    pub fn sum(self) -> Var<'g, T> {
        let a = self.value();
        let shape = a.shape().to_vec();
        self.graph.record(
            Tensor::scalar(a.sum()),
            &[self],
            Box::new(move |up, _| vec![Some(Tensor::full(&shape, up.item()))]),
        )
    }

    pub fn mean(self) -> Var<'g, T> {
        let n = self.value().len();
        self.sum().mul_scalar(T::one() / T::lit(n as f64))
    }

    /// `Σ weights[k] · self[k]` for a constant weight tensor.
    pub fn dot_const(self, weights: &Tensor<T>) -> Result<Var<'g, T>> {
        let w = self.graph.constant(weights.clone());
        Ok(self.try_mul(w)?.sum())
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Var<'g, T>> {
        let a = self.value();
        let old = a.shape().to_vec();
        let out = (*a).clone().reshape(shape)?;
        Ok(self.graph.record(
            out,
            &[self],
            Box::new(move |up, _| vec![Some(up.clone().reshape(&old).expect("same size"))]),
        ))
    }

    /// Multiply every plane by its channel's factor: plane `p` uses
    /// `factors[p % channels]`, with `factors` of shape `[channels]`.
    pub fn scale_channels(self, factors: Var<'g, T>, spatial_rank: usize) -> Result<Var<'g, T>> {
        let x = self.value();
        let beta = factors.value();
        let layout = PlaneLayout::of(x.shape(), spatial_rank)?;
        let channels = check_channels(&beta, layout.planes)?;
        let plen = layout.plane_len();
        let mut out = (*x).clone();
        for (p, plane) in out.data_mut().chunks_mut(plen).enumerate() {
            let b = beta.data()[p % channels];
            plane.iter_mut().for_each(|v| *v *= b);
        }
        Ok(self.graph.record(
            out,
            &[self, factors],
            Box::new(move |up, needs| {
                let dx = needs[0].then(|| {
                    let mut dx = up.clone();
                    for (p, plane) in dx.data_mut().chunks_mut(plen).enumerate() {
                        let b = beta.data()[p % channels];
                        plane.iter_mut().for_each(|v| *v *= b);
                    }
                    dx
                });
                let db = needs[1].then(|| {
                    let mut db = Tensor::zeros_like(&beta);
                    for (p, (u, xv)) in up.data().chunks(plen).zip(x.data().chunks(plen)).enumerate() {
                        let s: T = u.iter().zip(xv).fold(T::zero(), |acc, (&u, &x)| acc + u * x);
                        db.data_mut()[p % channels] += s;
                    }
                    db
                });
                vec![dx, db]
            }),
        ))
    }

    /// Add a per-channel bias to every plane (see [`Var::scale_channels`]).
    pub fn add_channel_bias(self, bias: Var<'g, T>, spatial_rank: usize) -> Result<Var<'g, T>> {
        let x = self.value();
        let b = bias.value();
        let layout = PlaneLayout::of(x.shape(), spatial_rank)?;
        let channels = check_channels(&b, layout.planes)?;
        let plen = layout.plane_len();
        let mut out = (*x).clone();
        for (p, plane) in out.data_mut().chunks_mut(plen).enumerate() {
            let c = b.data()[p % channels];
            plane.iter_mut().for_each(|v| *v += c);
        }
        let bshape = b.shape().to_vec();
        Ok(self.graph.record(
            out,
            &[self, bias],
            Box::new(move |up, needs| {
                let db = needs[1].then(|| {
                    let mut db = Tensor::zeros(&bshape);
                    for (p, u) in up.data().chunks(plen).enumerate() {
                        db.data_mut()[p % channels] += u.iter().fold(T::zero(), |a, &v| a + v);
                    }
                    db
                });
                vec![needs[0].then(|| up.clone()), db]
            }),
        ))
    }

    /// Valid 2-D cross-correlation, stride 1, no padding.
    ///
    /// `self`: `[batch, in_ch, h, w]`, `weight`: `[out_ch, in_ch, kh, kw]`,
    /// result: `[batch, out_ch, h - kh + 1, w - kw + 1]`.
    pub fn conv2d(self, weight: Var<'g, T>) -> Result<Var<'g, T>> {
        let x = self.value();
        let w = weight.value();
        let geom = ConvGeometry::new(x.shape(), w.shape())?;
        let cols = Rc::new(geom.im2col(x.data()));
        let mut out = vec![T::zero(); geom.batch * geom.out_ch * geom.out_area()];
        geom.forward(w.data(), &cols, &mut out);
        let out = Tensor::new(geom.out_shape(), out)?;
        Ok(self.graph.record(
            out,
            &[self, weight],
            Box::new(move |up, needs| {
                let dw = needs[1].then(|| Tensor::new(w.shape().to_vec(), geom.weight_grad(up.data(), &cols)).expect("weight shape"));
                let dx = needs[0].then(|| Tensor::new(geom.in_shape(), geom.input_grad(w.data(), up.data())).expect("input shape"));
                vec![dx, dw]
            }),
        ))
    }

    /// `self · weight + bias` with `self: [batch, in]`, `weight: [in, out]`,
    /// `bias: [out]`.
    pub fn linear(self, weight: Var<'g, T>, bias: Var<'g, T>) -> Result<Var<'g, T>> {
        let x = self.value();
        let w = weight.value();
        let b = bias.value();
        let (&[batch, din], &[win, dout]) = (x.shape(), w.shape()) else {
            return Err(Error::InvalidShape {
                shape: x.shape().to_vec(),
                reason: "linear expects [batch, in] input and [in, out] weight".into(),
            });
        };
        if win != din || b.shape() != [dout] {
            return Err(Error::ShapeMismatch {
                expected: vec![din, dout],
                found: w.shape().to_vec(),
            });
        }
        let mut out = vec![T::zero(); batch * dout];
        for row in out.chunks_mut(dout) {
            row.copy_from_slice(b.data());
        }
        T::gemm(batch, din, dout, T::one(), x.data(), (din, 1), w.data(), (dout, 1), T::one(), &mut out, (dout, 1));
        let out = Tensor::new(vec![batch, dout], out)?;
        Ok(self.graph.record(
            out,
            &[self, weight, bias],
            Box::new(move |up, needs| {
                let dx = needs[0].then(|| {
                    let mut dx = vec![T::zero(); batch * din];
                    T::gemm(batch, dout, din, T::one(), up.data(), (dout, 1), w.data(), (1, dout), T::zero(), &mut dx, (din, 1));
                    Tensor::new(vec![batch, din], dx).expect("input shape")
                });
                let dw = needs[1].then(|| {
                    let mut dw = vec![T::zero(); din * dout];
                    T::gemm(din, batch, dout, T::one(), x.data(), (1, din), up.data(), (dout, 1), T::zero(), &mut dw, (dout, 1));
                    Tensor::new(vec![din, dout], dw).expect("weight shape")
                });
                let db = needs[2].then(|| {
                    let mut db = vec![T::zero(); dout];
                    for row in up.data().chunks(dout) {
                        for (d, &u) in db.iter_mut().zip(row) {
                            *d += u;
                        }
                    }
                    Tensor::new(vec![dout], db).expect("bias shape")
                });
                vec![dx, dw, db]
            }),
        ))
    }

    /// `scale · Σ_b −log softmax(logits_b)[labels_b]` for `[batch, classes]`
    /// logits.
    pub fn softmax_cross_entropy(self, labels: &[usize], scale: T) -> Result<Var<'g, T>> {
        let z = self.value();
        let &[batch, classes] = z.shape() else {
            return Err(Error::InvalidShape {
                shape: z.shape().to_vec(),
                reason: "expected [batch, classes] logits".into(),
            });
        };
        if labels.len() != batch || labels.iter().any(|&l| l >= classes) {
            return Err(Error::InvalidParameter(format!(
                "{} labels for batch {batch} with {classes} classes",
                labels.len()
            )));
        }
        let mut probs = vec![T::zero(); batch * classes];
        let mut loss = T::zero();
        for (b, (row, p)) in z.data().chunks(classes).zip(probs.chunks_mut(classes)).enumerate() {
            let m = row.iter().fold(T::neg_infinity(), |m, &v| if v > m { v } else { m });
            let mut denom = T::zero();
            for (pi, &v) in p.iter_mut().zip(row) {
                *pi = (v - m).exp();
                denom += *pi;
            }
            p.iter_mut().for_each(|v| *v /= denom);
            loss += m + denom.ln() - row[labels[b]];
        }
        let labels = labels.to_vec();
        Ok(self.graph.record(
            Tensor::scalar(loss * scale),
            &[self],
            Box::new(move |up, _| {
                let s = up.item() * scale;
                let mut d = probs.clone();
                for (b, row) in d.chunks_mut(classes).enumerate() {
                    row[labels[b]] -= T::one();
                    row.iter_mut().for_each(|v| *v *= s);
                }
                vec![Some(Tensor::new(vec![batch, classes], d).expect("logit shape"))]
            }),
        ))
    }
}

fn check_channels<T: Scalar>(params: &Tensor<T>, planes: usize) -> Result<usize> {
    let channels = params.len();
    if params.rank() != 1 || !planes.is_multiple_of(channels) {
        return Err(Error::InvalidParameter(format!(
            "per-channel parameter of shape {:?} does not divide {planes} planes",
            params.shape()
        )));
    }
    Ok(channels)
}

#[derive(Clone, Copy, Debug)]
struct ConvGeometry {
    batch: usize,
    in_ch: usize,
    h: usize,
    w: usize,
    out_ch: usize,
    kh: usize,
    kw: usize,
}

impl ConvGeometry {
    fn new(x: &[usize], w: &[usize]) -> Result<Self> {
        let (&[batch, in_ch, h, wd], &[out_ch, wc, kh, kw]) = (x, w) else {
            return Err(Error::InvalidShape {
                shape: x.to_vec(),
                reason: "conv2d expects [batch, ch, h, w] input and [out, in, kh, kw] weight".into(),
            });
        };
        if wc != in_ch {
            return Err(Error::ShapeMismatch {
                expected: vec![out_ch, in_ch, kh, kw],
                found: w.to_vec(),
            });
        }
        if kh > h || kw > wd {
            return Err(Error::WindowTooLarge {
                window: vec![kh, kw],
                extent: vec![h, wd],
            });
        }
        Ok(Self {
            batch,
            in_ch,
            h,
            w: wd,
            out_ch,
            kh,
            kw,
        })
    }

    fn oh(&self) -> usize {
        self.h - self.kh + 1
    }

    fn ow(&self) -> usize {
        self.w - self.kw + 1
    }

    fn out_area(&self) -> usize {
        self.oh() * self.ow()
    }

    fn patch(&self) -> usize {
        self.in_ch * self.kh * self.kw
    }

    /// Columns for the whole batch: `[patch, batch * out_area]`.
    fn cols_width(&self) -> usize {
        self.batch * self.out_area()
    }

    fn in_shape(&self) -> Vec<usize> {
        vec![self.batch, self.in_ch, self.h, self.w]
    }

    fn out_shape(&self) -> Vec<usize> {
        vec![self.batch, self.out_ch, self.oh(), self.ow()]
    }

    fn im2col<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        let (oh, ow, area, width) = (self.oh(), self.ow(), self.out_area(), self.cols_width());
        let mut cols = vec![T::zero(); self.patch() * width];
        for b in 0..self.batch {
            for c in 0..self.in_ch {
                let plane = &x[(b * self.in_ch + c) * self.h * self.w..][..self.h * self.w];
                for ky in 0..self.kh {
                    for kx in 0..self.kw {
                        let row = (c * self.kh + ky) * self.kw + kx;
                        let dst = &mut cols[row * width + b * area..][..area];
                        for oy in 0..oh {
                            let src = &plane[(oy + ky) * self.w + kx..][..ow];
                            dst[oy * ow..][..ow].copy_from_slice(src);
                        }
                    }
                }
            }
        }
        cols
    }

    fn forward<T: Scalar>(&self, w: &[T], cols: &[T], out: &mut [T]) {
        let (area, width, patch) = (self.out_area(), self.cols_width(), self.patch());
        // [out_ch, patch] x [patch, batch*area] written as [batch, out_ch, area].
        for b in 0..self.batch {
            let cb = &cols[b * area..];
            let ob = &mut out[b * self.out_ch * area..][..self.out_ch * area];
            T::gemm(self.out_ch, patch, area, T::one(), w, (patch, 1), cb, (width, 1), T::zero(), ob, (area, 1));
        }
    }

    fn weight_grad<T: Scalar>(&self, up: &[T], cols: &[T]) -> Vec<T> {
        let (area, width, patch) = (self.out_area(), self.cols_width(), self.patch());
        let mut dw = vec![T::zero(); self.out_ch * patch];
        for b in 0..self.batch {
            let ub = &up[b * self.out_ch * area..][..self.out_ch * area];
            let cb = &cols[b * area..];
            // [out_ch, area] x [area, patch]
            T::gemm(self.out_ch, area, patch, T::one(), ub, (area, 1), cb, (1, width), T::one(), &mut dw, (patch, 1));
        }
        dw
    }

    fn input_grad<T: Scalar>(&self, w: &[T], up: &[T]) -> Vec<T> {
        let (oh, ow, area, patch) = (self.oh(), self.ow(), self.out_area(), self.patch());
        let mut dx = vec![T::zero(); self.batch * self.in_ch * self.h * self.w];
        let mut dcols = vec![T::zero(); patch * area];
        for b in 0..self.batch {
            let ub = &up[b * self.out_ch * area..][..self.out_ch * area];
            // [patch, out_ch] x [out_ch, area]
            T::gemm(patch, self.out_ch, area, T::one(), w, (1, patch), ub, (area, 1), T::zero(), &mut dcols, (area, 1));
            for c in 0..self.in_ch {
                let plane = &mut dx[(b * self.in_ch + c) * self.h * self.w..][..self.h * self.w];
                for ky in 0..self.kh {
                    for kx in 0..self.kw {
                        let row = (c * self.kh + ky) * self.kw + kx;
                        let src = &dcols[row * area..][..area];
                        for oy in 0..oh {
                            let dst = &mut plane[(oy + ky) * self.w + kx..][..ow];
                            for (d, &s) in dst.iter_mut().zip(&src[oy * ow..][..ow]) {
                                *d += s;
                            }
                        }
                    }
                }
            }
        }
        dx
    }
}

impl<'g, T: Scalar> Add for Var<'g, T> {
    type Output = Var<'g, T>;

    fn add(self, rhs: Self) -> Self::Output {
        self.try_add(rhs).expect("add: shape mismatch")
    }
}

impl<'g, T: Scalar> Sub for Var<'g, T> {
    type Output = Var<'g, T>;

    fn sub(self, rhs: Self) -> Self::Output {
        self.try_sub(rhs).expect("sub: shape mismatch")
    }
}

impl<'g, T: Scalar> Mul for Var<'g, T> {
    type Output = Var<'g, T>;

    fn mul(self, rhs: Self) -> Self::Output {
        self.try_mul(rhs).expect("mul: shape mismatch")
    }
}

impl<'g, T: Scalar> Neg for Var<'g, T> {
    type Output = Var<'g, T>;

    fn neg(self) -> Self::Output {
        self.mul_scalar(-T::one())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::finite_difference_grad;
    use crate::rng::Rng;

    fn t(v: &[f64]) -> Tensor<f64> {
        Tensor::from_f64s(v)
    }

    #[test]
    fn elementwise_examples() {
        let g = Graph::<f64>::new();
        let a = g.constant(t(&[1.0, 2.0]));
        let b = g.constant(t(&[3.0, 4.0]));
        assert_eq!((a + b).value().data(), &[4.0, 6.0]);
        assert_eq!(a.mul_scalar(0.0).value().data(), &[0.0, 0.0]);
        let c = g.constant(t(&[1.0, -2.0]));
        let z = g.constant(t(&[0.0, 0.0]));
        assert_eq!(c.max(z).unwrap().value().data(), &[1.0, 0.0]);
    }

    #[test]
    fn elementwise_shape_mismatch_is_an_error() {
        let g = Graph::<f64>::new();
        let a = g.constant(t(&[1.0, 2.0]));
        let b = g.constant(t(&[1.0, 2.0, 3.0]));
        assert!(matches!(a.try_add(b), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn conv2d_matches_direct_loops() {
        let mut rng = Rng::new(7);
        let x: Tensor<f64> = rng.uniform_tensor(&[2, 3, 5, 4], -1.0, 1.0);
        let w: Tensor<f64> = rng.uniform_tensor(&[4, 3, 3, 2], -1.0, 1.0);
        let g = Graph::new();
        let out = g.constant(x.clone()).conv2d(g.constant(w.clone())).unwrap().value();
        assert_eq!(out.shape(), &[2, 4, 3, 3]);
        for b in 0..2 {
            for o in 0..4 {
                for oy in 0..3 {
                    for ox in 0..3 {
                        let mut s = 0.0;
                        for c in 0..3 {
                            for ky in 0..3 {
                                for kx in 0..2 {
                                    s += x.data()[((b * 3 + c) * 5 + oy + ky) * 4 + ox + kx]
                                        * w.data()[((o * 3 + c) * 3 + ky) * 2 + kx];
                                }
                            }
                        }
                        let got = out.data()[((b * 4 + o) * 3 + oy) * 3 + ox];
                        assert!((got - s).abs() < 1e-12);
                    }
                }
            }
        }
    }

    fn check_grad(f: impl for<'g> Fn(&'g Graph<f64>, Var<'g, f64>) -> Var<'g, f64>, x: &Tensor<f64>) {
        let g = Graph::new();
        let v = g.leaf(x.clone());
        let root = f(&g, v);
        let analytic = g.backward(root).unwrap().get_or_zeros(v, x);
        let numeric = finite_difference_grad(
            |y| {
                let g = Graph::new();
                let v = g.constant(y.clone());
                f(&g, v).value().item()
            },
            x,
            1e-5,
        );
        let err = crate::autodiff::relative_error(&analytic, &numeric);
        assert!(err < 1e-6, "relative error {err}");
    }

    #[test]
    fn conv_and_linear_gradients_match_finite_differences() {
        let mut rng = Rng::new(11);
        let w: Tensor<f64> = rng.uniform_tensor(&[2, 2, 2, 2], -1.0, 1.0);
        let x: Tensor<f64> = rng.uniform_tensor(&[2, 2, 4, 3], -1.0, 1.0);
        let probe: Tensor<f64> = rng.uniform_tensor(&[2, 2, 3, 2], -1.0, 1.0);
        let (w2, p2) = (w.clone(), probe.clone());
        check_grad(move |g, v| v.conv2d(g.constant(w2.clone())).unwrap().dot_const(&p2).unwrap(), &x);
        let (x2, p3) = (x.clone(), probe.clone());
        check_grad(move |g, v| g.constant(x2.clone()).conv2d(v).unwrap().dot_const(&p3).unwrap(), &w);

        let lw: Tensor<f64> = rng.uniform_tensor(&[4, 3], -1.0, 1.0);
        let lb: Tensor<f64> = rng.uniform_tensor(&[3], -1.0, 1.0);
        let lx: Tensor<f64> = rng.uniform_tensor(&[2, 4], -1.0, 1.0);
        let (a, b) = (lw.clone(), lb.clone());
        check_grad(
            move |g, v| v.linear(g.constant(a.clone()), g.constant(b.clone())).unwrap().softmax_cross_entropy(&[2, 0], 0.5).unwrap(),
            &lx,
        );
        let (x3, b3) = (lx.clone(), lb.clone());
        check_grad(
            move |g, v| g.constant(x3.clone()).linear(v, g.constant(b3.clone())).unwrap().softmax_cross_entropy(&[1, 1], 1.0).unwrap(),
            &lw,
        );
    }

    #[test]
    fn channel_scale_and_bias_gradients() {
        let mut rng = Rng::new(3);
        let x: Tensor<f64> = rng.uniform_tensor(&[2, 3, 2, 2], -1.0, 1.0);
        let beta: Tensor<f64> = rng.uniform_tensor(&[3], -1.0, 1.0);
        let probe: Tensor<f64> = rng.uniform_tensor(&[2, 3, 2, 2], -1.0, 1.0);
        let (xc, pc) = (x.clone(), probe.clone());
        check_grad(move |g, v| g.constant(xc.clone()).scale_channels(v, 2).unwrap().dot_const(&pc).unwrap(), &beta);
        let (bc, pc) = (beta.clone(), probe.clone());
        check_grad(move |g, v| v.add_channel_bias(g.constant(bc.clone()), 2).unwrap().dot_const(&pc).unwrap(), &x);
        let (xc, pc) = (x.clone(), probe.clone());
        check_grad(move |g, v| g.constant(xc.clone()).add_channel_bias(v, 2).unwrap().dot_const(&pc).unwrap(), &beta);
    }
}
