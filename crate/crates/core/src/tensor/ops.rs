//! Operation set: elementwise arithmetic with broadcasting, matrix products,
//! convolution, activations, softmax, shape ops, reductions, bilinear
//! resampling, and a custom-op hook for operations with hand-written
//! backward rules.

use super::broadcast::{acc_reduced, broadcast_shapes, zip_broadcast};
use super::{col2im, im2col, mm_nn, mm_nt, mm_tn};
use super::{BackFn, Tape, Tensor};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn same_tape<S: Scalar>(a: &Tensor<'_, S>, b: &Tensor<'_, S>) {
    assert!(
        std::ptr::eq(a.tape(), b.tape()),
        "tensors from different tapes combined in one op"
    );
}

#[derive(Clone, Copy)]
enum BinKind {
    Add,
    Sub,
    Mul,
    Div,
}

impl<'t, S: Scalar> Tensor<'t, S> {
    fn binary(&self, rhs: &Tensor<'t, S>, kind: BinKind, op_name: &'static str) -> Result<Tensor<'t, S>> {
        same_tape(self, rhs);
        let a_shape = self.shape();
        let b_shape = rhs.shape();
        let out_shape = broadcast_shapes(&a_shape, &b_shape).ok_or(Error::ShapeMismatch {
            op: op_name,
            lhs: a_shape.clone(),
            rhs: b_shape.clone(),
        })?;
        let value = self.with_value(|a| {
            rhs.with_value(|b| {
                zip_broadcast(a, &a_shape, b, &b_shape, &out_shape, |x, y| match kind {
                    BinKind::Add => x + y,
                    BinKind::Sub => x - y,
                    BinKind::Mul => x * y,
                    BinKind::Div => x / y,
                })
            })
        });
        let rg = self.requires_grad() || rhs.requires_grad();
        let (a_id, b_id) = (self.id(), rhs.id());
        let back: Option<BackFn<S>> = if rg {
            let (osh, ash, bsh) = (out_shape.clone(), a_shape, b_shape);
            Some(Box::new(move |ctx, g, grads| {
                match kind {
                    BinKind::Add => {
                        if ctx.needs_grad(a_id) {
                            acc_reduced(grads, a_id, g, &osh, &ash);
                        }
                        if ctx.needs_grad(b_id) {
                            acc_reduced(grads, b_id, g, &osh, &bsh);
                        }
                    }
                    BinKind::Sub => {
                        if ctx.needs_grad(a_id) {
                            acc_reduced(grads, a_id, g, &osh, &ash);
                        }
                        if ctx.needs_grad(b_id) {
                            let neg: Vec<S> = g.iter().map(|&x| -x).collect();
                            acc_reduced(grads, b_id, &neg, &osh, &bsh);
                        }
                    }
                    BinKind::Mul => {
                        if ctx.needs_grad(a_id) {
                            let da = zip_broadcast(g, &osh, ctx.val(b_id), &bsh, &osh, |x, y| x * y);
                            acc_reduced(grads, a_id, &da, &osh, &ash);
                        }
                        if ctx.needs_grad(b_id) {
                            let db = zip_broadcast(g, &osh, ctx.val(a_id), &ash, &osh, |x, y| x * y);
                            acc_reduced(grads, b_id, &db, &osh, &bsh);
                        }
                    }
                    BinKind::Div => {
                        if ctx.needs_grad(a_id) {
                            let da = zip_broadcast(g, &osh, ctx.val(b_id), &bsh, &osh, |x, y| x / y);
                            acc_reduced(grads, a_id, &da, &osh, &ash);
                        }
                        if ctx.needs_grad(b_id) {
                            // d/db (a/b) = -a/b^2
                            let a_over_b2 = zip_broadcast(
                                ctx.val(a_id),
                                &ash,
                                ctx.val(b_id),
                                &bsh,
                                &osh,
                                |x, y| -x / (y * y),
                            );
                            let db: Vec<S> =
                                g.iter().zip(&a_over_b2).map(|(&x, &y)| x * y).collect();
                            acc_reduced(grads, b_id, &db, &osh, &bsh);
                        }
                    }
                }
            }))
        } else {
            None
        };
        Ok(self.tape().push(out_shape, value, rg, back))
    }

    pub fn add(&self, rhs: &Tensor<'t, S>) -> Result<Tensor<'t, S>> {
        self.binary(rhs, BinKind::Add, "add")
    }

    pub fn sub(&self, rhs: &Tensor<'t, S>) -> Result<Tensor<'t, S>> {
        self.binary(rhs, BinKind::Sub, "sub")
    }

    pub fn mul(&self, rhs: &Tensor<'t, S>) -> Result<Tensor<'t, S>> {
        self.binary(rhs, BinKind::Mul, "mul")
    }

    pub fn div(&self, rhs: &Tensor<'t, S>) -> Result<Tensor<'t, S>> {
        self.binary(rhs, BinKind::Div, "div")
    }

    fn unary(
        &self,
        f: impl Fn(S) -> S,
        dfdx: impl Fn(S, S) -> S + 'static, // (x, y) -> dy/dx
    ) -> Tensor<'t, S> {
        let shape = self.shape();
        let value: Vec<S> = self.with_value(|x| x.iter().map(|&v| f(v)).collect());
        let rg = self.requires_grad();
        let x_id = self.id();
        let out_id = self.tape().next_id();
        let back: Option<BackFn<S>> = if rg {
            Some(Box::new(move |ctx, g, grads| {
                let x = ctx.val(x_id);
                let y = ctx.val(out_id);
                let dx: Vec<S> =
                    g.iter().zip(x.iter().zip(y)).map(|(&gi, (&xi, &yi))| gi * dfdx(xi, yi)).collect();
                grads.acc_owned(x_id, dx);
            }))
        } else {
            None
        };
        self.tape().push(shape, value, rg, back)
    }

    pub fn relu(&self) -> Tensor<'t, S> {
        self.unary(
            |x| if x > S::zero() { x } else { S::zero() },
            |x, _y| if x > S::zero() { S::one() } else { S::zero() },
        )
    }

    pub fn sigmoid(&self) -> Tensor<'t, S> {
        self.unary(|x| S::one() / (S::one() + (-x).exp()), |_x, y| y * (S::one() - y))
    }

    /// Natural log. Callers clamp first when the argument can approach zero.
    pub fn log(&self) -> Tensor<'t, S> {
        self.unary(|x| x.ln(), |x, _y| S::one() / x)
    }

    pub fn sqrt(&self) -> Tensor<'t, S> {
        self.unary(|x| x.sqrt(), |_x, y| S::one() / (S::c(2.0) * y))
    }

    /// max(x, c); gradient is passed through only where x > c.
    pub fn clamp_min(&self, c: f64) -> Tensor<'t, S> {
        let cv = S::c(c);
        self.unary(
            move |x| if x > cv { x } else { cv },
            move |x, _y| if x > cv { S::one() } else { S::zero() },
        )
    }

    pub fn neg(&self) -> Tensor<'t, S> {
        self.mul_scalar(-1.0)
    }

    pub fn mul_scalar(&self, c: f64) -> Tensor<'t, S> {
        let cv = S::c(c);
        self.unary(move |x| x * cv, move |_x, _y| cv)
    }

    pub fn add_scalar(&self, c: f64) -> Tensor<'t, S> {
        let cv = S::c(c);
        self.unary(move |x| x + cv, |_x, _y| S::one())
    }

    /// Matrix product: [m,k]x[k,n] or batched [b,m,k]x[b,k,n].
    pub fn matmul(&self, rhs: &Tensor<'t, S>) -> Result<Tensor<'t, S>> {
        same_tape(self, rhs);
        let a_shape = self.shape();
        let b_shape = rhs.shape();
        let (batch, m, k, n) = match (a_shape.len(), b_shape.len()) {
            (2, 2) => {
                if a_shape[1] != b_shape[0] {
                    return Err(Error::InnerDimMismatch { lhs: a_shape, rhs: b_shape });
                }
                (1, a_shape[0], a_shape[1], b_shape[1])
            }
            (3, 3) => {
                if a_shape[0] != b_shape[0] || a_shape[2] != b_shape[1] {
                    return Err(Error::InnerDimMismatch { lhs: a_shape, rhs: b_shape });
                }
                (a_shape[0], a_shape[1], a_shape[2], b_shape[2])
            }
            _ => {
                return Err(Error::invalid_shape(
                    "matmul",
                    format!("expects 2-D or batched 3-D operands, got {:?} x {:?}", a_shape, b_shape),
                ))
            }
        };
        let out_shape = if a_shape.len() == 2 { vec![m, n] } else { vec![batch, m, n] };
        let mut value = vec![S::zero(); batch * m * n];
        self.with_value(|a| {
            rhs.with_value(|b| {
                for bi in 0..batch {
                    mm_nn(
                        &a[bi * m * k..(bi + 1) * m * k],
                        &b[bi * k * n..(bi + 1) * k * n],
                        &mut value[bi * m * n..(bi + 1) * m * n],
                        m,
                        k,
                        n,
                    );
                }
            })
        });
        let rg = self.requires_grad() || rhs.requires_grad();
        let (a_id, b_id) = (self.id(), rhs.id());
        let back: Option<BackFn<S>> = if rg {
            Some(Box::new(move |ctx, g, grads| {
                let a = ctx.val(a_id);
                let b = ctx.val(b_id);
                if ctx.needs_grad(a_id) {
                    let mut da = vec![S::zero(); batch * m * k];
                    for bi in 0..batch {
                        mm_nt(
                            &g[bi * m * n..(bi + 1) * m * n],
                            &b[bi * k * n..(bi + 1) * k * n],
                            &mut da[bi * m * k..(bi + 1) * m * k],
                            m,
                            n,
                            k,
                        );
                    }
                    grads.acc_owned(a_id, da);
                }
                if ctx.needs_grad(b_id) {
                    let mut db = vec![S::zero(); batch * k * n];
                    for bi in 0..batch {
                        mm_tn(
                            &a[bi * m * k..(bi + 1) * m * k],
                            &g[bi * m * n..(bi + 1) * m * n],
                            &mut db[bi * k * n..(bi + 1) * k * n],
                            m,
                            k,
                            n,
                        );
                    }
                    grads.acc_owned(b_id, db);
                }
            }))
        } else {
            None
        };
        Ok(self.tape().push(out_shape, value, rg, back))
    }

    pub fn transpose2d(&self) -> Result<Tensor<'t, S>> {
        let shape = self.shape();
        if shape.len() != 2 {
            return Err(Error::invalid_shape("transpose2d", format!("expects rank 2, got {:?}", shape)));
        }
        let (r, c) = (shape[0], shape[1]);
        let mut value = vec![S::zero(); r * c];
        self.with_value(|x| {
            for i in 0..r {
                for j in 0..c {
                    value[j * r + i] = x[i * c + j];
                }
            }
        });
        let rg = self.requires_grad();
        let x_id = self.id();
        let back: Option<BackFn<S>> = if rg {
            Some(Box::new(move |_ctx, g, grads| {
                let mut dx = vec![S::zero(); r * c];
                for j in 0..c {
                    for i in 0..r {
                        dx[i * c + j] = g[j * r + i];
                    }
                }
                grads.acc_owned(x_id, dx);
            }))
        } else {
            None
        };
        Ok(self.tape().push(vec![c, r], value, rg, back))
    }

    /// Cross-correlation of x[C_in,H,W] with w[C_out,C_in,k,k]. Odd k only;
    /// output spatial size must divide out exactly.
    pub fn conv2d(&self, weight: &Tensor<'t, S>, stride: usize, pad: usize) -> Result<Tensor<'t, S>> {
        same_tape(self, weight);
        let x_shape = self.shape();
        let w_shape = weight.shape();
        if x_shape.len() != 3 || w_shape.len() != 4 {
            return Err(Error::invalid_shape(
                "conv2d",
                format!("expects x[C,H,W], w[Co,Ci,k,k]; got {:?}, {:?}", x_shape, w_shape),
            ));
        }
        let (ci, h, w) = (x_shape[0], x_shape[1], x_shape[2]);
        let (co, wci, kh, kw) = (w_shape[0], w_shape[1], w_shape[2], w_shape[3]);
        if wci != ci {
            return Err(Error::ShapeMismatch { op: "conv2d", lhs: x_shape, rhs: w_shape });
        }
        if kh != kw || kh % 2 == 0 {
            return Err(Error::invalid_shape("conv2d", format!("kernel must be odd square, got {kh}x{kw}")));
        }
        if stride == 0 {
            return Err(Error::invalid_arg("conv2d", "stride must be >= 1"));
        }
        let k = kh;
        if (h + 2 * pad) < k || (w + 2 * pad) < k || (h + 2 * pad - k) % stride != 0 || (w + 2 * pad - k) % stride != 0
        {
            return Err(Error::invalid_shape(
                "conv2d",
                format!("non-integer output size for {h}x{w}, k={k}, stride={stride}, pad={pad}"),
            ));
        }
        let ho = (h + 2 * pad - k) / stride + 1;
        let wo = (w + 2 * pad - k) / stride + 1;
        let span = ho * wo;
        let mut value = vec![S::zero(); co * span];
        self.with_value(|x| {
            weight.with_value(|wv| {
                let cols = im2col(x, ci, h, w, k, stride, pad, ho, wo);
                mm_nn(wv, &cols, &mut value, co, ci * k * k, span);
            })
        });
        let rg = self.requires_grad() || weight.requires_grad();
        let (x_id, w_id) = (self.id(), weight.id());
        let back: Option<BackFn<S>> = if rg {
            Some(Box::new(move |ctx, g, grads| {
                // Columns are recomputed here rather than cached: the graphs in
                // this crate call conv dozens of times per pass and the cache
                // would dominate memory.
                let x = ctx.val(x_id);
                let wv = ctx.val(w_id);
                let cols = im2col(x, ci, h, w, k, stride, pad, ho, wo);
                if ctx.needs_grad(w_id) {
                    let mut dw = vec![S::zero(); co * ci * k * k];
                    mm_nt(g, &cols, &mut dw, co, span, ci * k * k);
                    grads.acc_owned(w_id, dw);
                }
                if ctx.needs_grad(x_id) {
                    let mut dcols = vec![S::zero(); ci * k * k * span];
                    mm_tn(wv, g, &mut dcols, co, ci * k * k, span);
                    let dx = col2im(&dcols, ci, h, w, k, stride, pad, ho, wo);
                    grads.acc_owned(x_id, dx);
                }
            }))
        } else {
            None
        };
        Ok(self.tape().push(vec![co, ho, wo], value, rg, back))
    }

    /// Numerically stable softmax along `axis` (max-subtraction).
    pub fn softmax(&self, axis: usize) -> Result<Tensor<'t, S>> {
        let shape = self.shape();
        if axis >= shape.len() {
            return Err(Error::invalid_arg(
                "softmax",
                format!("axis {axis} out of range for shape {:?}", shape),
            ));
        }
        let axis_len = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let outer: usize = shape[..axis].iter().product();
        let mut value = vec![S::zero(); outer * axis_len * inner];
        self.with_value(|x| {
            for o in 0..outer {
                for i in 0..inner {
                    let base = o * axis_len * inner + i;
                    let mut mx = S::neg_infinity();
                    for a in 0..axis_len {
                        mx = mx.max(x[base + a * inner]);
                    }
                    let mut sum = S::zero();
                    for a in 0..axis_len {
                        let e = (x[base + a * inner] - mx).exp();
                        value[base + a * inner] = e;
                        sum = sum + e;
                    }
                    for a in 0..axis_len {
                        value[base + a * inner] = value[base + a * inner] / sum;
                    }
                }
            }
        });
        let rg = self.requires_grad();
        let x_id = self.id();
        let out_id = self.tape().next_id();
        let back: Option<BackFn<S>> = if rg {
            Some(Box::new(move |ctx, g, grads| {
                let y = ctx.val(out_id);
                let mut dx = vec![S::zero(); g.len()];
                for o in 0..outer {
                    for i in 0..inner {
                        let base = o * axis_len * inner + i;
                        let mut dot = S::zero();
                        for a in 0..axis_len {
                            let idx = base + a * inner;
                            dot = dot + g[idx] * y[idx];
                        }
                        for a in 0..axis_len {
                            let idx = base + a * inner;
                            dx[idx] = y[idx] * (g[idx] - dot);
                        }
                    }
                }
                grads.acc_owned(x_id, dx);
            }))
        } else {
            None
        };
        Ok(self.tape().push(shape, value, rg, back))
    }

    pub fn reshape(&self, new_shape: &[usize]) -> Result<Tensor<'t, S>> {
        let n: usize = new_shape.iter().product();
        if n != self.numel() {
            return Err(Error::invalid_shape(
                "reshape",
                format!("cannot view {:?} ({} elems) as {:?} ({n} elems)", self.shape(), self.numel(), new_shape),
            ));
        }
        let value = self.value();
        let rg = self.requires_grad();
        let x_id = self.id();
        let back: Option<BackFn<S>> = if rg {
            Some(Box::new(move |_ctx, g, grads| {
                grads.acc(x_id, g);
            }))
        } else {
            None
        };
        Ok(self.tape().push(new_shape.to_vec(), value, rg, back))
    }

    pub fn sum_all(&self) -> Tensor<'t, S> {
        let total = self.with_value(|x| x.iter().fold(S::zero(), |a, &b| a + b));
        let rg = self.requires_grad();
        let x_id = self.id();
        let n = self.numel();
        let back: Option<BackFn<S>> = if rg {
            Some(Box::new(move |_ctx, g, grads| {
                grads.acc_owned(x_id, vec![g[0]; n]);
            }))
        } else {
            None
        };
        self.tape().push(vec![1], vec![total], rg, back)
    }

    pub fn mean_all(&self) -> Tensor<'t, S> {
        let n = self.numel();
        self.sum_all().mul_scalar(1.0 / n as f64)
    }

    /// Mean over the trailing `k` dimensions, kept as size-1 dims.
    pub fn mean_trailing(&self, k: usize) -> Result<Tensor<'t, S>> {
        let shape = self.shape();
        if k == 0 || k > shape.len() {
            return Err(Error::invalid_arg("mean_trailing", format!("k={k} for rank {}", shape.len())));
        }
        let lead: usize = shape[..shape.len() - k].iter().product();
        let tail: usize = shape[shape.len() - k..].iter().product();
        let inv = S::c(1.0 / tail as f64);
        let mut value = vec![S::zero(); lead];
        self.with_value(|x| {
            for l in 0..lead {
                let mut acc = S::zero();
                for t in 0..tail {
                    acc = acc + x[l * tail + t];
                }
                value[l] = acc * inv;
            }
        });
        let mut out_shape = shape[..shape.len() - k].to_vec();
        out_shape.extend(std::iter::repeat(1).take(k));
        let rg = self.requires_grad();
        let x_id = self.id();
        let back: Option<BackFn<S>> = if rg {
            Some(Box::new(move |_ctx, g, grads| {
                let mut dx = vec![S::zero(); lead * tail];
                for l in 0..lead {
                    let gl = g[l] * inv;
                    for t in 0..tail {
                        dx[l * tail + t] = gl;
                    }
                }
                grads.acc_owned(x_id, dx);
            }))
        } else {
            None
        };
        Ok(self.tape().push(out_shape, value, rg, back))
    }

    /// Bilinear resample of [C,h,w] to [C,H,W], align-corners-false.
    pub fn bilinear_resize(&self, out_h: usize, out_w: usize) -> Result<Tensor<'t, S>> {
        let shape = self.shape();
        if shape.len() != 3 {
            return Err(Error::invalid_shape("bilinear_resize", format!("expects [C,h,w], got {:?}", shape)));
        }
        if out_h == 0 || out_w == 0 {
            return Err(Error::invalid_arg("bilinear_resize", "zero-size target"));
        }
        let (c, h, w) = (shape[0], shape[1], shape[2]);
        let taps = bilinear_taps(h, w, out_h, out_w);
        let mut value = vec![S::zero(); c * out_h * out_w];
        self.with_value(|x| {
            for ch in 0..c {
                let src = &x[ch * h * w..(ch + 1) * h * w];
                let dst = &mut value[ch * out_h * out_w..(ch + 1) * out_h * out_w];
                for (o, tap) in taps.iter().enumerate() {
                    let mut acc = S::zero();
                    for &(idx, wgt) in tap {
                        acc = acc + src[idx] * S::c(wgt);
                    }
                    dst[o] = acc;
                }
            }
        });
        let rg = self.requires_grad();
        let x_id = self.id();
        let back: Option<BackFn<S>> = if rg {
            Some(Box::new(move |_ctx, g, grads| {
                let taps = bilinear_taps(h, w, out_h, out_w);
                let mut dx = vec![S::zero(); c * h * w];
                for ch in 0..c {
                    let gsrc = &g[ch * out_h * out_w..(ch + 1) * out_h * out_w];
                    let dxc = &mut dx[ch * h * w..(ch + 1) * h * w];
                    for (o, tap) in taps.iter().enumerate() {
                        for &(idx, wgt) in tap {
                            dxc[idx] = dxc[idx] + gsrc[o] * S::c(wgt);
                        }
                    }
                }
                grads.acc_owned(x_id, dx);
            }))
        } else {
            None
        };
        Ok(self.tape().push(vec![c, out_h, out_w], value, rg, back))
    }
}

/// Interpolation taps for one output position: up to 4 (source index, weight)
/// pairs under the align-corners-false convention.
fn bilinear_taps(h: usize, w: usize, out_h: usize, out_w: usize) -> Vec<Vec<(usize, f64)>> {
    let mut taps = Vec::with_capacity(out_h * out_w);
    let sy = h as f64 / out_h as f64;
    let sx = w as f64 / out_w as f64;
    for oy in 0..out_h {
        let fy = ((oy as f64 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let wy = fy - y0 as f64;
        for ox in 0..out_w {
            let fx = ((ox as f64 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let wx = fx - x0 as f64;
            taps.push(vec![
                (y0 * w + x0, (1.0 - wy) * (1.0 - wx)),
                (y0 * w + x1, (1.0 - wy) * wx),
                (y1 * w + x0, wy * (1.0 - wx)),
                (y1 * w + x1, wy * wx),
            ]);
        }
    }
    taps
}

/// Concatenate along `axis`. All other dimensions must agree.
pub fn concat<'t, S: Scalar>(parts: &[Tensor<'t, S>], axis: usize) -> Result<Tensor<'t, S>> {
    if parts.is_empty() {
        return Err(Error::invalid_arg("concat", "empty input list"));
    }
    let tape = parts[0].tape();
    let base_shape = parts[0].shape();
    if axis >= base_shape.len() {
        return Err(Error::invalid_arg("concat", format!("axis {axis} for rank {}", base_shape.len())));
    }
    let mut axis_sizes = Vec::with_capacity(parts.len());
    for p in parts {
        same_tape(&parts[0], p);
        let s = p.shape();
        if s.len() != base_shape.len()
            || s.iter().enumerate().any(|(i, &d)| i != axis && d != base_shape[i])
        {
            return Err(Error::ShapeMismatch { op: "concat", lhs: base_shape, rhs: s });
        }
        axis_sizes.push(s[axis]);
    }
    let total_axis: usize = axis_sizes.iter().sum();
    let mut out_shape = base_shape.clone();
    out_shape[axis] = total_axis;
    let outer: usize = base_shape[..axis].iter().product();
    let inner: usize = base_shape[axis + 1..].iter().product();
    let mut value = vec![S::zero(); outer * total_axis * inner];
    let mut offset = 0usize;
    for (p, &alen) in parts.iter().zip(&axis_sizes) {
        p.with_value(|x| {
            for o in 0..outer {
                let src = o * alen * inner;
                let dst = (o * total_axis + offset) * inner;
                value[dst..dst + alen * inner].copy_from_slice(&x[src..src + alen * inner]);
            }
        });
        offset += alen;
    }
    let rg = parts.iter().any(|p| p.requires_grad());
    let ids: Vec<usize> = parts.iter().map(|p| p.id()).collect();
    let back: Option<BackFn<S>> = if rg {
        let sizes = axis_sizes.clone();
        Some(Box::new(move |ctx, g, grads| {
            let mut offset = 0usize;
            for (&id, &alen) in ids.iter().zip(&sizes) {
                if ctx.needs_grad(id) {
                    let mut dp = vec![S::zero(); outer * alen * inner];
                    for o in 0..outer {
                        let src = (o * total_axis + offset) * inner;
                        let dst = o * alen * inner;
                        dp[dst..dst + alen * inner].copy_from_slice(&g[src..src + alen * inner]);
                    }
                    grads.acc_owned(id, dp);
                }
                offset += alen;
            }
        }))
    } else {
        None
    };
    Ok(tape.push(out_shape, value, rg, back))
}

impl<S: Scalar> Tape<S> {
    /// Custom differentiable op over two inputs. `back` receives the output
    /// gradient and both input values, and fills caller-allocated input
    /// gradient buffers.
    pub fn custom2<'t, F>(
        &'t self,
        a: &Tensor<'t, S>,
        b: &Tensor<'t, S>,
        out_shape: Vec<usize>,
        out_value: Vec<S>,
        back: F,
    ) -> Tensor<'t, S>
    where
        F: Fn(&[S], &[S], &[S], &mut [S], &mut [S]) + 'static,
    {
        same_tape(a, b);
        let rg = a.requires_grad() || b.requires_grad();
        let (a_id, b_id) = (a.id(), b.id());
        let (a_n, b_n) = (a.numel(), b.numel());
        let back_fn: Option<BackFn<S>> = if rg {
            Some(Box::new(move |ctx, g, grads| {
                let mut da = vec![S::zero(); a_n];
                let mut db = vec![S::zero(); b_n];
                back(g, ctx.val(a_id), ctx.val(b_id), &mut da, &mut db);
                if ctx.needs_grad(a_id) {
                    grads.acc_owned(a_id, da);
                }
                if ctx.needs_grad(b_id) {
                    grads.acc_owned(b_id, db);
                }
            }))
        } else {
            None
        };
        self.push(out_shape, out_value, rg, back_fn)
    }
}

