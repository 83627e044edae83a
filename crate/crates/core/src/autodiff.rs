//! Tape-based reverse-mode differentiation over real tensors.
//!
//! Every node holds a real [`Tensor`]. Complex quantities travel in planar
//! form (`[2, ..]`, real plane first), and the complex-aware operations
//! ([`Graph::cmatmul`], [`Graph::soft_threshold`], [`Graph::magnitude`])
//! carry the paired-real adjoint rules. A complex leaf therefore receives
//! a planar gradient: `dL/dRe` in plane 0 and `dL/dIm` in plane 1.
//!
//! Nodes are appended in evaluation order, so the tape is already a
//! topological order and [`Graph::backward`] is a single reverse sweep.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::kernels;
use crate::tensor::{RotationMap, Tensor};

use crate::tensor::ops::ConvGeom;

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Affine { x: Var, scale: T },
    ScaleBy { x: Var, s: Var },
    CMatMul { a: Var, b: Var, n: usize, k: usize, m: usize },
    Conv2d { x: Var, w: Var, b: Option<Var>, geom: ConvGeom },
    Relu(Var),
    SoftThreshold { v: Var, t: Var },
    Magnitude(Var),
    Rotate { x: Var, map: Arc<RotationMap<T>> },
    SumSquares(Var),
    Sum(Var),
    Concat(Vec<Var>),
    Slice { x: Var, start: usize },
    Reshape(Var),
    PadReflect { x: Var },
    Crop { x: Var },
    AvgPool2(Var),
    Upsample2(Var),
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
    name: Option<String>,
}

/// A computation tape.
#[derive(Debug, Default)]
pub struct Graph<T: Scalar = f64> {
    nodes: Vec<Node<T>>,
}

/// Gradients of a scalar loss with respect to the trainable leaves.
#[derive(Debug, Clone)]
pub struct Gradients<T: Scalar = f64> {
    by_var: BTreeMap<Var, Tensor<T>>,
    names: BTreeMap<String, Var>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.by_var.get(&v)
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor<T>> {
        self.names.get(name).and_then(|v| self.by_var.get(v))
    }

    /// Parameter name to gradient, for every named trainable leaf.
    pub fn named(&self) -> BTreeMap<String, Tensor<T>> {
        self.names
            .iter()
            .filter_map(|(n, v)| self.by_var.get(v).map(|g| (n.clone(), g.clone())))
            .collect()
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Non-trainable input.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: false,
            name: None,
        });
        Var(self.nodes.len() - 1)
    }

    /// Trainable leaf, reported under `name` by [`Gradients::named`].
    pub fn param(&mut self, name: impl Into<String>, value: Tensor<T>) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: true,
            name: Some(name.into()),
        });
        Var(self.nodes.len() - 1)
    }

    /// Trainable unnamed leaf.
    pub fn variable(&mut self, value: Tensor<T>) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: true,
            name: None,
        });
        Var(self.nodes.len() - 1)
    }

    /// Copy of `v` that blocks gradient flow.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.value(v).clone();
        self.constant(value)
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, parents: &[Var], name: &'static str) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: name });
        }
        let requires_grad = parents.iter().any(|p| self.nodes[p.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            name: None,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn same_shape(&self, a: Var, b: Var, op: &'static str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(
                op,
                format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            ));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y)?;
        self.push(v, Op::Add(a, b), &[a, b], "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "sub")?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x - y)?;
        self.push(v, Op::Sub(a, b), &[a, b], "sub")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y)?;
        self.push(v, Op::Mul(a, b), &[a, b], "mul")
    }

    /// `scale * x + shift`, elementwise with constant coefficients.
    pub fn affine(&mut self, x: Var, scale: T, shift: T) -> Result<Var> {
        let v = self.value(x).map(|e| scale * e + shift);
        self.push(v, Op::Affine { x, scale }, &[x], "affine")
    }

    pub fn scale(&mut self, x: Var, scale: T) -> Result<Var> {
        self.affine(x, scale, T::zero())
    }

    /// `s * x` where `s` is a one-element node.
    pub fn scale_by(&mut self, x: Var, s: Var) -> Result<Var> {
        if self.value(s).len() != 1 {
            return Err(Error::shape(
                "scale_by",
                format!("scale must have one element, got {:?}", self.shape(s)),
            ));
        }
        let sv = self.value(s).item();
        let v = self.value(x).map(|e| sv * e);
        self.push(v, Op::ScaleBy { x, s }, &[x, s], "scale_by")
    }

    /// Complex product of planar matrices `[2, n, k] x [2, k, m]`.
    pub fn cmatmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != 3 || sb.len() != 3 || sa[0] != 2 || sb[0] != 2 || sa[2] != sb[1] {
            return Err(Error::shape("cmatmul", format!("{sa:?} x {sb:?}")));
        }
        let (n, k, m) = (sa[1], sa[2], sb[2]);
        let (av, bv) = (self.value(a).data(), self.value(b).data());
        let mut out = vec![T::zero(); 2 * n * m];
        let (cr, ci) = out.split_at_mut(n * m);
        kernels::cmatmul_acc(&av[..n * k], &av[n * k..], &bv[..k * m], &bv[k * m..], n, k, m, cr, ci);
        let v = Tensor::new(vec![2, n, m], out)?;
        self.push(v, Op::CMatMul { a, b, n, k, m }, &[a, b], "cmatmul")
    }

    /// Convolution of `[C, H, W]` with `[O, C, k, k]`, optional bias `[O]`.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, pad: usize) -> Result<Var> {
        let geom = ConvGeom::infer(self.shape(x), self.shape(w), pad)?;
        if let Some(b) = b {
            if self.value(b).len() != geom.cout {
                return Err(Error::shape("conv2d", "bias length differs from output channels"));
            }
        }
        let mut out = vec![T::zero(); geom.cout * geom.ho * geom.wo];
        kernels::conv2d_forward(
            &geom,
            self.value(x).data(),
            self.value(w).data(),
            b.map(|b| self.value(b).data()),
            &mut out,
        );
        let v = Tensor::new(vec![geom.cout, geom.ho, geom.wo], out)?;
        let mut parents = vec![x, w];
        parents.extend(b);
        self.push(v, Op::Conv2d { x, w, b, geom }, &parents, "conv2d")
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x).map(|e| e.max(T::zero()));
        self.push(v, Op::Relu(x), &[x], "relu")
    }

    /// Complex soft threshold of planar `v` by a nonnegative map `t` holding
    /// one value per complex entry (or a single value for all entries).
    ///
    /// The derivative is taken as zero wherever `|v| <= t`, including the
    /// kink `|v| = t`.
    pub fn soft_threshold(&mut self, v: Var, t: Var) -> Result<Var> {
        let sv = self.shape(v);
        if sv.first() != Some(&2) {
            return Err(Error::shape("soft_threshold", "input must be planar complex"));
        }
        let n = self.value(v).len() / 2;
        let tl = self.value(t).len();
        if tl != n && tl != 1 {
            return Err(Error::shape(
                "soft_threshold",
                format!("threshold {:?} vs input {:?}", self.shape(t), sv),
            ));
        }
        let (vv, tv) = (self.value(v).data(), self.value(t).data());
        if tv.iter().any(|&e| e < T::zero()) {
            return Err(Error::InvalidArgument(
                "soft_threshold: threshold must be nonnegative".into(),
            ));
        }
        let mut out = vec![T::zero(); 2 * n];
        for i in 0..n {
            let ti = if tl == 1 { tv[0] } else { tv[i] };
            let f = kernels::shrink_factor(vv[i], vv[n + i], ti);
            out[i] = vv[i] * f;
            out[n + i] = vv[n + i] * f;
        }
        let shape = self.shape(v).to_vec();
        let val = Tensor::new(shape, out)?;
        self.push(val, Op::SoftThreshold { v, t }, &[v, t], "soft_threshold")
    }

    /// Elementwise modulus of planar `v`; derivative zero at the origin.
    pub fn magnitude(&mut self, v: Var) -> Result<Var> {
        let sv = self.shape(v).to_vec();
        if sv.first() != Some(&2) {
            return Err(Error::shape("magnitude", "input must be planar complex"));
        }
        let n = self.value(v).len() / 2;
        let d = self.value(v).data();
        let out: Vec<T> = (0..n).map(|i| d[i].hypot(d[n + i])).collect();
        let val = Tensor::new(sv[1..].to_vec(), out)?;
        self.push(val, Op::Magnitude(v), &[v], "magnitude")
    }

    /// Applies `map` to every `[H, W]` plane of `x: [C, H, W]`.
    pub fn rotate(&mut self, x: Var, map: Arc<RotationMap<T>>) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 3 || s[1] != map.height() || s[2] != map.width() {
            return Err(Error::shape(
                "rotate",
                format!("input {s:?} vs map {}x{}", map.height(), map.width()),
            ));
        }
        let plane = s[1] * s[2];
        let src = self.value(x).data();
        let mut out = vec![T::zero(); src.len()];
        for c in 0..s[0] {
            map.apply_plane(&src[c * plane..(c + 1) * plane], &mut out[c * plane..(c + 1) * plane]);
        }
        let v = Tensor::new(s, out)?;
        self.push(v, Op::Rotate { x, map }, &[x], "rotate")
    }

    pub fn sum_squares(&mut self, x: Var) -> Result<Var> {
        let v = Tensor::scalar(self.value(x).sum_sq());
        self.push(v, Op::SumSquares(x), &[x], "sum_squares")
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let v = Tensor::scalar(self.value(x).sum());
        self.push(v, Op::Sum(x), &[x], "sum")
    }

    /// Concatenation along the leading axis.
    pub fn concat(&mut self, xs: &[Var]) -> Result<Var> {
        let first = self
            .shape(*xs.first().ok_or_else(|| Error::InvalidArgument("concat of nothing".into()))?)
            .to_vec();
        let mut lead = 0;
        let mut data = Vec::new();
        for &x in xs {
            let s = self.shape(x);
            if s.len() != first.len() || s[1..] != first[1..] {
                return Err(Error::shape("concat", format!("{s:?} vs {first:?}")));
            }
            lead += s[0];
            data.extend_from_slice(self.value(x).data());
        }
        let mut shape = first;
        shape[0] = lead;
        let v = Tensor::new(shape, data)?;
        self.push(v, Op::Concat(xs.to_vec()), xs, "concat")
    }

    /// `x[start..start + len]` along the leading axis.
    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if start + len > s[0] {
            return Err(Error::shape("slice", format!("{start}+{len} > {}", s[0])));
        }
        let inner: usize = s[1..].iter().product();
        let data = self.value(x).data()[start * inner..(start + len) * inner].to_vec();
        let mut shape = s;
        shape[0] = len;
        let v = Tensor::new(shape, data)?;
        self.push(v, Op::Slice { x, start }, &[x], "slice")
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let v = self.value(x).clone().reshape(shape)?;
        self.push(v, Op::Reshape(x), &[x], "reshape")
    }

    /// Mirror-pads `[C, H, W]` at the bottom and right edge (edge sample
    /// not repeated).
    pub fn pad_reflect(&mut self, x: Var, bottom: usize, right: usize) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 3 || bottom >= s[1] || right >= s[2] {
            return Err(Error::shape("pad_reflect", format!("{s:?} padded by {bottom},{right}")));
        }
        let (c, h, w) = (s[0], s[1], s[2]);
        let (ho, wo) = (h + bottom, w + right);
        let src = self.value(x).data();
        let mut out = vec![T::zero(); c * ho * wo];
        for ch in 0..c {
            for y in 0..ho {
                let sy = reflect(y, h);
                for xx in 0..wo {
                    out[(ch * ho + y) * wo + xx] = src[(ch * h + sy) * w + reflect(xx, w)];
                }
            }
        }
        let v = Tensor::new(vec![c, ho, wo], out)?;
        self.push(v, Op::PadReflect { x }, &[x], "pad_reflect")
    }

    /// Keeps the top-left `h x w` window of `[C, H, W]`.
    pub fn crop(&mut self, x: Var, h: usize, w: usize) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 3 || h > s[1] || w > s[2] {
            return Err(Error::shape("crop", format!("{s:?} to {h}x{w}")));
        }
        let src = self.value(x).data();
        let mut out = Vec::with_capacity(s[0] * h * w);
        for ch in 0..s[0] {
            for y in 0..h {
                let row = (ch * s[1] + y) * s[2];
                out.extend_from_slice(&src[row..row + w]);
            }
        }
        let v = Tensor::new(vec![s[0], h, w], out)?;
        self.push(v, Op::Crop { x }, &[x], "crop")
    }

    /// 2x2 mean pooling of `[C, H, W]` with even `H`, `W`.
    pub fn avg_pool2(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 3 || !s[1].is_multiple_of(2) || !s[2].is_multiple_of(2) {
            return Err(Error::shape("avg_pool2", format!("{s:?}")));
        }
        let (c, h, w) = (s[0], s[1], s[2]);
        let (ho, wo) = (h / 2, w / 2);
        let src = self.value(x).data();
        let quarter = T::lit(0.25);
        let mut out = vec![T::zero(); c * ho * wo];
        for ch in 0..c {
            for y in 0..ho {
                for xx in 0..wo {
                    let i = (ch * h + 2 * y) * w + 2 * xx;
                    out[(ch * ho + y) * wo + xx] =
                        quarter * (src[i] + src[i + 1] + src[i + w] + src[i + w + 1]);
                }
            }
        }
        let v = Tensor::new(vec![c, ho, wo], out)?;
        self.push(v, Op::AvgPool2(x), &[x], "avg_pool2")
    }

    /// Nearest-neighbour 2x upsampling of `[C, H, W]`.
    pub fn upsample2(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 3 {
            return Err(Error::shape("upsample2", format!("{s:?}")));
        }
        let (c, h, w) = (s[0], s[1], s[2]);
        let (ho, wo) = (2 * h, 2 * w);
        let src = self.value(x).data();
        let mut out = vec![T::zero(); c * ho * wo];
        for ch in 0..c {
            for y in 0..ho {
                for xx in 0..wo {
                    out[(ch * ho + y) * wo + xx] = src[(ch * h + y / 2) * w + xx / 2];
                }
            }
        }
        let v = Tensor::new(vec![c, ho, wo], out)?;
        self.push(v, Op::Upsample2(x), &[x], "upsample2")
    }

    /// Reverse sweep from a one-element `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(Error::NotScalar(lv.shape().to_vec()));
        }
        if !self.nodes[loss.0].requires_grad {
            return Err(Error::Detached);
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::new(lv.shape().to_vec(), vec![T::one()])?);
        let mut by_var = BTreeMap::new();

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            if let Op::Leaf = node.op {
                by_var.insert(Var(i), g);
                continue;
            }
            self.propagate(node, &g, &mut grads);
        }

        let names = self
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.name.clone().map(|nm| (nm, Var(i))))
            .collect();
        Ok(Gradients { by_var, names })
    }

    fn grad_slot<'a>(&self, grads: &'a mut [Option<Tensor<T>>], v: Var) -> Option<&'a mut [T]> {
        if !self.nodes[v.0].requires_grad {
            return None;
        }
        let slot = &mut grads[v.0];
        if slot.is_none() {
            *slot = Some(Tensor::zeros(self.shape(v)));
        }
        slot.as_mut().map(|t| t.data_mut())
    }

    fn propagate(&self, node: &Node<T>, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        let gd = g.data();
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                for p in [*a, *b] {
                    if let Some(s) = self.grad_slot(grads, p) {
                        add_into(s, gd);
                    }
                }
            }
            Op::Sub(a, b) => {
                if let Some(s) = self.grad_slot(grads, *a) {
                    add_into(s, gd);
                }
                if let Some(s) = self.grad_slot(grads, *b) {
                    for (d, &e) in s.iter_mut().zip(gd) {
                        *d -= e;
                    }
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                if let Some(s) = self.grad_slot(grads, *a) {
                    for ((d, &e), &o) in s.iter_mut().zip(gd).zip(bv) {
                        *d += e * o;
                    }
                }
                if let Some(s) = self.grad_slot(grads, *b) {
                    for ((d, &e), &o) in s.iter_mut().zip(gd).zip(av) {
                        *d += e * o;
                    }
                }
            }
            Op::Affine { x, scale } => {
                if let Some(s) = self.grad_slot(grads, *x) {
                    for (d, &e) in s.iter_mut().zip(gd) {
                        *d += *scale * e;
                    }
                }
            }
            Op::ScaleBy { x, s } => {
                let sv = self.value(*s).item();
                let xv = self.value(*x).data();
                if let Some(slot) = self.grad_slot(grads, *x) {
                    for (d, &e) in slot.iter_mut().zip(gd) {
                        *d += sv * e;
                    }
                }
                if let Some(slot) = self.grad_slot(grads, *s) {
                    slot[0] += gd.iter().zip(xv).map(|(&e, &o)| e * o).sum::<T>();
                }
            }
            Op::CMatMul { a, b, n, k, m } => {
                let (n, k, m) = (*n, *k, *m);
                let (gr, gi) = gd.split_at(n * m);
                if self.nodes[a.0].requires_grad {
                    // dA = G B^H
                    let bv = self.value(*b).data();
                    let (bhr, bhi) = kernels::conj_transpose(&bv[..k * m], &bv[k * m..], k, m);
                    let s = self.grad_slot(grads, *a).expect("requires grad");
                    let (sr, si) = s.split_at_mut(n * k);
                    kernels::cmatmul_acc(gr, gi, &bhr, &bhi, n, m, k, sr, si);
                }
                if self.nodes[b.0].requires_grad {
                    // dB = A^H G
                    let av = self.value(*a).data();
                    let (ahr, ahi) = kernels::conj_transpose(&av[..n * k], &av[n * k..], n, k);
                    let s = self.grad_slot(grads, *b).expect("requires grad");
                    let (sr, si) = s.split_at_mut(k * m);
                    kernels::cmatmul_acc(&ahr, &ahi, gr, gi, k, n, m, sr, si);
                }
            }
            Op::Conv2d { x, w, b, geom } => {
                if self.nodes[x.0].requires_grad {
                    let wv = self.value(*w).data();
                    let s = self.grad_slot(grads, *x).expect("requires grad");
                    kernels::conv2d_grad_input(geom, gd, wv, s);
                }
                let xv = self.value(*x).data();
                let need_w = self.nodes[w.0].requires_grad;
                let need_b = b.map(|b| self.nodes[b.0].requires_grad).unwrap_or(false);
                if need_w || need_b {
                    let mut gw = need_w.then(|| vec![T::zero(); self.value(*w).len()]);
                    let mut gb = if need_b {
                        Some(vec![T::zero(); geom.cout])
                    } else {
                        None
                    };
                    kernels::conv2d_grad_params(geom, gd, xv, gw.as_deref_mut(), gb.as_deref_mut());
                    if let Some(gw) = gw {
                        add_into(self.grad_slot(grads, *w).expect("requires grad"), &gw);
                    }
                    if let (Some(gb), Some(b)) = (gb, b) {
                        add_into(self.grad_slot(grads, *b).expect("requires grad"), &gb);
                    }
                }
            }
            Op::Relu(x) => {
                let xv = self.value(*x).data();
                if let Some(s) = self.grad_slot(grads, *x) {
                    for ((d, &e), &o) in s.iter_mut().zip(gd).zip(xv) {
                        if o > T::zero() {
                            *d += e;
                        }
                    }
                }
            }
            Op::SoftThreshold { v, t } => {
                let vv = self.value(*v).data();
                let tv = self.value(*t).data();
                let n = vv.len() / 2;
                let scalar_t = tv.len() == 1;
                let mut gv = vec![T::zero(); 2 * n];
                let mut gt = vec![T::zero(); tv.len()];
                for i in 0..n {
                    let (re, im) = (vv[i], vv[n + i]);
                    let ti = if scalar_t { tv[0] } else { tv[i] };
                    let mag = re.hypot(im);
                    if !(mag > ti && mag > T::zero()) {
                        continue;
                    }
                    let (gr, gi) = (gd[i], gd[n + i]);
                    let f = (mag - ti) / mag;
                    let c = ti / (mag * mag * mag);
                    gv[i] = gr * (f + c * re * re) + gi * (c * re * im);
                    gv[n + i] = gr * (c * re * im) + gi * (f + c * im * im);
                    let dt = -(gr * re + gi * im) / mag;
                    if scalar_t {
                        gt[0] += dt;
                    } else {
                        gt[i] = dt;
                    }
                }
                if let Some(s) = self.grad_slot(grads, *v) {
                    add_into(s, &gv);
                }
                if let Some(s) = self.grad_slot(grads, *t) {
                    add_into(s, &gt);
                }
            }
            Op::Magnitude(v) => {
                let vv = self.value(*v).data();
                let n = vv.len() / 2;
                if let Some(s) = self.grad_slot(grads, *v) {
                    for i in 0..n {
                        let mag = vv[i].hypot(vv[n + i]);
                        if mag > T::zero() {
                            s[i] += gd[i] * vv[i] / mag;
                            s[n + i] += gd[i] * vv[n + i] / mag;
                        }
                    }
                }
            }
            Op::Rotate { x, map } => {
                let plane = map.height() * map.width();
                if let Some(s) = self.grad_slot(grads, *x) {
                    for c in 0..gd.len() / plane {
                        map.apply_transpose_plane_acc(
                            &gd[c * plane..(c + 1) * plane],
                            &mut s[c * plane..(c + 1) * plane],
                        );
                    }
                }
            }
            Op::SumSquares(x) => {
                let two = T::lit(2.0) * gd[0];
                let xv = self.value(*x).data();
                if let Some(s) = self.grad_slot(grads, *x) {
                    for (d, &o) in s.iter_mut().zip(xv) {
                        *d += two * o;
                    }
                }
            }
            Op::Sum(x) => {
                if let Some(s) = self.grad_slot(grads, *x) {
                    s.iter_mut().for_each(|d| *d += gd[0]);
                }
            }
            Op::Concat(xs) => {
                let mut off = 0;
                for &x in xs {
                    let len = self.value(x).len();
                    if let Some(s) = self.grad_slot(grads, x) {
                        add_into(s, &gd[off..off + len]);
                    }
                    off += len;
                }
            }
            Op::Slice { x, start } => {
                let inner: usize = self.shape(*x)[1..].iter().product();
                if let Some(s) = self.grad_slot(grads, *x) {
                    add_into(&mut s[start * inner..start * inner + gd.len()], gd);
                }
            }
            Op::Reshape(x) => {
                if let Some(s) = self.grad_slot(grads, *x) {
                    add_into(s, gd);
                }
            }
            Op::PadReflect { x } => {
                let s_in = self.shape(*x).to_vec();
                let (c, h, w) = (s_in[0], s_in[1], s_in[2]);
                let (ho, wo) = (g.shape()[1], g.shape()[2]);
                if let Some(s) = self.grad_slot(grads, *x) {
                    for ch in 0..c {
                        for y in 0..ho {
                            let sy = reflect(y, h);
                            for xx in 0..wo {
                                s[(ch * h + sy) * w + reflect(xx, w)] += gd[(ch * ho + y) * wo + xx];
                            }
                        }
                    }
                }
            }
            Op::Crop { x } => {
                let s_in = self.shape(*x).to_vec();
                let (ho, wo) = (g.shape()[1], g.shape()[2]);
                if let Some(s) = self.grad_slot(grads, *x) {
                    for ch in 0..s_in[0] {
                        for y in 0..ho {
                            let dst = (ch * s_in[1] + y) * s_in[2];
                            let src = (ch * ho + y) * wo;
                            add_into(&mut s[dst..dst + wo], &gd[src..src + wo]);
                        }
                    }
                }
            }
            Op::AvgPool2(x) => {
                let s_in = self.shape(*x).to_vec();
                let (c, h, w) = (s_in[0], s_in[1], s_in[2]);
                let (ho, wo) = (h / 2, w / 2);
                let quarter = T::lit(0.25);
                if let Some(s) = self.grad_slot(grads, *x) {
                    for ch in 0..c {
                        for y in 0..ho {
                            for xx in 0..wo {
                                let e = quarter * gd[(ch * ho + y) * wo + xx];
                                let i = (ch * h + 2 * y) * w + 2 * xx;
                                s[i] += e;
                                s[i + 1] += e;
                                s[i + w] += e;
                                s[i + w + 1] += e;
                            }
                        }
                    }
                }
            }
            Op::Upsample2(x) => {
                let s_in = self.shape(*x).to_vec();
                let (c, h, w) = (s_in[0], s_in[1], s_in[2]);
                let (ho, wo) = (2 * h, 2 * w);
                if let Some(s) = self.grad_slot(grads, *x) {
                    for ch in 0..c {
                        for y in 0..ho {
                            for xx in 0..wo {
                                s[(ch * h + y / 2) * w + xx / 2] += gd[(ch * ho + y) * wo + xx];
                            }
                        }
                    }
                }
            }
        }
    }
}

#[inline]
fn add_into<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

#[inline]
fn reflect(i: usize, n: usize) -> usize {
    if i < n {
        i
    } else {
        2 * (n - 1) - i
    }
}
