use super::{mismatch, ConvSpec, DiffArray, Result, Scalar, TensorError};

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    /// Pointwise maximum; on ties the first operand wins.
    Max,
}

#[derive(Clone, Debug)]
enum Op<T> {
    Leaf,
    Conv2d {
        input: Var,
        weight: Var,
        bias: Option<Var>,
        spec: ConvSpec,
    },
    Binary(BinaryOp, Var, Var),
    Sigmoid(Var),
    Exp(Var),
    ChannelMax {
        input: Var,
        argmax: Vec<u32>,
    },
    LogSoftmax(Var),
    ShiftStack {
        input: Var,
        offsets: Vec<(isize, isize)>,
    },
    Repeat(Var),
    Gather {
        input: Var,
        index: Vec<Option<usize>>,
    },
    Concat(Vec<Var>),
    Reshape(Var),
    WeightedSum {
        input: Var,
        coeffs: Vec<T>,
    },
    Scale(Var, T),
}

#[derive(Clone, Debug)]
struct Node<T> {
    shape: Vec<usize>,
    value: Vec<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Records a forward computation for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so replaying them from the loss
/// downwards is a valid reverse topological order.
#[derive(Clone, Debug, Default)]
pub struct Tape<T = f32> {
    nodes: Vec<Node<T>>,
}

/// Gradients produced by [`Tape::backward`].
#[derive(Clone, Debug)]
pub struct Gradients<T = f32> {
    grads: Vec<Option<Vec<T>>>,
    visited: Vec<usize>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, var: Var) -> Option<&[T]> {
        self.grads.get(var.0).and_then(|g| g.as_deref())
    }

    /// Node indices in the order backward processed them.
    pub fn visit_order(&self) -> &[usize] {
        &self.visited
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &[T] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn scalar(&self, v: Var) -> T {
        self.nodes[v.0].value[0]
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<T>, op: Op<T>, requires_grad: bool) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        self.nodes.push(Node {
            shape,
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Snapshot of an array; later mutation of `array` does not affect the tape.
    pub fn leaf(&mut self, array: &DiffArray<T>) -> Var {
        self.push(
            array.shape().to_vec(),
            array.values().to_vec(),
            Op::Leaf,
            array.requires_grad(),
        )
    }

    pub fn constant(&mut self, shape: Vec<usize>, values: Vec<T>) -> Result<Var> {
        let n: usize = shape.iter().product();
        if n != values.len() || n == 0 {
            return Err(mismatch(
                "constant",
                format!("shape {shape:?} vs {} values", values.len()),
            ));
        }
        Ok(self.push(shape, values, Op::Leaf, false))
    }

    /// Cross-correlation of `input` `[c_in, h, w]` with `weight`
    /// `[c_out, c_in, kh, kw]`, zero padding, stride 1, optional per-channel bias.
    pub fn conv2d(&mut self, input: Var, weight: Var, bias: Option<Var>, spec: ConvSpec) -> Result<Var> {
        let ishape = self.shape(input);
        if ishape.len() != 3 {
            return Err(mismatch("conv2d", format!("input must be [c, h, w], got {ishape:?}")));
        }
        let (c_in, h, w) = (ishape[0], ishape[1], ishape[2]);
        if c_in != spec.in_channels {
            return Err(mismatch(
                "conv2d",
                format!("input dim 0 (channels) = {c_in}, spec expects {}", spec.in_channels),
            ));
        }
        let wshape = self.shape(weight);
        let expect = spec.weight_shape();
        if wshape != expect.as_slice() {
            for (d, (&got, &want)) in wshape.iter().zip(&expect).enumerate() {
                if got != want {
                    return Err(mismatch(
                        "conv2d",
                        format!("weight dim {d} = {got}, expected {want}"),
                    ));
                }
            }
            return Err(mismatch(
                "conv2d",
                format!("weight rank {} != 4", wshape.len()),
            ));
        }
        if let Some(b) = bias {
            let bshape = self.shape(b);
            if bshape != [spec.out_channels] {
                return Err(mismatch(
                    "conv2d",
                    format!("bias shape {bshape:?}, expected [{}]", spec.out_channels),
                ));
            }
        }
        let (oh, ow) = spec.output_dims(h, w).ok_or_else(|| {
            mismatch(
                "conv2d",
                format!("input {h}x{w} smaller than kernel {:?}", spec.kernel),
            )
        })?;
        let out = conv_forward(
            self.value(input),
            (c_in, h, w),
            self.value(weight),
            bias.map(|b| self.value(b)),
            &spec,
            (oh, ow),
        );
        let rg = self.rg(input) || self.rg(weight) || bias.is_some_and(|b| self.rg(b));
        Ok(self.push(
            vec![spec.out_channels, oh, ow],
            out,
            Op::Conv2d {
                input,
                weight,
                bias,
                spec,
            },
            rg,
        ))
    }

    pub fn binary(&mut self, op: BinaryOp, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(mismatch(
                "elementwise",
                format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            ));
        }
        let (x, y) = (self.value(a), self.value(b));
        let out: Vec<T> = match op {
            BinaryOp::Add => x.iter().zip(y).map(|(&p, &q)| p + q).collect(),
            BinaryOp::Sub => x.iter().zip(y).map(|(&p, &q)| p - q).collect(),
            BinaryOp::Mul => x.iter().zip(y).map(|(&p, &q)| p * q).collect(),
            BinaryOp::Max => x
                .iter()
                .zip(y)
                .map(|(&p, &q)| if p >= q { p } else { q })
                .collect(),
        };
        let shape = self.shape(a).to_vec();
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(shape, out, Op::Binary(op, a, b), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryOp::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryOp::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryOp::Mul, a, b)
    }

    pub fn max(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryOp::Max, a, b)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).iter().map(|&x| sigmoid(x)).collect();
        let shape = self.shape(a).to_vec();
        let rg = self.rg(a);
        self.push(shape, out, Op::Sigmoid(a), rg)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let out = self.value(a).iter().map(|&x| x.exp()).collect();
        let shape = self.shape(a).to_vec();
        let rg = self.rg(a);
        self.push(shape, out, Op::Exp(a), rg)
    }

    /// Maximum over the leading axis; `[c, ...] -> [...]`.
    pub fn channel_max(&mut self, a: Var) -> Result<Var> {
        let shape = self.shape(a);
        if shape.len() < 2 {
            return Err(mismatch("channel_max", format!("need rank >= 2, got {shape:?}")));
        }
        let c = shape[0];
        let rest = shape[1..].to_vec();
        let n: usize = rest.iter().product();
        let x = self.value(a);
        let mut out = x[..n].to_vec();
        let mut argmax = vec![0u32; n];
        for ch in 1..c {
            let plane = &x[ch * n..(ch + 1) * n];
            for i in 0..n {
                if plane[i] > out[i] {
                    out[i] = plane[i];
                    argmax[i] = ch as u32;
                }
            }
        }
        let rg = self.rg(a);
        Ok(self.push(rest, out, Op::ChannelMax { input: a, argmax }, rg))
    }

    /// Log-probabilities of a softmax over a 1-D vector.
    pub fn log_softmax(&mut self, a: Var) -> Result<Var> {
        let shape = self.shape(a);
        if shape.len() != 1 {
            return Err(mismatch("log_softmax", format!("need 1-D logits, got {shape:?}")));
        }
        let out = log_softmax(self.value(a));
        let rg = self.rg(a);
        Ok(self.push(shape.to_vec(), out, Op::LogSoftmax(a), rg))
    }

    /// Stack of translated copies of a 2-D map: `out[n, y, x] = input[y + dy, x + dx]`
    /// for `offsets[n] = (dy, dx)`, zero where the source falls outside the map.
    pub fn shift_stack(&mut self, a: Var, offsets: &[(isize, isize)]) -> Result<Var> {
        let shape = self.shape(a);
        if shape.len() != 2 {
            return Err(mismatch("shift_stack", format!("need [h, w], got {shape:?}")));
        }
        let (h, w) = (shape[0], shape[1]);
        let x = self.value(a);
        let mut out = vec![T::zero(); offsets.len() * h * w];
        for (n, &(dy, dx)) in offsets.iter().enumerate() {
            let plane = &mut out[n * h * w..(n + 1) * h * w];
            for_shift(h, w, dy, dx, |dst, src| plane[dst] = x[src]);
        }
        let rg = self.rg(a);
        Ok(self.push(
            vec![offsets.len(), h, w],
            out,
            Op::ShiftStack {
                input: a,
                offsets: offsets.to_vec(),
            },
            rg,
        ))
    }

    /// Explicit tiling: `[...] -> [times, ...]`.
    pub fn repeat(&mut self, a: Var, times: usize) -> Var {
        let x = self.value(a);
        let mut out = Vec::with_capacity(x.len() * times);
        for _ in 0..times {
            out.extend_from_slice(x);
        }
        let mut shape = vec![times];
        shape.extend_from_slice(self.shape(a));
        let rg = self.rg(a);
        self.push(shape, out, Op::Repeat(a), rg)
    }

    /// Picks flat elements of `a`; `None` yields 0.
    pub fn gather(&mut self, a: Var, index: &[Option<usize>]) -> Result<Var> {
        let x = self.value(a);
        if let Some(bad) = index.iter().flatten().find(|&&i| i >= x.len()) {
            return Err(mismatch("gather", format!("index {bad} out of {} elements", x.len())));
        }
        let out = index
            .iter()
            .map(|i| i.map_or(T::zero(), |i| x[i]))
            .collect();
        let rg = self.rg(a);
        Ok(self.push(
            vec![index.len()],
            out,
            Op::Gather {
                input: a,
                index: index.to_vec(),
            },
            rg,
        ))
    }

    /// Flattens and joins arrays into one 1-D array.
    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let mut out = Vec::new();
        for &p in parts {
            out.extend_from_slice(self.value(p));
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        self.push(vec![out.len()], out, Op::Concat(parts.to_vec()), rg)
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var> {
        if shape.iter().product::<usize>() != self.value(a).len() {
            return Err(mismatch(
                "reshape",
                format!("{:?} -> {shape:?}", self.shape(a)),
            ));
        }
        let out = self.value(a).to_vec();
        let rg = self.rg(a);
        Ok(self.push(shape, out, Op::Reshape(a), rg))
    }

    /// `sum_i coeffs[i] * a[i]`, a single-element result. Coefficients are constants.
    pub fn weighted_sum(&mut self, a: Var, coeffs: &[T]) -> Result<Var> {
        let x = self.value(a);
        if coeffs.len() != x.len() {
            return Err(mismatch(
                "weighted_sum",
                format!("{} coefficients for {} elements", coeffs.len(), x.len()),
            ));
        }
        let s = x.iter().zip(coeffs).fold(T::zero(), |acc, (&v, &c)| acc + v * c);
        let rg = self.rg(a);
        Ok(self.push(
            vec![1],
            vec![s],
            Op::WeightedSum {
                input: a,
                coeffs: coeffs.to_vec(),
            },
            rg,
        ))
    }

    pub fn scale(&mut self, a: Var, factor: T) -> Var {
        let out = self.value(a).iter().map(|&x| x * factor).collect();
        let shape = self.shape(a).to_vec();
        let rg = self.rg(a);
        self.push(shape, out, Op::Scale(a, factor), rg)
    }

    /// Every branch decision taken by the max-type ops, in recording order.
    /// Two evaluations with equal signatures lie on the same smooth piece.
    pub fn decision_signature(&self) -> Vec<u32> {
        let mut sig = Vec::new();
        for node in &self.nodes {
            match &node.op {
                Op::Binary(BinaryOp::Max, a, b) => {
                    let (x, y) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    sig.extend(x.iter().zip(y).map(|(p, q)| u32::from(p >= q)));
                }
                Op::ChannelMax { argmax, .. } => sig.extend_from_slice(argmax),
                _ => {}
            }
        }
        sig
    }

    /// Reverse pass from a single-element `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let lnode = &self.nodes[loss.0];
        if lnode.value.len() != 1 {
            return Err(TensorError::NonScalarLoss(lnode.shape.clone()));
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; self.nodes.len()];
        let mut visited = Vec::new();
        grads[loss.0] = Some(vec![T::one()]);
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            visited.push(i);
            self.propagate(node, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads, visited })
    }

    fn propagate(&self, node: &Node<T>, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let val = |v: Var| self.nodes[v.0].value.as_slice();
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d {
                input,
                weight,
                bias,
                spec,
            } => {
                let ishape = &self.nodes[input.0].shape;
                let dims = (ishape[0], ishape[1], ishape[2]);
                let odims = (node.shape[1], node.shape[2]);
                if let Some(b) = bias.filter(|&b| self.rg(b)) {
                    let plane = odims.0 * odims.1;
                    with_grad(grads, b, spec.out_channels, |gb| {
                        for (co, acc) in gb.iter_mut().enumerate() {
                            *acc = *acc + g[co * plane..(co + 1) * plane].iter().copied().sum();
                        }
                    });
                }
                if self.rg(*weight) {
                    let n = self.nodes[weight.0].value.len();
                    with_grad(grads, *weight, n, |gw| {
                        conv_grad_weight(val(*input), dims, g, spec, odims, gw)
                    });
                }
                if self.rg(*input) {
                    let n = self.nodes[input.0].value.len();
                    with_grad(grads, *input, n, |gi| {
                        conv_grad_input(val(*weight), dims, g, spec, odims, gi)
                    });
                }
            }
            Op::Binary(op, a, b) => {
                let (x, y) = (val(*a), val(*b));
                let n = g.len();
                match op {
                    BinaryOp::Add | BinaryOp::Sub => {
                        if self.rg(*a) {
                            with_grad(grads, *a, n, |ga| add_into(ga, g));
                        }
                        if self.rg(*b) {
                            let neg = *op == BinaryOp::Sub;
                            with_grad(grads, *b, n, |gb| {
                                for (acc, &d) in gb.iter_mut().zip(g) {
                                    *acc = if neg { *acc - d } else { *acc + d };
                                }
                            });
                        }
                    }
                    BinaryOp::Mul => {
                        if self.rg(*a) {
                            with_grad(grads, *a, n, |ga| {
                                for i in 0..n {
                                    ga[i] = ga[i] + g[i] * y[i];
                                }
                            });
                        }
                        if self.rg(*b) {
                            with_grad(grads, *b, n, |gb| {
                                for i in 0..n {
                                    gb[i] = gb[i] + g[i] * x[i];
                                }
                            });
                        }
                    }
                    BinaryOp::Max => {
                        if self.rg(*a) {
                            with_grad(grads, *a, n, |ga| {
                                for i in 0..n {
                                    if x[i] >= y[i] {
                                        ga[i] = ga[i] + g[i];
                                    }
                                }
                            });
                        }
                        if self.rg(*b) {
                            with_grad(grads, *b, n, |gb| {
                                for i in 0..n {
                                    if x[i] < y[i] {
                                        gb[i] = gb[i] + g[i];
                                    }
                                }
                            });
                        }
                    }
                }
            }
            Op::Sigmoid(a) => {
                let s = &node.value;
                with_grad(grads, *a, g.len(), |ga| {
                    for i in 0..g.len() {
                        ga[i] = ga[i] + g[i] * s[i] * (T::one() - s[i]);
                    }
                });
            }
            Op::Exp(a) => {
                let e = &node.value;
                with_grad(grads, *a, g.len(), |ga| {
                    for i in 0..g.len() {
                        ga[i] = ga[i] + g[i] * e[i];
                    }
                });
            }
            Op::ChannelMax { input, argmax } => {
                let n = g.len();
                let total = self.nodes[input.0].value.len();
                with_grad(grads, *input, total, |gi| {
                    for i in 0..n {
                        let j = argmax[i] as usize * n + i;
                        gi[j] = gi[j] + g[i];
                    }
                });
            }
            Op::LogSoftmax(a) => {
                let lp = &node.value;
                let gsum: T = g.iter().copied().sum();
                with_grad(grads, *a, g.len(), |ga| {
                    for i in 0..g.len() {
                        ga[i] = ga[i] + g[i] - lp[i].exp() * gsum;
                    }
                });
            }
            Op::ShiftStack { input, offsets } => {
                let (h, w) = (node.shape[1], node.shape[2]);
                with_grad(grads, *input, h * w, |gi| {
                    for (n, &(dy, dx)) in offsets.iter().enumerate() {
                        let plane = &g[n * h * w..(n + 1) * h * w];
                        for_shift(h, w, dy, dx, |dst, src| gi[src] = gi[src] + plane[dst]);
                    }
                });
            }
            Op::Repeat(a) => {
                let n = self.nodes[a.0].value.len();
                with_grad(grads, *a, n, |ga| {
                    for chunk in g.chunks_exact(n) {
                        add_into(ga, chunk);
                    }
                });
            }
            Op::Gather { input, index } => {
                let n = self.nodes[input.0].value.len();
                with_grad(grads, *input, n, |gi| {
                    for (k, i) in index.iter().enumerate() {
                        if let Some(i) = *i {
                            gi[i] = gi[i] + g[k];
                        }
                    }
                });
            }
            Op::Concat(parts) => {
                let mut off = 0;
                for &p in parts {
                    let n = self.nodes[p.0].value.len();
                    if self.rg(p) {
                        with_grad(grads, p, n, |gp| add_into(gp, &g[off..off + n]));
                    }
                    off += n;
                }
            }
            Op::Reshape(a) => with_grad(grads, *a, g.len(), |ga| add_into(ga, g)),
            Op::WeightedSum { input, coeffs } => {
                with_grad(grads, *input, coeffs.len(), |gi| {
                    for (acc, &c) in gi.iter_mut().zip(coeffs) {
                        *acc = *acc + g[0] * c;
                    }
                });
            }
            Op::Scale(a, f) => {
                with_grad(grads, *a, g.len(), |ga| {
                    for (acc, &d) in ga.iter_mut().zip(g) {
                        *acc = *acc + d * *f;
                    }
                });
            }
        }
    }
}

fn with_grad<T: Scalar>(grads: &mut [Option<Vec<T>>], v: Var, n: usize, f: impl FnOnce(&mut [T])) {
    let slot = grads[v.0].get_or_insert_with(|| vec![T::zero(); n]);
    f(slot);
}

fn add_into<T: Scalar>(acc: &mut [T], g: &[T]) {
    for (a, &b) in acc.iter_mut().zip(g) {
        *a = *a + b;
    }
}

pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub(crate) fn log_softmax<T: Scalar>(x: &[T]) -> Vec<T> {
    let m = x.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = x.iter().map(|&v| (v - m).exp()).sum::<T>().ln() + m;
    x.iter().map(|&v| v - lse).collect()
}

/// Calls `f(dst, src)` for every destination cell whose shifted source is inside the map.
#[inline]
fn for_shift(h: usize, w: usize, dy: isize, dx: isize, mut f: impl FnMut(usize, usize)) {
    let y0 = (-dy).max(0) as usize;
    let y1 = (h as isize - dy).min(h as isize).max(0) as usize;
    let x0 = (-dx).max(0) as usize;
    let x1 = (w as isize - dx).min(w as isize).max(0) as usize;
    for y in y0..y1 {
        let sy = (y as isize + dy) as usize;
        for x in x0..x1 {
            let sx = (x as isize + dx) as usize;
            f(y * w + x, sy * w + sx);
        }
    }
}

/// Valid output column range for kernel column `k`: those `ox` with
/// `0 <= ox + k - pad < w`.
#[inline]
fn col_range(k: usize, pad: usize, w: usize, ow: usize) -> (usize, usize) {
    let lo = pad.saturating_sub(k);
    let hi = (w + pad).saturating_sub(k).min(ow);
    (lo, hi.max(lo))
}

fn conv_forward<T: Scalar>(
    x: &[T],
    (c_in, h, w): (usize, usize, usize),
    weight: &[T],
    bias: Option<&[T]>,
    spec: &ConvSpec,
    (oh, ow): (usize, usize),
) -> Vec<T> {
    let (kh, kw) = spec.kernel;
    let pad = spec.padding;
    let mut out = vec![T::zero(); spec.out_channels * oh * ow];
    for co in 0..spec.out_channels {
        let o = &mut out[co * oh * ow..(co + 1) * oh * ow];
        if let Some(b) = bias {
            o.fill(b[co]);
        }
        for ci in 0..c_in {
            let plane = &x[ci * h * w..(ci + 1) * h * w];
            for ky in 0..kh {
                for kx in 0..kw {
                    let wv = weight[((co * c_in + ci) * kh + ky) * kw + kx];
                    let (x0, x1) = col_range(kx, pad, w, ow);
                    for oy in 0..oh {
                        let iy = oy + ky;
                        if iy < pad || iy - pad >= h {
                            continue;
                        }
                        let src = &plane[(iy - pad) * w..(iy - pad + 1) * w];
                        let dst = &mut o[oy * ow..(oy + 1) * ow];
                        for ox in x0..x1 {
                            dst[ox] = dst[ox] + wv * src[ox + kx - pad];
                        }
                    }
                }
            }
        }
    }
    out
}

fn conv_grad_weight<T: Scalar>(
    x: &[T],
    (c_in, h, w): (usize, usize, usize),
    g: &[T],
    spec: &ConvSpec,
    (oh, ow): (usize, usize),
    gw: &mut [T],
) {
    let (kh, kw) = spec.kernel;
    let pad = spec.padding;
    for co in 0..spec.out_channels {
        let go = &g[co * oh * ow..(co + 1) * oh * ow];
        for ci in 0..c_in {
            let plane = &x[ci * h * w..(ci + 1) * h * w];
            for ky in 0..kh {
                for kx in 0..kw {
                    let (x0, x1) = col_range(kx, pad, w, ow);
                    let mut acc = T::zero();
                    for oy in 0..oh {
                        let iy = oy + ky;
                        if iy < pad || iy - pad >= h {
                            continue;
                        }
                        let src = &plane[(iy - pad) * w..(iy - pad + 1) * w];
                        let grow = &go[oy * ow..(oy + 1) * ow];
                        for ox in x0..x1 {
                            acc = acc + grow[ox] * src[ox + kx - pad];
                        }
                    }
                    let k = ((co * c_in + ci) * kh + ky) * kw + kx;
                    gw[k] = gw[k] + acc;
                }
            }
        }
    }
}

fn conv_grad_input<T: Scalar>(
    weight: &[T],
    (c_in, h, w): (usize, usize, usize),
    g: &[T],
    spec: &ConvSpec,
    (oh, ow): (usize, usize),
    gi: &mut [T],
) {
    let (kh, kw) = spec.kernel;
    let pad = spec.padding;
    for co in 0..spec.out_channels {
        let go = &g[co * oh * ow..(co + 1) * oh * ow];
        for ci in 0..c_in {
            let plane = &mut gi[ci * h * w..(ci + 1) * h * w];
            for ky in 0..kh {
                for kx in 0..kw {
                    let wv = weight[((co * c_in + ci) * kh + ky) * kw + kx];
                    let (x0, x1) = col_range(kx, pad, w, ow);
                    for oy in 0..oh {
                        let iy = oy + ky;
                        if iy < pad || iy - pad >= h {
                            continue;
                        }
                        let dst = &mut plane[(iy - pad) * w..(iy - pad + 1) * w];
                        let grow = &go[oy * ow..(oy + 1) * ow];
                        for ox in x0..x1 {
                            dst[ox + kx - pad] = dst[ox + kx - pad] + wv * grow[ox];
                        }
                    }
                }
            }
        }
    }
}
