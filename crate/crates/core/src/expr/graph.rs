//! Hash-consed arena of tensor expressions with eagerly inferred shapes.

use super::scalar::{fmt_num, level_name, Scalar, F64};
use super::shape::{self, mismatch, numel, Shape};
use crate::diag::{DResult, DiagKind, Diagnostic, Span};
use crate::netspec::ParamInit;
use std::collections::HashMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PId(pub u32);

impl TId {
    pub fn ix(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum InputKind {
    Images,
    /// Labels as one-hot rows over `K` classes.
    Labels(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum PrimOp {
    /// (x, w, b)
    Conv { stride: usize, pad: usize },
    Pool { k: usize, stride: usize, pad: usize, max: bool },
    Relu,
    Softmax,
    /// (x, mask)
    Dropout { rate: F64 },
    Lrn { size: usize, alpha: F64, beta: F64 },
    Concat,
}

impl PrimOp {
    pub fn arity(&self) -> Option<usize> {
        match self {
            PrimOp::Conv { .. } => Some(3),
            PrimOp::Dropout { .. } => Some(2),
            PrimOp::Concat => None,
            _ => Some(1),
        }
    }

    pub fn label(&self) -> String {
        match self {
            PrimOp::Conv { stride, pad } => format!("Convolv({stride},{pad})"),
            PrimOp::Pool { k, stride, pad, max } => format!("Pooling({k},{stride},{pad},{max})"),
            PrimOp::Relu => "ReLU()".into(),
            PrimOp::Softmax => "Softmax()".into(),
            PrimOp::Dropout { rate } => format!("Dropout({})", fmt_num(rate.0)),
            PrimOp::Lrn { size, alpha, beta } => format!("LRN({size},{},{})", fmt_num(alpha.0), fmt_num(beta.0)),
            PrimOp::Concat => "Concat()".into(),
        }
    }
}

/// Backward forms of the primitives. The saved operands of each form are
/// stored on the node.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum GradOp {
    /// saved: filter
    ConvData { stride: usize, pad: usize },
    /// saved: input
    ConvFilter { stride: usize, pad: usize },
    /// saved: nothing
    ConvBias { stride: usize, pad: usize },
    /// saved: forward output, forward input
    Pool { k: usize, stride: usize, pad: usize, max: bool },
    /// saved: forward output
    Relu,
    /// saved: forward output
    Softmax,
    /// saved: mask
    Dropout,
    /// saved: forward output, forward input
    Lrn { size: usize, alpha: F64, beta: F64 },
    /// channels `lo..hi` of the upstream
    ConcatSlice { lo: usize, hi: usize },
}

impl GradOp {
    pub fn label(&self) -> String {
        match self {
            GradOp::ConvData { stride, pad } | GradOp::ConvFilter { stride, pad } | GradOp::ConvBias { stride, pad } => {
                format!("d_Convolv({stride},{pad})")
            }
            GradOp::Pool { k, stride, pad, max } => format!("d_Pooling({k},{stride},{pad},{max})"),
            GradOp::Relu => "d_ReLU()".into(),
            GradOp::Softmax => "d_Softmax()".into(),
            GradOp::Dropout => "d_Dropout()".into(),
            GradOp::Lrn { size, alpha, beta } => format!("d_LRN({size},{},{})", fmt_num(alpha.0), fmt_num(beta.0)),
            GradOp::ConcatSlice { lo, hi } => format!("d_Concat({lo},{hi})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MapOp {
    Log,
    Recip,
    Exp,
    Neg,
    Scale(F64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TNode {
    Input(InputKind),
    Param(PId),
    /// A tensor of `dims` whose element at the binder levels is `body`.
    IndexAbs { dims: Vec<usize>, body: Scalar },
    Prim { op: PrimOp, args: Vec<TId> },
    /// View keeping axes before `axis` and merging the rest.
    Flatten { arg: TId, rank: usize, axis: usize },
    /// View of `arg` under other dims of the same element count.
    Reshape { arg: TId, dims: Vec<usize> },
    /// Inverted-dropout mask, redrawn each iteration.
    Mask { rate: F64, site: u64, dims: Vec<usize> },
    /// `upstream * d_op(saved)/d_wrt`; `wrt` only names the operand.
    GradPrim { op: GradOp, saved: Vec<TId>, upstream: TId, wrt: TId },
    /// `op(a) · op(b)` where `op` transposes when the flag is set.
    MatMul { a: TId, b: TId, ta: bool, tb: bool },
    /// Adds `b` along the trailing axis of `a`.
    BiasAdd(TId, TId),
    Map(MapOp, TId),
    Binary(BinOp, TId, TId),
    /// Column sums of a rank-2 tensor.
    ColSum(TId),
}

impl TNode {
    /// Operands, in order.
    pub fn args(&self) -> Vec<TId> {
        match self {
            TNode::Input(_) | TNode::Param(_) | TNode::Mask { .. } => vec![],
            TNode::IndexAbs { body, .. } => body.tensors(),
            TNode::Prim { args, .. } => args.clone(),
            TNode::Flatten { arg, .. } | TNode::Reshape { arg, .. } | TNode::Map(_, arg) | TNode::ColSum(arg) => vec![*arg],
            TNode::GradPrim { saved, upstream, .. } => {
                let mut v = vec![*upstream];
                v.extend(saved.iter().copied());
                v
            }
            TNode::MatMul { a, b, .. } | TNode::BiasAdd(a, b) | TNode::Binary(_, a, b) => vec![*a, *b],
        }
    }

    pub fn map_args(&self, f: &dyn Fn(TId) -> TId) -> TNode {
        match self {
            TNode::IndexAbs { dims, body } => TNode::IndexAbs {
                dims: dims.clone(),
                body: body.map_tensors(f),
            },
            TNode::Prim { op, args } => TNode::Prim {
                op: op.clone(),
                args: args.iter().map(|&a| f(a)).collect(),
            },
            TNode::Flatten { arg, rank, axis } => TNode::Flatten {
                arg: f(*arg),
                rank: *rank,
                axis: *axis,
            },
            TNode::Reshape { arg, dims } => TNode::Reshape {
                arg: f(*arg),
                dims: dims.clone(),
            },
            TNode::GradPrim { op, saved, upstream, wrt } => TNode::GradPrim {
                op: op.clone(),
                saved: saved.iter().map(|&a| f(a)).collect(),
                upstream: f(*upstream),
                wrt: f(*wrt),
            },
            TNode::MatMul { a, b, ta, tb } => TNode::MatMul {
                a: f(*a),
                b: f(*b),
                ta: *ta,
                tb: *tb,
            },
            TNode::BiasAdd(a, b) => TNode::BiasAdd(f(*a), f(*b)),
            TNode::Map(op, a) => TNode::Map(*op, f(*a)),
            TNode::Binary(op, a, b) => TNode::Binary(*op, f(*a), f(*b)),
            TNode::ColSum(a) => TNode::ColSum(f(*a)),
            leaf => leaf.clone(),
        }
    }

    /// Views share their operand's storage.
    pub fn is_view(&self) -> bool {
        matches!(self, TNode::Flatten { .. } | TNode::Reshape { .. })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamInfo {
    pub name: String,
    pub shape: Shape,
    pub init: ParamInit,
    pub site: Span,
    pub node: TId,
}

#[derive(Clone, Debug)]
pub struct Graph {
    nodes: Vec<TNode>,
    shapes: Vec<Shape>,
    sites: Vec<Span>,
    index: HashMap<TNode, TId>,
    pub params: Vec<ParamInfo>,
    /// `(N, C, H, W)` of the image input.
    pub images: [usize; 4],
    pub classes: usize,
    /// Site attached to nodes created from now on.
    pub site: Span,
    masks: u64,
}

impl Graph {
    pub fn new(images: [usize; 4], classes: usize) -> Self {
        Graph {
            nodes: Vec::new(),
            shapes: Vec::new(),
            sites: Vec::new(),
            index: HashMap::new(),
            params: Vec::new(),
            images,
            classes,
            site: Span::default(),
            masks: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, t: TId) -> &TNode {
        &self.nodes[t.ix()]
    }

    pub fn shape(&self, t: TId) -> &[usize] {
        &self.shapes[t.ix()]
    }

    pub fn rank(&self, t: TId) -> usize {
        self.shapes[t.ix()].len()
    }

    pub fn site_of(&self, t: TId) -> Span {
        self.sites[t.ix()]
    }

    pub fn lookup(&self, n: &TNode) -> Option<TId> {
        self.index.get(n).copied()
    }

    /// Adds a node, or returns the existing id of an identical one.
    pub fn add(&mut self, n: TNode) -> DResult<TId> {
        if let Some(&t) = self.index.get(&n) {
            return Ok(t);
        }
        let shape = self.infer(&n, self.site)?;
        let t = TId(self.nodes.len() as u32);
        self.index.insert(n.clone(), t);
        self.nodes.push(n);
        self.shapes.push(shape);
        self.sites.push(self.site);
        Ok(t)
    }

    pub fn input(&mut self, kind: InputKind) -> TId {
        self.add(TNode::Input(kind)).expect("inputs always have a shape")
    }

    pub fn images(&mut self) -> TId {
        self.input(InputKind::Images)
    }

    pub fn labels(&mut self) -> TId {
        let k = self.classes;
        self.input(InputKind::Labels(k))
    }

    /// The parameter called `name`, created with `shape` on first use.
    pub fn param(&mut self, name: &str, shape: Shape, init: &ParamInit) -> DResult<TId> {
        if let Some(p) = self.params.iter().find(|p| p.name == name) {
            if p.shape != shape {
                return Err(mismatch(
                    self.site,
                    format!("`{name}` reused with shape {shape:?}, first use gave {:?}", p.shape),
                ));
            }
            return Ok(p.node);
        }
        shape::positive(&shape, self.site)?;
        let id = PId(self.params.len() as u32);
        self.params.push(ParamInfo {
            name: name.to_string(),
            shape: shape.clone(),
            init: init.clone(),
            site: self.site,
            node: TId(u32::MAX),
        });
        let t = self.add(TNode::Param(id))?;
        self.params[id.0 as usize].node = t;
        Ok(t)
    }

    pub fn param_info(&self, p: PId) -> &ParamInfo {
        &self.params[p.0 as usize]
    }

    pub fn param_of(&self, t: TId) -> Option<PId> {
        match self.node(t) {
            TNode::Param(p) => Some(*p),
            _ => None,
        }
    }

    /// A fresh dropout mask site.
    pub fn mask(&mut self, rate: f64, dims: Vec<usize>) -> DResult<TId> {
        self.masks += 1;
        self.add(TNode::Mask {
            rate: F64(rate),
            site: self.masks,
            dims,
        })
    }

    pub fn index_abs(&mut self, dims: Vec<usize>, body: Scalar) -> DResult<TId> {
        self.add(TNode::IndexAbs { dims, body })
    }

    pub fn prim(&mut self, op: PrimOp, args: Vec<TId>) -> DResult<TId> {
        self.add(TNode::Prim { op, args })
    }

    /// Shape of `n` from the current shapes of its operands.
    fn infer(&self, n: &TNode, site: Span) -> DResult<Shape> {
        infer_node(n, site, &|t| self.shapes.get(t.ix()).map(|s| s.as_slice()), self)
    }

    /// Recomputes every shape in the given topological order and checks it
    /// against the stored assignment.
    pub fn infer_shapes_in(&self, order: &[TId]) -> DResult<HashMap<TId, Shape>> {
        let mut got: HashMap<TId, Shape> = HashMap::new();
        for &t in order {
            let s = infer_node(self.node(t), self.site_of(t), &|a| got.get(&a).map(|s| s.as_slice()), self)?;
            got.insert(t, s);
        }
        Ok(got)
    }

    /// Recomputes every shape in id order.
    pub fn infer_shapes(&self) -> DResult<HashMap<TId, Shape>> {
        let order: Vec<TId> = (0..self.nodes.len() as u32).map(TId).collect();
        self.infer_shapes_in(&order)
    }

    /// Nodes reachable from `roots`, in increasing id order.
    pub fn reachable(&self, roots: &[TId]) -> Vec<TId> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack: Vec<TId> = roots.to_vec();
        while let Some(t) = stack.pop() {
            if seen[t.ix()] {
                continue;
            }
            seen[t.ix()] = true;
            stack.extend(self.node(t).args());
        }
        (0..self.nodes.len()).filter(|&i| seen[i]).map(|i| TId(i as u32)).collect()
    }

    /// Parameters referenced from `roots`, in first-use order.
    pub fn free_params(&self, roots: &[TId]) -> Vec<PId> {
        let mut out = Vec::new();
        let mut seen = vec![false; self.nodes.len()];
        for &r in roots {
            self.first_use(r, &mut seen, &mut out);
        }
        out
    }

    fn first_use(&self, t: TId, seen: &mut [bool], out: &mut Vec<PId>) {
        if std::mem::replace(&mut seen[t.ix()], true) {
            return;
        }
        if let TNode::Param(p) = self.node(t) {
            out.push(*p);
        }
        for a in self.node(t).args() {
            self.first_use(a, seen, out);
        }
    }

    /// The base storage and view dims behind a chain of views.
    pub fn storage(&self, t: TId) -> TId {
        match self.node(t) {
            TNode::Flatten { arg, .. } | TNode::Reshape { arg, .. } => self.storage(*arg),
            _ => t,
        }
    }

    /// One line in the IR surface syntax; `name` renders operands.
    pub fn render(&self, t: TId, name: &dyn Fn(TId) -> String) -> String {
        match self.node(t) {
            TNode::Input(InputKind::Images) => "Cuda(X)".into(),
            TNode::Input(InputKind::Labels(k)) => format!("Cuda(Indicator(Y, {k}))"),
            TNode::Param(p) => self.param_info(*p).name.clone(),
            TNode::IndexAbs { dims, body } => {
                let b = body.render(name);
                if dims.is_empty() {
                    b
                } else {
                    let ix: Vec<String> = (0..dims.len()).map(level_name).collect();
                    format!("({}) => {b}", ix.join(","))
                }
            }
            TNode::Prim { op, args } => {
                let a: Vec<String> = args.iter().map(|&x| name(x)).collect();
                format!("{}({})", op.label(), a.join(","))
            }
            TNode::Flatten { arg, rank, axis } => format!("{}[{axis}><{}]", name(*arg), rank - 1),
            TNode::Reshape { arg, dims } => {
                let d: Vec<String> = dims.iter().map(|d| d.to_string()).collect();
                format!("{}[{}]", name(*arg), d.join(","))
            }
            TNode::Mask { rate, .. } => format!("DropoutMask({})", fmt_num(rate.0)),
            TNode::GradPrim { op, saved, upstream, wrt } => {
                let s: Vec<String> = saved.iter().map(|&x| name(x)).collect();
                format!("{} * {}({})/d_{}", name(*upstream), op.label(), s.join(","), name(*wrt))
            }
            TNode::MatMul { a, b, ta, tb } => {
                let pa = if *ta { "(@ | i)" } else { "(i | @)" };
                let pb = if *tb { "(j | @)" } else { "(@ | j)" };
                format!("({}){pa} * ({}){pb}", name(*a), name(*b))
            }
            TNode::BiasAdd(a, b) => format!("({} + (i) => {})", name(*a), name(*b)),
            TNode::Map(op, a) => match op {
                MapOp::Log => format!("Log {}", name(*a)),
                MapOp::Recip => format!("1/({})", name(*a)),
                MapOp::Exp => format!("Exp {}", name(*a)),
                MapOp::Neg => format!("-{}", name(*a)),
                MapOp::Scale(c) => format!("({} * {})", fmt_num(c.0), name(*a)),
            },
            TNode::Binary(op, a, b) => format!("({} {} {})", name(*a), op.symbol(), name(*b)),
            TNode::ColSum(a) => format!("ColSum({})", name(*a)),
        }
    }
}

fn infer_node<'a>(n: &TNode, site: Span, shape_of: &dyn Fn(TId) -> Option<&'a [usize]>, g: &Graph) -> DResult<Shape> {
    let sh = |t: TId| -> DResult<&'a [usize]> {
        shape_of(t).ok_or_else(|| Diagnostic::new(DiagKind::UnboundName, site, format!("operand {} used before definition", t.0)))
    };
    let same = |a: &[usize], b: &[usize], what: &str| -> DResult<()> {
        if a != b {
            return Err(mismatch(site, format!("{what}: {a:?} vs {b:?}")));
        }
        Ok(())
    };
    Ok(match n {
        TNode::Input(InputKind::Images) => g.images.to_vec(),
        TNode::Input(InputKind::Labels(k)) => vec![g.images[0], *k],
        TNode::Param(p) => g.params[p.0 as usize].shape.clone(),
        TNode::IndexAbs { dims, body } => {
            shape::positive(dims, site)?;
            let mut extents = dims.clone();
            check_body(body, &mut extents, &sh, site)?;
            dims.clone()
        }
        TNode::Prim { op, args } => {
            if let Some(k) = op.arity() {
                if args.len() != k {
                    return Err(Diagnostic::new(
                        DiagKind::ArityError,
                        site,
                        format!("{} takes {k} operands, got {}", op.label(), args.len()),
                    ));
                }
            }
            match op {
                PrimOp::Conv { stride, pad } => shape::conv(sh(args[0])?, sh(args[1])?, sh(args[2])?, *stride, *pad, site)?,
                PrimOp::Pool { k, stride, pad, .. } => shape::pool(sh(args[0])?, *k, *stride, *pad, site)?,
                PrimOp::Relu | PrimOp::Softmax => {
                    let x = sh(args[0])?;
                    if x.is_empty() {
                        return Err(mismatch(site, format!("{} of a scalar", op.label())));
                    }
                    x.to_vec()
                }
                PrimOp::Lrn { .. } => {
                    let x = sh(args[0])?;
                    if x.len() != 4 {
                        return Err(mismatch(site, format!("LRN expects a rank-4 input, found {x:?}")));
                    }
                    x.to_vec()
                }
                PrimOp::Dropout { .. } => {
                    same(sh(args[0])?, sh(args[1])?, "dropout mask")?;
                    sh(args[0])?.to_vec()
                }
                PrimOp::Concat => {
                    let xs: Vec<&[usize]> = args.iter().map(|&a| sh(a)).collect::<DResult<_>>()?;
                    shape::concat(&xs, site)?
                }
            }
        }
        TNode::Flatten { arg, rank, axis } => shape::flatten(sh(*arg)?, *rank, *axis, site)?,
        TNode::Reshape { arg, dims } => {
            if numel(sh(*arg)?) != numel(dims) {
                return Err(mismatch(site, format!("cannot view {:?} as {dims:?}", sh(*arg)?)));
            }
            dims.clone()
        }
        TNode::Mask { dims, .. } => dims.clone(),
        TNode::GradPrim { op, upstream, wrt, saved } => {
            let w = sh(*wrt)?.to_vec();
            let up = sh(*upstream)?;
            for &s in saved {
                sh(s)?;
            }
            if let GradOp::ConcatSlice { lo, hi } = op {
                if up.len() < 2 || *hi > up[1] || w.get(1) != Some(&(hi - lo)) {
                    return Err(mismatch(site, format!("concat slice {lo}..{hi} of {up:?} into {w:?}")));
                }
            }
            w
        }
        TNode::MatMul { a, b, ta, tb } => {
            let (x, y) = (sh(*a)?, sh(*b)?);
            if x.len() != 2 || y.len() != 2 {
                return Err(mismatch(site, format!("matrix product of {x:?} and {y:?}")));
            }
            let (m, ka) = if *ta { (x[1], x[0]) } else { (x[0], x[1]) };
            let (kb, nn) = if *tb { (y[1], y[0]) } else { (y[0], y[1]) };
            if ka != kb {
                return Err(mismatch(site, format!("contraction extent {ka} vs {kb}")));
            }
            vec![m, nn]
        }
        TNode::BiasAdd(a, b) => {
            let (x, y) = (sh(*a)?, sh(*b)?);
            if x.last().map(|&l| vec![l]).as_deref() != Some(y) {
                return Err(mismatch(site, format!("bias {y:?} does not match trailing axis of {x:?}")));
            }
            x.to_vec()
        }
        TNode::Map(_, a) => sh(*a)?.to_vec(),
        TNode::Binary(_, a, b) => {
            same(sh(*a)?, sh(*b)?, "elementwise operands")?;
            sh(*a)?.to_vec()
        }
        TNode::ColSum(a) => match sh(*a)? {
            [_, c] => vec![*c],
            other => return Err(mismatch(site, format!("column sum of {other:?}"))),
        },
    })
}

/// Checks level binding and the extents of every indexed access.
fn check_body<'a>(
    e: &Scalar,
    extents: &mut Vec<usize>,
    sh: &dyn Fn(TId) -> DResult<&'a [usize]>,
    site: Span,
) -> DResult<()> {
    match e {
        Scalar::Index(l) if *l >= extents.len() => Err(mismatch(site, format!("unbound index {}", level_name(*l)))),
        Scalar::Elem(t, idx) => {
            let s = sh(*t)?;
            if s.len() != idx.len() {
                return Err(mismatch(site, format!("rank-{} tensor {s:?} indexed with {} indices", s.len(), idx.len())));
            }
            for (k, &l) in idx.iter().enumerate() {
                let ext = *extents.get(l).ok_or_else(|| mismatch(site, format!("unbound index {}", level_name(l))))?;
                if ext != s[k] {
                    return Err(mismatch(site, format!("axis {k} of {s:?} indexed over a range of {ext}")));
                }
            }
            Ok(())
        }
        Scalar::Dot(a, b) => {
            let (x, y) = (sh(*a)?, sh(*b)?);
            if x != y {
                return Err(mismatch(site, format!("dot product of {x:?} and {y:?}")));
            }
            Ok(())
        }
        Scalar::Precision(a, b) => {
            let (x, y) = (sh(*a)?, sh(*b)?);
            if x != y || x.len() != 2 {
                return Err(mismatch(site, format!("precision of scores {y:?} against labels {x:?}")));
            }
            Ok(())
        }
        Scalar::Sum { level, extent, body } => {
            if *level != extents.len() {
                return Err(mismatch(site, format!("sum binds level {level} at depth {}", extents.len())));
            }
            if *extent == 0 {
                return Err(Diagnostic::new(DiagKind::NonPositiveExtent, site, "empty summation range"));
            }
            extents.push(*extent);
            let r = check_body(body, extents, sh, site);
            extents.pop();
            r
        }
        other => {
            for ch in other.children() {
                check_body(ch, extents, sh, site)?;
            }
            Ok(())
        }
    }
}
