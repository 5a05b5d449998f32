//! Statement-level IR: SSA construction, CSE, parameter updates,
//! scheduling, in-place marking and deallocation.

pub mod dealloc;
pub mod inplace;
pub mod schedule;
pub mod ssa;
pub mod updates;
pub mod verify;

use crate::expr::{Graph, MapOp, PId, PrimOp, TId, TNode};
use crate::netspec::{DataBinding, SolverConfig};
use std::collections::HashMap;
use tensorc_runtime::PoolMode;

pub use dealloc::insert_dealloc;
pub use inplace::inline_inplace;
pub use schedule::schedule;
pub use ssa::{cse, to_ssa};
pub use updates::form_updates;
pub use verify::verify;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum InPlace {
    No,
    /// Overwrites the operand, which is dead afterwards.
    Yes,
    /// Copies the operand first because it is still live.
    CopyThen,
}

/// Per-parameter persistent buffers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Buffer {
    Param,
    Velocity,
    Grad,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Stmt {
    Let { node: TId, inplace: InPlace },
    /// Frees the buffer holding `node`; `pooled` returns it to the pool
    /// instead of the system.
    Dealloc { node: TId, pooled: bool },
    /// Adds the value of `node` into the gradient buffer of `param`.
    Accum { param: PId, node: TId },
    /// `target = beta * target + alpha * src`
    Update {
        param: PId,
        target: Buffer,
        src: Buffer,
        alpha: f64,
        beta: f64,
    },
    /// Global L2 gradient-norm clipping.
    ClipGrads { threshold: f64 },
    Print { node: TId },
}

impl Stmt {
    pub fn is_update(&self) -> bool {
        matches!(self, Stmt::Update { .. } | Stmt::ClipGrads { .. })
    }
}

#[derive(Clone, Debug)]
pub struct IrProgram {
    pub graph: Graph,
    pub params: Vec<PId>,
    pub loss: TId,
    pub accuracy: Option<TId>,
    pub train: Vec<Stmt>,
    pub test: Vec<Stmt>,
    pub solver: SolverConfig,
    pub data: DataBinding,
    pub mode: PoolMode,
    /// Bytes; `None` is unlimited.
    pub workspace_cap: Option<usize>,
}

/// Operand of `node` that an in-place kernel overwrites.
pub fn inplace_operand(g: &Graph, node: TId) -> Option<TId> {
    match g.node(node) {
        TNode::Map(MapOp::Log | MapOp::Recip | MapOp::Scale(_), a) => Some(*a),
        TNode::BiasAdd(a, _) => Some(*a),
        TNode::Prim { op: PrimOp::Relu, args } => Some(args[0]),
        _ => None,
    }
}

/// Storage read by `t` when used as an operand: views resolve to their
/// base, parameters read nothing.
pub fn storage_use(g: &Graph, t: TId) -> Option<TId> {
    let s = g.storage(t);
    match g.node(s) {
        TNode::Param(_) => None,
        _ => Some(s),
    }
}

/// Node computed by a statement, if any.
pub fn computed(s: &Stmt) -> Option<TId> {
    match s {
        Stmt::Let { node, .. } | Stmt::Accum { node, .. } | Stmt::Print { node } => Some(*node),
        _ => None,
    }
}

/// Storage buffers a statement reads, in operand order without repeats.
/// `defined` tells whether a node is held in a variable; nodes that are not
/// are computed by the statement itself.
pub fn reads(g: &Graph, s: &Stmt, defined: &dyn Fn(TId) -> bool) -> Vec<TId> {
    let mut out = Vec::new();
    let mut push = |t: TId| {
        if let Some(x) = storage_use(g, t) {
            if !out.contains(&x) {
                out.push(x);
            }
        }
    };
    match s {
        Stmt::Let { node, .. } => g.node(*node).args().into_iter().for_each(&mut push),
        Stmt::Accum { node, .. } | Stmt::Print { node } => {
            if defined(g.storage(*node)) || matches!(g.node(g.storage(*node)), TNode::Param(_)) {
                push(*node)
            } else {
                g.node(*node).args().into_iter().for_each(&mut push)
            }
        }
        _ => {}
    }
    out
}

/// Variable names `X1, X2, ..` in order of definition.
#[derive(Clone, Debug, Default)]
pub struct Names {
    map: HashMap<TId, usize>,
}

impl Names {
    pub fn new<'a>(bodies: impl IntoIterator<Item = &'a [Stmt]>) -> Self {
        let mut map = HashMap::new();
        for body in bodies {
            for s in body {
                if let Stmt::Let { node, .. } = s {
                    let n = map.len() + 1;
                    map.entry(*node).or_insert(n);
                }
            }
        }
        Names { map }
    }

    pub fn get(&self, t: TId) -> Option<usize> {
        self.map.get(&t).copied()
    }

    /// Operand text: `Xn`, a parameter name, a view of either, or the
    /// whole expression when the node has no variable.
    pub fn operand(&self, g: &Graph, t: TId) -> String {
        if let Some(n) = self.get(t) {
            return format!("X{n}");
        }
        match g.node(t) {
            TNode::Param(p) => g.param_info(*p).name.clone(),
            _ => g.render(t, &|x| self.operand(g, x)),
        }
    }

    /// Right-hand side of the statement computing `t`; `copied` is rendered
    /// with a `.copy` suffix.
    pub fn rhs(&self, g: &Graph, t: TId, copied: Option<TId>) -> String {
        g.render(t, &|x| {
            let s = self.operand(g, x);
            if Some(x) == copied {
                format!("{s}.copy")
            } else {
                s
            }
        })
    }
}

pub fn buffer_name(g: &Graph, p: PId, b: Buffer) -> String {
    let n = &g.param_info(p).name;
    match b {
        Buffer::Param => n.clone(),
        Buffer::Velocity => format!("{n}_v"),
        Buffer::Grad => format!("d_{n}"),
    }
}

/// One statement in the printed surface syntax.
pub fn render_stmt(g: &Graph, names: &Names, s: &Stmt) -> String {
    let num = crate::expr::scalar::fmt_num;
    match s {
        Stmt::Let { node, inplace } => {
            let copied = match inplace {
                InPlace::CopyThen => inplace_operand(g, *node),
                _ => None,
            };
            format!("val {} = {}", names.operand(g, *node), names.rhs(g, *node, copied))
        }
        Stmt::Dealloc { node, .. } => format!("Dealloc({})", names.operand(g, *node)),
        Stmt::Accum { param, node } => {
            let rhs = if names.get(*node).is_some() {
                names.operand(g, *node)
            } else {
                names.rhs(g, *node, None)
            };
            format!("{} <~~ {rhs}", g.param_info(*param).name)
        }
        Stmt::Update {
            param,
            target,
            src,
            alpha,
            beta,
        } => format!(
            "Update({}, {}, {}, {})",
            buffer_name(g, *param, *target),
            buffer_name(g, *param, *src),
            num(*alpha),
            num(*beta)
        ),
        Stmt::ClipGrads { threshold } => format!("ClipGrads({})", num(*threshold)),
        Stmt::Print { node } => format!("Print({})", names.rhs(g, *node, None)),
    }
}

/// The whole program, train body then test body.
pub fn render_program(p: &IrProgram) -> String {
    let mut s = String::new();
    s.push_str("# init\n");
    for &q in &p.params {
        let info = p.graph.param_info(q);
        let dims: Vec<String> = info.shape.iter().map(|d| d.to_string()).collect();
        s.push_str(&format!("param {} ({})\n", info.name, dims.join(" ")));
    }
    s.push_str("# train\n");
    let names = Names::new([p.train.as_slice()]);
    for st in &p.train {
        s.push_str(&render_stmt(&p.graph, &names, st));
        s.push('\n');
    }
    s.push_str("# test\n");
    let names = Names::new([p.test.as_slice()]);
    for st in &p.test {
        s.push_str(&render_stmt(&p.graph, &names, st));
        s.push('\n');
    }
    s
}
