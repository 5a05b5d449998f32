//! Mapping of expression nodes onto runtime kernels.

use super::graph::{BinOp, GradOp, Graph, MapOp, PrimOp, TId, TNode};
use super::scalar::Scalar;
use tensorc_runtime::kernels::{BinaryOp, UnaryOp};
use tensorc_runtime::{IndexExpr, IndexOp, Kernel};

/// How a node is computed.
#[derive(Clone, Debug, PartialEq)]
pub enum Lowered {
    /// A kernel call over the listed operands.
    Kernel(Kernel, Vec<TId>),
    /// Argmax agreement of `(labels, scores)`, a host-side scalar.
    Precision(TId, TId),
    /// Inputs, parameters and views: nothing to compute.
    Source,
}

pub fn map_op(op: MapOp) -> UnaryOp {
    match op {
        MapOp::Log => UnaryOp::Log,
        MapOp::Recip => UnaryOp::Recip,
        MapOp::Exp => UnaryOp::Exp,
        MapOp::Neg => UnaryOp::Neg,
        MapOp::Scale(c) => UnaryOp::Scale(c.0),
    }
}

pub fn bin_op(op: BinOp) -> BinaryOp {
    match op {
        BinOp::Add => BinaryOp::Add,
        BinOp::Sub => BinaryOp::Sub,
        BinOp::Mul => BinaryOp::Mul,
        BinOp::Div => BinaryOp::Div,
    }
}

fn operand(ops: &mut Vec<TId>, t: TId) -> usize {
    match ops.iter().position(|&o| o == t) {
        Some(i) => i,
        None => {
            ops.push(t);
            ops.len() - 1
        }
    }
}

/// Lowers a scalar body evaluated under `depth` bound levels. `None` when
/// the body holds a `Precision`.
pub fn lower_scalar(g: &Graph, e: &Scalar, depth: usize, ops: &mut Vec<TId>) -> Option<IndexExpr> {
    let bx = |x: IndexExpr| Box::new(x);
    let bin = |op: BinaryOp, a: &Scalar, b: &Scalar, ops: &mut Vec<TId>| -> Option<IndexExpr> {
        Some(IndexExpr::Binary(op, bx(lower_scalar(g, a, depth, ops)?), bx(lower_scalar(g, b, depth, ops)?)))
    };
    let un = |op: IndexOp, a: &Scalar, ops: &mut Vec<TId>| -> Option<IndexExpr> {
        Some(IndexExpr::Unary(op, bx(lower_scalar(g, a, depth, ops)?)))
    };
    Some(match e {
        Scalar::Const(v) | Scalar::Named(v, _) => IndexExpr::Const(v.0),
        Scalar::Card(n) => IndexExpr::Const(*n as f64),
        Scalar::Index(l) => IndexExpr::Level(*l),
        Scalar::Elem(t, idx) => IndexExpr::Load {
            operand: operand(ops, *t),
            idx: idx.clone(),
        },
        Scalar::Add(a, b) => bin(BinaryOp::Add, a, b, ops)?,
        Scalar::Sub(a, b) => bin(BinaryOp::Sub, a, b, ops)?,
        Scalar::Mul(a, b) => bin(BinaryOp::Mul, a, b, ops)?,
        Scalar::Div(a, b) => bin(BinaryOp::Div, a, b, ops)?,
        Scalar::Neg(a) => un(IndexOp::Neg, a, ops)?,
        Scalar::Log(a) => un(IndexOp::Log, a, ops)?,
        Scalar::Exp(a) => un(IndexOp::Exp, a, ops)?,
        Scalar::Max(a, b) => IndexExpr::Max(bx(lower_scalar(g, a, depth, ops)?), bx(lower_scalar(g, b, depth, ops)?)),
        Scalar::Ge(a, b) => IndexExpr::Ge(bx(lower_scalar(g, a, depth, ops)?), bx(lower_scalar(g, b, depth, ops)?)),
        Scalar::Sum { level, extent, body } => IndexExpr::Sum {
            level: *level,
            extent: *extent,
            body: bx(lower_scalar(g, body, depth.max(level + 1), ops)?),
        },
        Scalar::Dot(a, b) => {
            let dims = g.shape(*a).to_vec();
            let idx: Vec<usize> = (depth..depth + dims.len()).collect();
            let mut body = IndexExpr::Binary(
                BinaryOp::Mul,
                bx(IndexExpr::Load {
                    operand: operand(ops, *a),
                    idx: idx.clone(),
                }),
                bx(IndexExpr::Load {
                    operand: operand(ops, *b),
                    idx: idx.clone(),
                }),
            );
            for (k, &ext) in dims.iter().enumerate().rev() {
                body = IndexExpr::Sum {
                    level: depth + k,
                    extent: ext,
                    body: bx(body),
                };
            }
            body
        }
        Scalar::Precision(..) => return None,
    })
}

/// The kernel computing node `t`.
pub fn lower(g: &Graph, t: TId) -> Lowered {
    let k = |k: Kernel, args: Vec<TId>| Lowered::Kernel(k, args);
    match g.node(t) {
        TNode::Input(_) | TNode::Param(_) | TNode::Flatten { .. } | TNode::Reshape { .. } => Lowered::Source,
        TNode::IndexAbs { dims, body } => {
            if let Scalar::Precision(a, b) = body {
                return Lowered::Precision(*a, *b);
            }
            if let Some(v) = body.as_const() {
                return k(Kernel::Fill { shape: dims.clone(), value: v }, vec![]);
            }
            let mut ops = Vec::new();
            match lower_scalar(g, body, dims.len(), &mut ops) {
                Some(body) => k(Kernel::Index { shape: dims.clone(), body }, ops),
                None => panic!("precision is only supported as a whole scalar"),
            }
        }
        TNode::Prim { op, args } => match op {
            PrimOp::Conv { stride, pad } => k(Kernel::Conv { stride: *stride, pad: *pad }, args.clone()),
            PrimOp::Pool { k: kk, stride, pad, max } => k(
                Kernel::Pool {
                    k: *kk,
                    stride: *stride,
                    pad: *pad,
                    max: *max,
                },
                args.clone(),
            ),
            PrimOp::Relu => k(Kernel::Relu, args.clone()),
            PrimOp::Softmax => k(Kernel::Softmax, args.clone()),
            PrimOp::Dropout { .. } => k(Kernel::Binary(BinaryOp::Mul), args.clone()),
            PrimOp::Lrn { size, alpha, beta } => k(
                Kernel::Lrn {
                    size: *size,
                    alpha: alpha.0,
                    beta: beta.0,
                },
                args.clone(),
            ),
            PrimOp::Concat => k(Kernel::Concat, args.clone()),
        },
        TNode::Mask { rate, site, dims } => k(
            Kernel::DropoutMask {
                rate: rate.0,
                site: *site,
                shape: dims.clone(),
            },
            vec![],
        ),
        TNode::GradPrim { op, saved, upstream, wrt } => {
            let mut args = vec![*upstream];
            args.extend(saved.iter().copied());
            let kernel = match op {
                GradOp::ConvData { stride, pad } => {
                    let s = g.shape(*wrt);
                    Kernel::ConvBackwardData {
                        stride: *stride,
                        pad: *pad,
                        input: [s[0], s[1], s[2], s[3]],
                    }
                }
                GradOp::ConvFilter { stride, pad } => Kernel::ConvBackwardFilter {
                    stride: *stride,
                    pad: *pad,
                    k: g.shape(*wrt)[2],
                },
                GradOp::ConvBias { .. } => Kernel::ConvBackwardBias,
                GradOp::Pool { k, stride, pad, max } => Kernel::PoolBackward {
                    k: *k,
                    stride: *stride,
                    pad: *pad,
                    max: *max,
                },
                GradOp::Relu => Kernel::ReluBackward,
                GradOp::Softmax => Kernel::SoftmaxBackward,
                GradOp::Dropout => Kernel::Binary(BinaryOp::Mul),
                GradOp::Lrn { size, alpha, beta } => Kernel::LrnBackward {
                    size: *size,
                    alpha: alpha.0,
                    beta: beta.0,
                },
                GradOp::ConcatSlice { lo, hi } => Kernel::ConcatBackward { lo: *lo, hi: *hi },
            };
            k(kernel, args)
        }
        TNode::MatMul { a, b, ta, tb } => k(Kernel::MatMul { ta: *ta, tb: *tb }, vec![*a, *b]),
        TNode::BiasAdd(a, b) => k(Kernel::BiasAdd, vec![*a, *b]),
        TNode::Map(op, a) => k(Kernel::Map(map_op(*op)), vec![*a]),
        TNode::Binary(op, a, b) => k(Kernel::Binary(bin_op(*op)), vec![*a, *b]),
        TNode::ColSum(a) => k(Kernel::ColSum, vec![*a]),
    }
}
