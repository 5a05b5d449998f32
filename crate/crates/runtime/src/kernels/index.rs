//! Generic kernel for residual indexed expressions.
//!
//! A tensor is defined by a scalar body evaluated at every output index.
//! Index variables are numbered by level: the output binders are levels
//! `0..rank`, and each nested `Sum` binds the next level.

use super::elementwise::{BinaryOp, LOG_FLOOR};
use crate::tensor::Element;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IndexOp {
    Neg,
    Log,
    Exp,
    Recip,
}

#[derive(Clone, Debug, PartialEq)]
pub enum IndexExpr {
    Const(f64),
    /// The current value of an index variable, as a number.
    Level(usize),
    /// `operands[operand][idx...]` where each entry of `idx` is a level.
    Load { operand: usize, idx: Vec<usize> },
    Unary(IndexOp, Box<IndexExpr>),
    Binary(BinaryOp, Box<IndexExpr>, Box<IndexExpr>),
    Max(Box<IndexExpr>, Box<IndexExpr>),
    /// 1 when the left side is ≥ the right, else 0.
    Ge(Box<IndexExpr>, Box<IndexExpr>),
    Sum {
        level: usize,
        extent: usize,
        body: Box<IndexExpr>,
    },
}

impl IndexExpr {
    fn depth(&self) -> usize {
        match self {
            IndexExpr::Const(_) => 0,
            IndexExpr::Level(l) => l + 1,
            IndexExpr::Load { idx, .. } => idx.iter().map(|l| l + 1).max().unwrap_or(0),
            IndexExpr::Unary(_, a) => a.depth(),
            IndexExpr::Binary(_, a, b) | IndexExpr::Max(a, b) | IndexExpr::Ge(a, b) => a.depth().max(b.depth()),
            IndexExpr::Sum { level, body, .. } => (level + 1).max(body.depth()),
        }
    }
}

/// An operand of the generic kernel: data plus the dims it is indexed with.
#[derive(Clone, Copy, Debug)]
pub struct Operand<'a, T> {
    pub shape: &'a [usize],
    pub data: &'a [T],
}

struct Strided<'a, T> {
    strides: Vec<usize>,
    data: &'a [T],
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

fn eval<T: Element>(e: &IndexExpr, env: &mut [usize], ops: &[Strided<'_, T>]) -> T {
    match e {
        IndexExpr::Const(c) => T::of(*c),
        IndexExpr::Level(l) => T::of(env[*l] as f64),
        IndexExpr::Load { operand, idx } => {
            let op = &ops[*operand];
            let off: usize = idx.iter().zip(&op.strides).map(|(&l, &s)| env[l] * s).sum();
            op.data[off]
        }
        IndexExpr::Unary(op, a) => {
            let v = eval(a, env, ops);
            match op {
                IndexOp::Neg => -v,
                IndexOp::Log => v.max(T::of(LOG_FLOOR)).ln(),
                IndexOp::Exp => v.exp(),
                IndexOp::Recip => T::one() / v,
            }
        }
        IndexExpr::Binary(op, a, b) => {
            let x = eval(a, env, ops);
            op.apply(x, eval(b, env, ops))
        }
        IndexExpr::Max(a, b) => {
            let x = eval(a, env, ops);
            x.max(eval(b, env, ops))
        }
        IndexExpr::Ge(a, b) => {
            let x = eval(a, env, ops);
            if x >= eval(b, env, ops) {
                T::one()
            } else {
                T::zero()
            }
        }
        IndexExpr::Sum { level, extent, body } => {
            let saved = env[*level];
            let mut acc = T::zero();
            for i in 0..*extent {
                env[*level] = i;
                acc = acc + eval(body, env, ops);
            }
            env[*level] = saved;
            acc
        }
    }
}

/// Evaluates `body` at every index of `out_shape`.
pub fn index_kernel<T: Element>(
    out_shape: &[usize],
    body: &IndexExpr,
    operands: &[Operand<'_, T>],
    out: &mut [T],
    accumulate: bool,
) {
    let ops: Vec<Strided<'_, T>> = operands
        .iter()
        .map(|o| Strided {
            strides: strides(o.shape),
            data: o.data,
        })
        .collect();
    let rank = out_shape.len();
    let mut env = vec![0usize; body.depth().max(rank)];
    for (flat, o) in out.iter_mut().enumerate() {
        let mut rem = flat;
        for d in (0..rank).rev() {
            env[d] = rem % out_shape[d];
            rem /= out_shape[d];
        }
        let v = eval(body, &mut env, &ops);
        *o = if accumulate { *o + v } else { v };
    }
}
