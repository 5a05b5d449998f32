//! Recognizes index abstractions that a library kernel computes directly.

use super::{rebuild, Rewrite};
use crate::diag::DResult;
use crate::expr::{BinOp, Graph, MapOp, Scalar, TId, TNode, F64};

pub fn round(g: &mut Graph, roots: &[TId], trace: &mut Vec<Rewrite>) -> DResult<Vec<TId>> {
    rebuild(g, roots, &mut |g, node| rewrite(g, &node), trace)
}

fn rewrite(g: &mut Graph, node: &TNode) -> DResult<Option<(TNode, &'static str)>> {
    let TNode::IndexAbs { dims, body } = node else {
        return Ok(None);
    };
    if dims.is_empty() {
        return Ok(None);
    }
    if let Some(n) = whole(g, dims, body) {
        return Ok(Some(n));
    }
    let mut fired = false;
    let new = extract(g, dims, body, &mut fired)?;
    Ok(fired.then(|| {
        (
            TNode::IndexAbs {
                dims: dims.clone(),
                body: new,
            },
            "extract-map",
        )
    }))
}

/// `A` when `e` reads `A` at exactly the binder levels.
fn identity(g: &Graph, dims: &[usize], e: &Scalar) -> Option<TId> {
    match e {
        Scalar::Elem(t, idx) if g.shape(*t) == dims && idx.iter().copied().eq(0..dims.len()) => Some(*t),
        _ => None,
    }
}

fn unary(g: &Graph, dims: &[usize], e: &Scalar) -> Option<(MapOp, TId)> {
    match e {
        Scalar::Log(a) => identity(g, dims, a).map(|t| (MapOp::Log, t)),
        Scalar::Exp(a) => identity(g, dims, a).map(|t| (MapOp::Exp, t)),
        Scalar::Div(one, a) if matches!(**one, Scalar::Const(v) if v.0 == 1.0) => identity(g, dims, a).map(|t| (MapOp::Recip, t)),
        _ => None,
    }
}

fn whole(g: &Graph, dims: &[usize], body: &Scalar) -> Option<(TNode, &'static str)> {
    if let Some((op, t)) = unary(g, dims, body) {
        return Some((TNode::Map(op, t), "map"));
    }
    let id = |e: &Scalar| identity(g, dims, e);
    let r = dims.len();
    let bias = |e: &Scalar| match e {
        Scalar::Elem(t, idx) if idx.as_slice() == [r - 1] && g.shape(*t) == [dims[r - 1]] => Some(*t),
        _ => None,
    };
    match body {
        Scalar::Neg(a) => id(a).map(|t| (TNode::Map(MapOp::Neg, t), "map")),
        Scalar::Mul(k, a) if matches!(**k, Scalar::Const(_)) && id(a).is_some() => {
            let v = k.as_const().unwrap_or(1.0);
            Some((TNode::Map(MapOp::Scale(F64(v)), id(a)?), "map"))
        }
        Scalar::Add(a, b) => {
            if let (Some(x), Some(y)) = (id(a), bias(b)) {
                return Some((TNode::BiasAdd(x, y), "bias-add"));
            }
            if let (Some(y), Some(x)) = (bias(a), id(b)) {
                return Some((TNode::BiasAdd(x, y), "bias-add"));
            }
            Some((TNode::Binary(BinOp::Add, id(a)?, id(b)?), "binary"))
        }
        Scalar::Sub(a, b) => Some((TNode::Binary(BinOp::Sub, id(a)?, id(b)?), "binary")),
        Scalar::Mul(a, b) => Some((TNode::Binary(BinOp::Mul, id(a)?, id(b)?), "binary")),
        Scalar::Div(a, b) => Some((TNode::Binary(BinOp::Div, id(a)?, id(b)?), "binary")),
        Scalar::Sum { level, extent, body } if r == 2 && *level == 2 => matmul(g, dims, *extent, body),
        Scalar::Sum { level: 1, extent, body } if r == 1 => match &**body {
            Scalar::Elem(t, idx) if idx.as_slice() == [1, 0] && g.shape(*t) == [*extent, dims[0]] => {
                Some((TNode::ColSum(*t), "col-sum"))
            }
            _ => None,
        },
        _ => None,
    }
}

fn matmul(g: &Graph, dims: &[usize], k: usize, body: &Scalar) -> Option<(TNode, &'static str)> {
    let Scalar::Mul(x, y) = body else {
        return None;
    };
    let (Scalar::Elem(p, ip), Scalar::Elem(q, iq)) = (&**x, &**y) else {
        return None;
    };
    // the operand indexed by the row level is the left factor
    let ((a, ia), (b, ib)) = if ip.contains(&0) { ((*p, ip), (*q, iq)) } else { ((*q, iq), (*p, ip)) };
    let ta = match ia.as_slice() {
        [0, 2] => false,
        [2, 0] => true,
        _ => return None,
    };
    let tb = match ib.as_slice() {
        [2, 1] => false,
        [1, 2] => true,
        _ => return None,
    };
    let (sa, sb) = (g.shape(a), g.shape(b));
    let a_ok = if ta { sa == [k, dims[0]] } else { sa == [dims[0], k] };
    let b_ok = if tb { sb == [dims[1], k] } else { sb == [k, dims[1]] };
    (a_ok && b_ok).then_some((TNode::MatMul { a, b, ta, tb }, "matmul"))
}

/// Replaces unary maps over whole operands inside a larger body.
fn extract(g: &mut Graph, dims: &[usize], e: &Scalar, fired: &mut bool) -> DResult<Scalar> {
    if let Some((op, t)) = unary(g, dims, e) {
        *fired = true;
        let m = g.add(TNode::Map(op, t))?;
        return Ok(Scalar::Elem(m, (0..dims.len()).collect()));
    }
    let mut err = None;
    let out = e.map_children(&mut |ch| match extract(g, dims, ch, fired) {
        Ok(x) => x,
        Err(d) => {
            err.get_or_insert(d);
            ch.clone()
        }
    });
    match err {
        Some(d) => Err(d),
        None => Ok(out),
    }
}
