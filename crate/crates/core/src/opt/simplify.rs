//! Algebraic simplification: identities, constant folding, eta reduction
//! and inlining of constant tensors.

use super::{rebuild, Rewrite};
use crate::diag::DResult;
use crate::expr::scalar::{c, mul};
use crate::expr::{Graph, Scalar, TId, TNode};

pub fn round(g: &mut Graph, roots: &[TId], trace: &mut Vec<Rewrite>) -> DResult<Vec<TId>> {
    rebuild(g, roots, &mut |g, node| Ok(rewrite(g, &node)), trace)
}

fn rewrite(g: &Graph, node: &TNode) -> Option<(TNode, &'static str)> {
    let TNode::IndexAbs { dims, body } = node else {
        return None;
    };
    if let Scalar::Elem(t, idx) = body {
        let eta = g.shape(*t) == dims.as_slice() && idx.iter().copied().eq(0..dims.len());
        if eta && !dims.is_empty() {
            // re-adding the operand's node resolves to the operand itself
            return Some((g.node(*t).clone(), "eta"));
        }
    }
    let mut fired = None;
    let new = simplify(g, body, &mut fired);
    fired.map(|rule| {
        (
            TNode::IndexAbs {
                dims: dims.clone(),
                body: new,
            },
            rule,
        )
    })
}

fn constant_body(g: &Graph, t: TId) -> Option<f64> {
    match g.node(t) {
        TNode::IndexAbs { body, .. } => body.as_const().filter(|_| matches!(body, Scalar::Const(_))),
        _ => None,
    }
}

/// Bottom-up simplification of a scalar body. `fired` receives the first
/// rule that applied.
pub fn simplify(g: &Graph, e: &Scalar, fired: &mut Option<&'static str>) -> Scalar {
    let e = e.map_children(&mut |ch| simplify(g, ch, fired));
    let mut note = |r: &'static str| {
        if fired.is_none() {
            *fired = Some(r);
        }
    };
    let k = |s: &Scalar| match s {
        Scalar::Const(v) => Some(v.0),
        Scalar::Card(n) => Some(*n as f64),
        Scalar::Named(v, _) => Some(v.0),
        _ => None,
    };
    let is = |s: &Scalar, v: f64| matches!(s, Scalar::Const(x) if x.0 == v);
    match &e {
        Scalar::Elem(t, _) => {
            if let Some(v) = constant_body(g, *t) {
                note("const-tensor");
                return c(v);
            }
            e
        }
        Scalar::Add(a, b) => {
            if let (Some(x), Some(y)) = (k(a), k(b)) {
                note("fold");
                c(x + y)
            } else if is(a, 0.0) {
                note("add-zero");
                (**b).clone()
            } else if is(b, 0.0) {
                note("add-zero");
                (**a).clone()
            } else {
                e
            }
        }
        Scalar::Sub(a, b) => {
            if let (Some(x), Some(y)) = (k(a), k(b)) {
                note("fold");
                c(x - y)
            } else if is(b, 0.0) {
                note("sub-zero");
                (**a).clone()
            } else {
                e
            }
        }
        Scalar::Mul(a, b) => {
            if let (Some(x), Some(y)) = (k(a), k(b)) {
                note("fold");
                return c(x * y);
            }
            if is(a, 0.0) || is(b, 0.0) {
                note("mul-zero");
                return c(0.0);
            }
            if is(a, 1.0) {
                note("mul-one");
                return (**b).clone();
            }
            if is(b, 1.0) {
                note("mul-one");
                return (**a).clone();
            }
            match (&**a, &**b) {
                (x, Scalar::Const(v)) if k(x).is_none() => {
                    note("const-first");
                    mul(Scalar::Const(*v), x.clone())
                }
                (Scalar::Const(u), Scalar::Mul(p, q)) if matches!(**p, Scalar::Const(_)) => {
                    note("fold");
                    mul(c(u.0 * k(p).unwrap_or(1.0)), (**q).clone())
                }
                (Scalar::Mul(p, q), y) if matches!(**p, Scalar::Const(_)) => {
                    note("const-first");
                    mul((**p).clone(), mul((**q).clone(), y.clone()))
                }
                (x, Scalar::Mul(p, q)) if matches!(**p, Scalar::Const(_)) && k(x).is_none() => {
                    note("const-first");
                    mul((**p).clone(), mul(x.clone(), (**q).clone()))
                }
                (Scalar::Const(u), Scalar::Neg(x)) => {
                    note("neg");
                    mul(c(-u.0), (**x).clone())
                }
                _ => e,
            }
        }
        Scalar::Div(a, b) => {
            if let (Some(x), Some(y)) = (k(a), k(b)) {
                if y != 0.0 {
                    note("fold");
                    return c(x / y);
                }
            }
            if is(b, 1.0) {
                note("div-one");
                (**a).clone()
            } else {
                e
            }
        }
        Scalar::Neg(a) => match &**a {
            Scalar::Neg(x) => {
                note("neg-neg");
                (**x).clone()
            }
            Scalar::Mul(p, q) if matches!(**p, Scalar::Const(_)) => {
                note("neg");
                mul(c(-k(p).unwrap_or(1.0)), (**q).clone())
            }
            x => match k(x) {
                Some(v) => {
                    note("fold");
                    c(-v)
                }
                None => e,
            },
        },
        Scalar::Log(a) => match &**a {
            Scalar::Exp(x) => {
                note("log-exp");
                (**x).clone()
            }
            x => match k(x) {
                Some(v) if v > 0.0 => {
                    note("fold");
                    c(v.ln())
                }
                _ => e,
            },
        },
        Scalar::Exp(a) => match k(a) {
            Some(v) => {
                note("fold");
                c(v.exp())
            }
            None => e,
        },
        Scalar::Max(a, b) => match (k(a), k(b)) {
            (Some(x), Some(y)) => {
                note("fold");
                c(x.max(y))
            }
            _ => e,
        },
        Scalar::Ge(a, b) => match (k(a), k(b)) {
            (Some(x), Some(y)) => {
                note("fold");
                c(if x >= y { 1.0 } else { 0.0 })
            }
            _ => e,
        },
        Scalar::Sum { level, extent, body } => {
            if !body.uses_level(*level) {
                note("sum-invariant");
                // inner sums sit one level lower once the binder is gone
                let l = *level;
                let inner = body.reindex(&|x| if x > l { x - 1 } else { x });
                mul(c(*extent as f64), inner)
            } else if is(body, 0.0) {
                note("mul-zero");
                c(0.0)
            } else {
                e
            }
        }
        _ => e,
    }
}
