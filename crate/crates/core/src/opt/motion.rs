//! Code motion: index-free subterms leave their loops.

use super::{rebuild, Rewrite};
use crate::diag::DResult;
use crate::expr::scalar::{elem, mul, sum};
use crate::expr::{Graph, Scalar, TId, TNode};

pub fn round(g: &mut Graph, roots: &[TId], trace: &mut Vec<Rewrite>) -> DResult<Vec<TId>> {
    rebuild(g, roots, &mut |g, node| rewrite(g, &node), trace)
}

fn rewrite(g: &mut Graph, node: &TNode) -> DResult<Option<(TNode, &'static str)>> {
    let TNode::IndexAbs { dims, body } = node else {
        return Ok(None);
    };
    let mut fired = None;
    let new = if dims.is_empty() {
        hoist_factors(body, &mut fired)
    } else {
        let b = hoist_scalars(g, body, dims.len(), &mut fired)?;
        hoist_factors(&b, &mut fired)
    };
    Ok(fired.map(|r| {
        (
            TNode::IndexAbs {
                dims: dims.clone(),
                body: new,
            },
            r,
        )
    }))
}

/// Moves closed subterms (dot products, sums with no free level) of a
/// ranked body into rank-0 abstractions computed once.
fn hoist_scalars(g: &mut Graph, e: &Scalar, depth: usize, fired: &mut Option<&'static str>) -> DResult<Scalar> {
    let closed = match e {
        Scalar::Dot(..) => true,
        Scalar::Sum { .. } => e.free_levels().is_empty(),
        _ => false,
    };
    if closed {
        let d = depth;
        let body = e.reindex(&|l| l - d);
        let s = g.index_abs(Vec::new(), body)?;
        fired.get_or_insert("hoist-scalar");
        return Ok(elem(s, Vec::new()));
    }
    let mut err = None;
    let child_depth = depth + matches!(e, Scalar::Sum { .. }) as usize;
    let out = e.map_children(&mut |ch| match hoist_scalars(g, ch, child_depth, fired) {
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

fn factors(e: &Scalar, out: &mut Vec<Scalar>) {
    match e {
        Scalar::Mul(a, b) => {
            factors(a, out);
            factors(b, out);
        }
        other => out.push(other.clone()),
    }
}

fn product(fs: Vec<Scalar>) -> Scalar {
    let mut it = fs.into_iter().rev();
    let last = it.next().expect("non-empty product");
    it.fold(last, |acc, f| mul(f, acc))
}

/// `Sum_l (a * b)` with `a` free of `l` becomes `a * Sum_l b`.
fn hoist_factors(e: &Scalar, fired: &mut Option<&'static str>) -> Scalar {
    match e {
        Scalar::Sum { level, extent, body } => {
            let body = hoist_factors(body, fired);
            let mut fs = Vec::new();
            factors(&body, &mut fs);
            let (inv, var): (Vec<Scalar>, Vec<Scalar>) = fs.into_iter().partition(|f| !f.uses_level(*level));
            if inv.is_empty() || var.is_empty() {
                return sum(*level, *extent, body);
            }
            fired.get_or_insert("hoist-factor");
            let l = *level;
            let inv: Vec<Scalar> = inv.iter().map(|f| f.reindex(&|x| if x > l { x - 1 } else { x })).collect();
            mul(product(inv), sum(l, *extent, product(var)))
        }
        other => other.map_children(&mut |ch| hoist_factors(ch, fired)),
    }
}
