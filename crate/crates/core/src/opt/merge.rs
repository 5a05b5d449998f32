//! Loop merging: an elementwise index abstraction read by exactly one other
//! abstraction over the same range is substituted into it.

use super::{rebuild, Rewrite};
use crate::diag::DResult;
use crate::expr::{Graph, Scalar, TId, TNode};
use std::collections::HashMap;

pub fn round(g: &mut Graph, roots: &[TId], trace: &mut Vec<Rewrite>) -> DResult<Vec<TId>> {
    let uses = use_counts(g, roots);
    rebuild(g, roots, &mut |g, node| Ok(rewrite(g, &uses, &node)), trace)
}

/// Number of distinct consumers of each node; a root counts as one.
pub fn use_counts(g: &Graph, roots: &[TId]) -> HashMap<TId, usize> {
    let mut uses: HashMap<TId, usize> = HashMap::new();
    for t in g.reachable(roots) {
        let mut args = g.node(t).args();
        args.sort();
        args.dedup();
        for a in args {
            *uses.entry(a).or_default() += 1;
        }
    }
    for r in roots {
        *uses.entry(*r).or_default() += 1;
    }
    uses
}

fn elementwise(body: &Scalar) -> bool {
    !body.any(&|s| matches!(s, Scalar::Sum { .. } | Scalar::Dot(..) | Scalar::Precision(..)))
}

fn references(body: &Scalar, t: TId) -> usize {
    let mut n = 0;
    body.visit(&mut |s| match s {
        Scalar::Elem(x, _) if *x == t => n += 1,
        Scalar::Dot(a, b) | Scalar::Precision(a, b) => n += (*a == t) as usize + (*b == t) as usize,
        _ => {}
    });
    n
}

fn rewrite(g: &Graph, uses: &HashMap<TId, usize>, node: &TNode) -> Option<(TNode, &'static str)> {
    let TNode::IndexAbs { dims, body } = node else {
        return None;
    };
    let producer = body.tensors().into_iter().find(|&p| {
        let TNode::IndexAbs { dims: pd, body: pb } = g.node(p) else {
            return false;
        };
        pd == dims && elementwise(pb) && uses.get(&p) == Some(&1) && references(body, p) == 1 && {
            let mut ok = false;
            body.visit(&mut |s| {
                if let Scalar::Elem(x, idx) = s {
                    ok |= *x == p && idx.iter().copied().eq(0..dims.len());
                }
            });
            ok
        }
    })?;
    let TNode::IndexAbs { body: inner, .. } = g.node(producer) else {
        unreachable!()
    };
    Some((
        TNode::IndexAbs {
            dims: dims.clone(),
            body: substitute(body, producer, inner),
        },
        "merge",
    ))
}

fn substitute(e: &Scalar, p: TId, with: &Scalar) -> Scalar {
    match e {
        Scalar::Elem(t, _) if *t == p => with.clone(),
        other => other.map_children(&mut |ch| substitute(ch, p, with)),
    }
}
