//! Marks in-place kernels, copying operands that are still live.

use super::{inplace_operand, reads, InPlace, Stmt};
use crate::expr::{Graph, TId, TNode};
use std::collections::{HashMap, HashSet};

pub fn inline_inplace(g: &Graph, stmts: &[Stmt]) -> Vec<Stmt> {
    let lets: HashSet<TId> = stmts
        .iter()
        .filter_map(|s| match s {
            Stmt::Let { node, .. } => Some(*node),
            _ => None,
        })
        .collect();
    let defined = |t: TId| lets.contains(&t);
    let mut last: HashMap<TId, usize> = HashMap::new();
    for (i, s) in stmts.iter().enumerate() {
        for r in reads(g, s, &defined) {
            last.insert(r, i);
        }
    }
    stmts
        .iter()
        .enumerate()
        .map(|(i, s)| match s {
            Stmt::Let { node, .. } => {
                let inplace = match inplace_operand(g, *node) {
                    None => InPlace::No,
                    Some(o) => {
                        let own = defined(o) && !g.node(o).is_view() && !matches!(g.node(o), TNode::Input(_));
                        if own && last.get(&o) == Some(&i) {
                            InPlace::Yes
                        } else {
                            InPlace::CopyThen
                        }
                    }
                };
                Stmt::Let { node: *node, inplace }
            }
            other => other.clone(),
        })
        .collect()
}
