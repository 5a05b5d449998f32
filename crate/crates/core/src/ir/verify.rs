//! Linear checker for the statement invariants.

use super::{inplace_operand, reads, Buffer, InPlace, Names, Stmt};
use crate::expr::{Graph, PId, TId, TNode};
use std::collections::{HashMap, HashSet};

/// Checks single assignment, definition before use, no use after free or
/// clobber, each buffer freed exactly once right after its last use, and
/// the update block closing the body. `params` must each be updated when
/// given.
pub fn verify(g: &Graph, stmts: &[Stmt], params: Option<&[PId]>) -> Result<(), String> {
    let names = Names::new([stmts]);
    let show = |t: TId| names.operand(g, t);
    let lets: HashSet<TId> = stmts
        .iter()
        .filter_map(|s| match s {
            Stmt::Let { node, .. } => Some(*node),
            _ => None,
        })
        .collect();
    let defined = |t: TId| lets.contains(&t);
    let mut assigned: HashSet<TId> = HashSet::new();
    let mut live: HashSet<TId> = HashSet::new();
    let mut freed: HashSet<TId> = HashSet::new();
    let mut head: HashMap<TId, TId> = HashMap::new();
    let mut last_use: HashMap<TId, usize> = HashMap::new();
    let mut freed_at: HashMap<TId, usize> = HashMap::new();
    let mut in_updates = false;
    let mut updated: HashSet<(PId, Buffer)> = HashSet::new();
    for (i, s) in stmts.iter().enumerate() {
        if s.is_update() {
            in_updates = true;
        } else if in_updates && !matches!(s, Stmt::Dealloc { .. }) {
            return Err(format!("statement {i} follows the update block"));
        }
        for r in reads(g, s, &defined) {
            if !live.contains(&r) {
                let why = if freed.contains(&r) { "after its Dealloc" } else { "before its definition or after being overwritten" };
                return Err(format!("statement {i} uses {} {why}", show(r)));
            }
            last_use.insert(head[&r], i);
        }
        match s {
            Stmt::Let { node, inplace } => {
                if !assigned.insert(*node) {
                    return Err(format!("{} assigned twice", show(*node)));
                }
                if matches!(g.node(*node), TNode::Param(_)) || g.node(*node).is_view() {
                    return Err(format!("statement {i} binds a parameter or view"));
                }
                let h = if *inplace == InPlace::Yes {
                    let o = inplace_operand(g, *node).ok_or_else(|| format!("{} cannot run in place", show(*node)))?;
                    live.remove(&o);
                    head[&o]
                } else {
                    *node
                };
                head.insert(*node, h);
                last_use.entry(h).or_insert(i);
                live.insert(*node);
            }
            Stmt::Dealloc { node, .. } => {
                if !live.remove(node) {
                    return Err(format!("Dealloc({}) of a value that is not live", show(*node)));
                }
                let h = head[node];
                if freed_at.insert(h, i).is_some() {
                    return Err(format!("buffer of {} freed twice", show(*node)));
                }
                // only other Deallocs may separate a free from the last use
                let lu = last_use[&h];
                if stmts[lu + 1..i].iter().any(|x| !matches!(x, Stmt::Dealloc { .. })) {
                    return Err(format!("Dealloc({}) is not immediately after its last use", show(*node)));
                }
                freed.insert(*node);
            }
            Stmt::Update { param, target, .. } => {
                updated.insert((*param, *target));
            }
            _ => {}
        }
    }
    if let Some(&t) = live.iter().min() {
        return Err(format!("{} is never freed", show(t)));
    }
    if let Some(ps) = params {
        for &p in ps {
            if !updated.contains(&(p, Buffer::Param)) {
                return Err(format!("parameter {} has no update", g.param_info(p).name));
            }
        }
    }
    Ok(())
}
