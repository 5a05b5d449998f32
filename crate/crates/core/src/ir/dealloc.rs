//! Frees each buffer right after its last use.

use super::{reads, InPlace, Stmt};
use crate::expr::{Graph, TId};
use std::collections::{HashMap, HashSet};
use tensorc_runtime::PoolMode;

/// In-place chains share one buffer; the Dealloc names the last member.
/// Reuse mode emits the same markers, tagged as returns to the pool.
pub fn insert_dealloc(g: &Graph, stmts: &[Stmt], mode: PoolMode) -> Vec<Stmt> {
    let pooled = mode == PoolMode::Reuse;
    let lets: HashSet<TId> = stmts
        .iter()
        .filter_map(|s| match s {
            Stmt::Let { node, .. } => Some(*node),
            _ => None,
        })
        .collect();
    let defined = |t: TId| lets.contains(&t);
    // chain head of every variable, and current last member of each chain
    let mut head: HashMap<TId, TId> = HashMap::new();
    let mut tip: HashMap<TId, TId> = HashMap::new();
    let mut last: HashMap<TId, usize> = HashMap::new();
    for (i, s) in stmts.iter().enumerate() {
        for r in reads(g, s, &defined) {
            last.insert(head[&r], i);
        }
        if let Stmt::Let { node, inplace } = s {
            let h = match inplace {
                InPlace::Yes => head[&super::inplace_operand(g, *node).expect("in-place operand")],
                _ => *node,
            };
            head.insert(*node, h);
            tip.insert(h, *node);
            last.entry(h).and_modify(|l| *l = (*l).max(i)).or_insert(i);
        }
    }
    let mut frees: HashMap<usize, Vec<TId>> = HashMap::new();
    let mut order: Vec<TId> = Vec::new();
    for (i, s) in stmts.iter().enumerate() {
        // release in operand order, then anything defined and never read
        let mut hs: Vec<TId> = reads(g, s, &defined).into_iter().map(|r| head[&r]).collect();
        if let Stmt::Let { node, .. } = s {
            hs.push(head[node]);
        }
        for h in hs {
            if last.get(&h) == Some(&i) && !order.contains(&h) {
                order.push(h);
                frees.entry(i).or_default().push(tip[&h]);
            }
        }
    }
    let mut out = Vec::with_capacity(stmts.len() + order.len());
    for (i, s) in stmts.iter().enumerate() {
        out.push(s.clone());
        for &t in frees.get(&i).into_iter().flatten() {
            out.push(Stmt::Dealloc { node: t, pooled });
        }
    }
    out
}
