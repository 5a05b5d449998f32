//! Greedy list scheduling for low peak memory.

use super::{inplace_operand, reads, Stmt};
use crate::diag::{DResult, DiagKind, Diagnostic};
use crate::expr::{Graph, TId};
use std::collections::{HashMap, HashSet};

/// Bytes of `t` at 4 bytes per element.
pub fn bytes(g: &Graph, t: TId) -> usize {
    4 * g.shape(t).iter().product::<usize>()
}

/// Reorders the statements before the update block. Among ready
/// statements the one freeing the most bytes runs first, then the one
/// allocating least, then the earliest. Statements that read nothing,
/// such as inputs, run right before their first consumer.
pub fn schedule(g: &Graph, stmts: &[Stmt]) -> DResult<Vec<Stmt>> {
    let split = stmts.iter().position(Stmt::is_update).unwrap_or(stmts.len());
    let (body, tail) = stmts.split_at(split);
    let defs: HashMap<TId, usize> = body
        .iter()
        .enumerate()
        .filter_map(|(i, s)| match s {
            Stmt::Let { node, .. } => Some((*node, i)),
            _ => None,
        })
        .collect();
    let defined = |t: TId| defs.contains_key(&t);
    let rd: Vec<Vec<TId>> = body.iter().map(|s| reads(g, s, &defined)).collect();
    let mut left: HashMap<TId, usize> = HashMap::new();
    for r in rd.iter().flatten() {
        *left.entry(*r).or_default() += 1;
    }
    // inputs and dropout masks read nothing and are produced on demand
    let is_input = |i: usize| matches!(&body[i], Stmt::Let { .. }) && rd[i].is_empty();
    for (i, r) in rd.iter().enumerate() {
        if let Some(&missing) = r.iter().find(|t| !defined(**t)) {
            return Err(Diagnostic::new(
                DiagKind::InternalError,
                g.site_of(missing),
                format!("statement {i} reads a value that is never defined"),
            ));
        }
    }
    let mut done = vec![false; body.len()];
    let mut out = Vec::with_capacity(stmts.len());
    let mut remaining: HashSet<usize> = (0..body.len()).filter(|&i| !is_input(i)).collect();
    while !remaining.is_empty() {
        let mut best: Option<((usize, i64, i64), usize)> = None;
        for &i in &remaining {
            let ready = rd[i].iter().all(|t| done[defs[t]] || is_input(defs[t]));
            if !ready {
                continue;
            }
            let target = match &body[i] {
                Stmt::Let { node, .. } => inplace_operand(g, *node).filter(|o| {
                    !g.node(*o).is_view() && defined(*o) && left.get(o) == Some(&1) && !is_input(defs[o])
                }),
                _ => None,
            };
            let freed: usize = rd[i]
                .iter()
                .filter(|t| left[*t] == 1 && Some(**t) != target)
                .map(|t| bytes(g, *t))
                .sum();
            let alloc = match &body[i] {
                Stmt::Let { node, .. } if target.is_none() => bytes(g, *node),
                _ => 0,
            };
            let key = (freed, -(alloc as i64), -(i as i64));
            if best.as_ref().is_none_or(|(k, _)| key > *k) {
                best = Some((key, i));
            }
        }
        let Some((_, i)) = best else {
            return Err(Diagnostic::new(
                DiagKind::InternalError,
                g.site,
                "statement dependencies form a cycle".to_string(),
            ));
        };
        for t in &rd[i] {
            let d = defs[t];
            if !done[d] {
                done[d] = true;
                out.push(body[d].clone());
            }
        }
        for t in &rd[i] {
            *left.get_mut(t).expect("counted") -= 1;
        }
        done[i] = true;
        remaining.remove(&i);
        out.push(body[i].clone());
    }
    for (i, s) in body.iter().enumerate() {
        if !done[i] {
            out.push(s.clone());
        }
    }
    out.extend(tail.iter().cloned());
    Ok(out)
}
