//! Flattening of the optimized graph into statements, and CSE.

use super::Stmt;
use crate::diag::DResult;
use crate::expr::{BinOp, Graph, PId, Scalar, TId, TNode};
use crate::opt::merge::use_counts;
use std::collections::{HashMap, HashSet};

/// Sources of a program body, in root order.
#[derive(Clone, Debug)]
pub enum Root {
    Print(TId),
    Accum(PId, TId),
}

/// Emits one `Let` per computed node in post-order, visiting heavier
/// operands first; each root becomes the statement that consumes it.
pub fn to_ssa(g: &Graph, roots: &[Root]) -> Vec<Stmt> {
    let tids: Vec<TId> = roots
        .iter()
        .map(|r| match r {
            Root::Print(t) | Root::Accum(_, t) => *t,
        })
        .collect();
    let uses = use_counts(g, &tids);
    let mut b = Builder {
        g,
        weight: HashMap::new(),
        seen: HashSet::new(),
        out: Vec::new(),
    };
    for r in roots {
        match r {
            Root::Print(t) => {
                b.operands(*t);
                b.out.push(Stmt::Print { node: *t });
            }
            Root::Accum(p, t) => {
                for term in accum_terms(g, *t, &uses) {
                    if is_zero(g, term) {
                        continue;
                    }
                    if uses.get(&term).copied().unwrap_or(0) > 1 || g.node(term).is_view() {
                        b.visit(term);
                    } else {
                        b.operands(term);
                    }
                    b.out.push(Stmt::Accum { param: *p, node: term });
                }
            }
        }
    }
    b.out
}

fn is_zero(g: &Graph, t: TId) -> bool {
    matches!(g.node(t), TNode::IndexAbs { body: Scalar::Const(v), .. } if v.0 == 0.0)
}

/// Summands of a gradient that is a sum used nowhere else.
fn accum_terms(g: &Graph, t: TId, uses: &HashMap<TId, usize>) -> Vec<TId> {
    match g.node(t) {
        TNode::Binary(BinOp::Add, a, b) if uses.get(&t) == Some(&1) => {
            let mut v = accum_terms(g, *a, uses);
            v.extend(accum_terms(g, *b, uses));
            v
        }
        _ => vec![t],
    }
}

struct Builder<'a> {
    g: &'a Graph,
    weight: HashMap<TId, f64>,
    seen: HashSet<TId>,
    out: Vec<Stmt>,
}

impl Builder<'_> {
    fn weight(&mut self, t: TId) -> f64 {
        if let Some(&w) = self.weight.get(&t) {
            return w;
        }
        let own = match self.g.node(t) {
            TNode::Param(_) => 0.0,
            n if n.is_view() => 0.0,
            _ => self.g.shape(t).iter().product::<usize>() as f64,
        };
        let w = own + self.g.node(t).args().into_iter().map(|a| self.weight(a)).sum::<f64>();
        self.weight.insert(t, w);
        w
    }

    fn operands(&mut self, t: TId) {
        let mut args = self.g.node(t).args();
        args.dedup();
        let mut ws: Vec<(f64, usize, TId)> = args.iter().enumerate().map(|(i, &a)| (self.weight(a), i, a)).collect();
        ws.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
        for (_, _, a) in ws {
            self.visit(a);
        }
    }

    fn visit(&mut self, t: TId) {
        if !self.seen.insert(t) {
            return;
        }
        match self.g.node(t) {
            TNode::Param(_) => {}
            n if n.is_view() => self.operands(t),
            _ => {
                self.operands(t);
                self.out.push(Stmt::Let {
                    node: t,
                    inplace: super::InPlace::No,
                });
            }
        }
    }
}

/// Replaces each `Let` whose right-hand side repeats an earlier one by the
/// earlier variable. Dropout masks are never merged.
pub fn cse(g: &mut Graph, stmts: &[Stmt]) -> DResult<Vec<Stmt>> {
    let mut subst: HashMap<TId, TId> = HashMap::new();
    let mut first: HashMap<TNode, TId> = HashMap::new();
    let mut out = Vec::with_capacity(stmts.len());
    // views are not statements, so they are rewritten on demand
    fn mapped(g: &mut Graph, t: TId, subst: &mut HashMap<TId, TId>) -> DResult<TId> {
        if let Some(&m) = subst.get(&t) {
            return Ok(m);
        }
        let n = g.node(t).clone();
        if !n.is_view() {
            return Ok(t);
        }
        let arg = n.args()[0];
        let a = mapped(g, arg, subst)?;
        let m = if a == arg { t } else { g.add(n.map_args(&|_| a))? };
        subst.insert(t, m);
        Ok(m)
    }
    let rewrite = |g: &mut Graph, t: TId, subst: &mut HashMap<TId, TId>| -> DResult<TNode> {
        let n = g.node(t).clone();
        let mut m = HashMap::new();
        for a in n.args() {
            m.insert(a, mapped(g, a, subst)?);
        }
        if let TNode::GradPrim { wrt, .. } = &n {
            m.insert(*wrt, mapped(g, *wrt, subst)?);
        }
        Ok(n.map_args(&|a| *m.get(&a).unwrap_or(&a)))
    };
    for s in stmts {
        match s {
            Stmt::Let { node, inplace } => {
                let key = rewrite(g, *node, &mut subst)?;
                let mergeable = !matches!(key, TNode::Mask { .. } | TNode::Input(_));
                if mergeable {
                    if let Some(&prev) = first.get(&key) {
                        subst.insert(*node, prev);
                        continue;
                    }
                }
                let t = if &key == g.node(*node) { *node } else { g.add(key.clone())? };
                if t != *node {
                    subst.insert(*node, t);
                }
                if mergeable {
                    first.insert(key, t);
                }
                out.push(Stmt::Let { node: t, inplace: *inplace });
            }
            Stmt::Accum { param, node } => {
                let t = match subst.get(node) {
                    Some(&m) => m,
                    None => {
                        let key = rewrite(g, *node, &mut subst)?;
                        g.add(key)?
                    }
                };
                out.push(Stmt::Accum { param: *param, node: t });
            }
            Stmt::Print { node } => {
                let key = rewrite(g, *node, &mut subst)?;
                out.push(Stmt::Print { node: g.add(key)? });
            }
            Stmt::Dealloc { node, pooled } => out.push(Stmt::Dealloc {
                node: *subst.get(node).unwrap_or(node),
                pooled: *pooled,
            }),
            other => out.push(other.clone()),
        }
    }
    Ok(out)
}
