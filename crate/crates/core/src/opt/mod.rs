//! Expression-level optimization passes, run in a fixed order:
//! simplify, merge_loops, code_motion, vectorize.

pub mod merge;
pub mod motion;
pub mod simplify;
pub mod vectorize;

use crate::diag::{DResult, DiagKind, Diagnostic};
use crate::expr::{Graph, TId, TNode};
use std::collections::HashMap;

/// Rounds allowed before a pass counts as diverging.
pub const FIXPOINT_CAP: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pass {
    Simplify,
    MergeLoops,
    CodeMotion,
    Vectorize,
}

impl Pass {
    pub const ALL: [Pass; 4] = [Pass::Simplify, Pass::MergeLoops, Pass::CodeMotion, Pass::Vectorize];

    pub fn name(self) -> &'static str {
        match self {
            Pass::Simplify => "simplify",
            Pass::MergeLoops => "merge_loops",
            Pass::CodeMotion => "code_motion",
            Pass::Vectorize => "vectorize",
        }
    }

    pub fn parse(s: &str) -> Option<Pass> {
        Pass::ALL.into_iter().find(|p| p.name() == s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rewrite {
    pub rule: String,
    pub before: TId,
    pub after: TId,
}

/// Rewrites applied by one pass, round by round.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RewriteTrace {
    pub rounds: Vec<Vec<Rewrite>>,
}

impl RewriteTrace {
    pub fn len(&self) -> usize {
        self.rounds.iter().map(|r| r.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Re-applies the recorded node substitutions to `roots`.
    pub fn replay(&self, g: &Graph, roots: &[TId]) -> Vec<TId> {
        let mut cur = roots.to_vec();
        for round in &self.rounds {
            let subst: HashMap<TId, TId> = round.iter().map(|r| (r.before, r.after)).collect();
            let mut memo: HashMap<TId, TId> = HashMap::new();
            cur = cur.iter().map(|&r| replay_node(g, r, &subst, &mut memo)).collect();
        }
        cur
    }

    pub fn render(&self, g: &Graph) -> String {
        let mut s = String::new();
        for (i, round) in self.rounds.iter().enumerate() {
            for r in round {
                s.push_str(&format!(
                    "round {}: {}: {} => {}\n",
                    i + 1,
                    r.rule,
                    g.render(r.before, &|t| tname(g, t)),
                    g.render(r.after, &|t| tname(g, t))
                ));
            }
        }
        s
    }
}

fn replay_node(g: &Graph, t: TId, subst: &HashMap<TId, TId>, memo: &mut HashMap<TId, TId>) -> TId {
    if let Some(&m) = memo.get(&t) {
        return m;
    }
    let out = match subst.get(&t) {
        Some(&a) => a,
        None => {
            let n = g.node(t);
            let args = n.args();
            let mapped: HashMap<TId, TId> = args.iter().map(|&a| (a, replay_node(g, a, subst, memo))).collect();
            if mapped.iter().all(|(a, b)| a == b) {
                t
            } else {
                g.lookup(&n.map_args(&|a| *mapped.get(&a).unwrap_or(&a))).unwrap_or(t)
            }
        }
    };
    memo.insert(t, out);
    out
}

/// `T<id>` for computed nodes, the name for parameters.
pub fn tname(g: &Graph, t: TId) -> String {
    match g.node(t) {
        TNode::Param(p) => g.param_info(*p).name.clone(),
        _ => format!("T{}", t.0),
    }
}

/// Prints every node reachable from `roots`.
pub fn dump(g: &Graph, roots: &[TId]) -> String {
    let mut s = String::new();
    for t in g.reachable(roots) {
        if let TNode::Param(_) = g.node(t) {
            continue;
        }
        s.push_str(&format!("T{} = {}    {:?}\n", t.0, g.render(t, &|x| tname(g, x)), g.shape(t)));
    }
    s
}

/// A local rewrite: the replacement for a node whose operands are already
/// rewritten, with the rule that fired.
pub type Rule<'a> = dyn FnMut(&mut Graph, TNode) -> DResult<Option<(TNode, &'static str)>> + 'a;

/// Rebuilds everything reachable from `roots` bottom-up through `rule`.
pub fn rebuild(g: &mut Graph, roots: &[TId], rule: &mut Rule<'_>, trace: &mut Vec<Rewrite>) -> DResult<Vec<TId>> {
    let mut map: HashMap<TId, TId> = HashMap::new();
    for t in g.reachable(roots) {
        let node = g.node(t).map_args(&|a| *map.get(&a).unwrap_or(&a));
        g.site = g.site_of(t);
        let new = match rule(g, node.clone())? {
            Some((n, name)) => {
                let new = g.add(n)?;
                trace.push(Rewrite {
                    rule: name.to_string(),
                    before: t,
                    after: new,
                });
                new
            }
            None => g.add(node)?,
        };
        map.insert(t, new);
    }
    Ok(roots.iter().map(|r| map[r]).collect())
}

/// Runs one pass to a fixpoint.
pub fn run_pass(g: &mut Graph, roots: &[TId], pass: Pass, trace: &mut RewriteTrace) -> DResult<Vec<TId>> {
    let mut cur = roots.to_vec();
    for _ in 0..FIXPOINT_CAP {
        let mut round = Vec::new();
        let next = match pass {
            Pass::Simplify => simplify::round(g, &cur, &mut round)?,
            Pass::MergeLoops => merge::round(g, &cur, &mut round)?,
            Pass::CodeMotion => motion::round(g, &cur, &mut round)?,
            Pass::Vectorize => vectorize::round(g, &cur, &mut round)?,
        };
        if !round.is_empty() {
            trace.rounds.push(round);
        }
        if next == cur {
            return Ok(cur);
        }
        cur = next;
    }
    Err(Diagnostic::new(
        DiagKind::InternalError,
        g.site,
        format!("{} did not reach a fixpoint within {FIXPOINT_CAP} rounds", pass.name()),
    ))
}

/// Output of the full pipeline.
#[derive(Clone, Debug)]
pub struct Optimized {
    pub roots: Vec<TId>,
    pub traces: Vec<(Pass, RewriteTrace)>,
}

/// simplify → merge_loops → code_motion → vectorize.
pub fn optimize(g: &mut Graph, roots: &[TId]) -> DResult<Optimized> {
    let mut cur = roots.to_vec();
    let mut traces = Vec::new();
    for pass in Pass::ALL {
        let mut t = RewriteTrace::default();
        cur = run_pass(g, &cur, pass, &mut t)?;
        traces.push((pass, t));
    }
    Ok(Optimized { roots: cur, traces })
}
