//! Symbolic reverse-mode differentiation over the expression graph.
//!
//! Adjoints flow from the loss root towards the parameters in decreasing
//! node order. Indexed bodies are differentiated element by element; each
//! indexed access `A[idx]` yields a contribution tensor over `A`'s axes
//! whose unmatched levels become sums. Primitives map to backward forms.

use crate::diag::{DResult, DiagKind, Diagnostic};
use crate::expr::graph::{GradOp, Graph, PId, PrimOp, TId, TNode};
use crate::expr::scalar::{self as s, Scalar};
use std::collections::HashMap;

/// One indexed access reached by the reverse walk.
struct Access {
    target: TId,
    idx: Vec<usize>,
    /// Adjoint of the accessed element, upstream factor included.
    factor: Scalar,
    /// Levels bound between the tensor binders and the access: `(level, extent)`.
    bound: Vec<(usize, usize)>,
}

struct Walk<'a> {
    g: &'a Graph,
    needs: &'a [bool],
    rank: usize,
    out: Vec<Access>,
}

impl Walk<'_> {
    fn dep(&self, e: &Scalar) -> bool {
        e.tensors().iter().any(|t| self.needs[t.ix()])
    }

    fn go(&mut self, e: &Scalar, seed: Scalar, bound: &mut Vec<(usize, usize)>) -> DResult<()> {
        if !self.dep(e) {
            return Ok(());
        }
        match e {
            Scalar::Elem(t, idx) => self.out.push(Access {
                target: *t,
                idx: idx.clone(),
                factor: seed,
                bound: bound.clone(),
            }),
            Scalar::Add(a, b) => {
                self.go(a, seed.clone(), bound)?;
                self.go(b, seed, bound)?;
            }
            Scalar::Sub(a, b) => {
                self.go(a, seed.clone(), bound)?;
                self.go(b, s::neg(seed), bound)?;
            }
            Scalar::Mul(a, b) => {
                self.go(a, s::mul(seed.clone(), (**b).clone()), bound)?;
                self.go(b, s::mul(seed, (**a).clone()), bound)?;
            }
            Scalar::Div(a, b) => {
                self.go(a, s::div(seed.clone(), (**b).clone()), bound)?;
                let db = s::neg(s::div(s::mul(seed, (**a).clone()), s::mul((**b).clone(), (**b).clone())));
                self.go(b, db, bound)?;
            }
            Scalar::Neg(a) => self.go(a, s::neg(seed), bound)?,
            Scalar::Log(a) => self.go(a, s::mul(seed, s::div(s::c(1.0), (**a).clone())), bound)?,
            Scalar::Exp(a) => self.go(a, s::mul(seed, e.clone()), bound)?,
            Scalar::Max(a, b) => {
                let ge = Scalar::Ge(a.clone(), b.clone());
                self.go(a, s::mul(seed.clone(), ge.clone()), bound)?;
                self.go(b, s::mul(seed, s::sub(s::c(1.0), ge)), bound)?;
            }
            Scalar::Ge(..) => {}
            Scalar::Sum { level, extent, body } => {
                bound.push((*level, *extent));
                self.go(body, seed, bound)?;
                bound.pop();
            }
            Scalar::Dot(a, b) => {
                let dims = self.g.shape(*a).to_vec();
                let depth = self.rank + bound.len();
                let levels: Vec<usize> = (depth..depth + dims.len()).collect();
                let mut inner = bound.clone();
                inner.extend(levels.iter().copied().zip(dims.iter().copied()));
                for (x, y) in [(*a, *b), (*b, *a)] {
                    if self.needs[x.ix()] {
                        self.out.push(Access {
                            target: x,
                            idx: levels.clone(),
                            factor: s::mul(seed.clone(), s::elem(y, levels.clone())),
                            bound: inner.clone(),
                        });
                    }
                }
            }
            Scalar::Precision(..) => {
                return Err(Diagnostic::new(
                    DiagKind::NotDifferentiable,
                    self.g.site,
                    "precision has no derivative; it cannot appear in a loss",
                ))
            }
            Scalar::Const(_) | Scalar::Named(..) | Scalar::Card(_) | Scalar::Index(_) => {}
        }
        Ok(())
    }
}

/// The contribution tensor of one access to the adjoint of its target.
fn contribution(g: &mut Graph, dims: &[usize], a: Access) -> DResult<TId> {
    let target_dims = g.shape(a.target).to_vec();
    let ra = target_dims.len();
    let mut seen = Vec::new();
    for &l in &a.idx {
        if seen.contains(&l) {
            return Err(Diagnostic::new(
                DiagKind::NotDifferentiable,
                g.site,
                "an index repeated within one access has no supported derivative",
            ));
        }
        seen.push(l);
    }
    let depth = dims.len() + a.bound.len();
    let mut extent_of: Vec<usize> = dims.to_vec();
    let mut sorted = a.bound.clone();
    sorted.sort_unstable();
    for &(l, e) in &sorted {
        debug_assert_eq!(l, extent_of.len());
        extent_of.push(e);
    }
    let rest: Vec<usize> = (0..depth).filter(|l| !a.idx.contains(l)).collect();
    let mut map: Vec<usize> = vec![0; depth];
    for (k, &l) in a.idx.iter().enumerate() {
        map[l] = k;
    }
    for (k, &l) in rest.iter().enumerate() {
        map[l] = ra + k;
    }
    let mut body = a.factor.reindex(&|l| if l < depth { map[l] } else { l });
    for (k, &l) in rest.iter().enumerate().rev() {
        body = s::sum(ra + k, extent_of[l], body);
    }
    g.index_abs(target_dims, body)
}

/// Gradients of the rank-0 `loss` with respect to each of `params`.
pub fn grad_all(g: &mut Graph, loss: TId, params: &[PId]) -> DResult<Vec<TId>> {
    if !g.shape(loss).is_empty() {
        return Err(Diagnostic::new(DiagKind::ShapeMismatch, g.site_of(loss), "the loss must be a scalar"));
    }
    let order = g.reachable(&[loss]);
    let mut needs = vec![false; g.len()];
    let wanted: Vec<TId> = params.iter().map(|&p| g.param_info(p).node).collect();
    for &t in &order {
        needs[t.ix()] = wanted.contains(&t) || g.node(t).args().iter().any(|a| needs[a.ix()]);
    }
    let mut contribs: HashMap<TId, Vec<TId>> = HashMap::new();
    let seed = g.index_abs(vec![], s::c(1.0))?;
    contribs.insert(loss, vec![seed]);
    let mut result: HashMap<TId, TId> = HashMap::new();
    for &t in order.iter().rev() {
        if !needs[t.ix()] {
            continue;
        }
        let Some(cs) = contribs.remove(&t) else { continue };
        g.site = g.site_of(t);
        let dims = g.shape(t).to_vec();
        let up = if cs.len() == 1 {
            cs[0]
        } else {
            let body = cs.iter().map(|&c| s::ident(c, dims.len())).reduce(s::add).expect("non-empty");
            g.index_abs(dims.clone(), body)?
        };
        let node = g.node(t).clone();
        let mut push = |x: TId, c: TId| contribs.entry(x).or_default().push(c);
        let needs_of = |x: TId| needs[x.ix()];
        match node {
            TNode::Param(_) => {
                result.insert(t, up);
            }
            TNode::IndexAbs { body, .. } => {
                let needs_ref = needs.clone();
                let mut w = Walk {
                    g,
                    needs: &needs_ref,
                    rank: dims.len(),
                    out: Vec::new(),
                };
                w.go(&body, s::ident(up, dims.len()), &mut Vec::new())?;
                let accesses = std::mem::take(&mut w.out);
                for a in accesses {
                    let target = a.target;
                    let c = contribution(g, &dims, a)?;
                    push(target, c);
                }
            }
            TNode::Flatten { arg, .. } | TNode::Reshape { arg, .. } => {
                let back = g.add(TNode::Reshape {
                    arg: up,
                    dims: g.shape(arg).to_vec(),
                })?;
                push(arg, back);
            }
            TNode::Prim { op, args } => {
                let mut grad = |g: &mut Graph, op: GradOp, saved: Vec<TId>, wrt: TId| -> DResult<()> {
                    if needs_of(wrt) {
                        let c = g.add(TNode::GradPrim {
                            op,
                            saved,
                            upstream: up,
                            wrt,
                        })?;
                        push(wrt, c);
                    }
                    Ok(())
                };
                match op {
                    PrimOp::Conv { stride, pad } => {
                        let (x, w, b) = (args[0], args[1], args[2]);
                        grad(g, GradOp::ConvBias { stride, pad }, vec![], b)?;
                        grad(g, GradOp::ConvFilter { stride, pad }, vec![x], w)?;
                        grad(g, GradOp::ConvData { stride, pad }, vec![w], x)?;
                    }
                    PrimOp::Pool { k, stride, pad, max } => grad(g, GradOp::Pool { k, stride, pad, max }, vec![t, args[0]], args[0])?,
                    PrimOp::Relu => grad(g, GradOp::Relu, vec![t], args[0])?,
                    PrimOp::Softmax => grad(g, GradOp::Softmax, vec![t], args[0])?,
                    PrimOp::Dropout { .. } => grad(g, GradOp::Dropout, vec![args[1]], args[0])?,
                    PrimOp::Lrn { size, alpha, beta } => grad(g, GradOp::Lrn { size, alpha, beta }, vec![t, args[0]], args[0])?,
                    PrimOp::Concat => {
                        let mut lo = 0;
                        for &a in &args {
                            let hi = lo + g.shape(a)[1];
                            grad(g, GradOp::ConcatSlice { lo, hi }, vec![], a)?;
                            lo = hi;
                        }
                    }
                }
            }
            other => {
                return Err(Diagnostic::new(
                    DiagKind::NotDifferentiable,
                    g.site,
                    format!("no derivative rule for {:?}", std::mem::discriminant(&other)),
                ))
            }
        }
    }
    let mut out = Vec::new();
    for &p in params {
        let info = g.param_info(p).clone();
        out.push(match result.get(&info.node) {
            Some(&t) => t,
            None => {
                g.site = info.site;
                g.index_abs(info.shape.clone(), s::c(0.0))?
            }
        });
    }
    Ok(out)
}

/// Gradient of `loss` with respect to one parameter.
pub fn grad(g: &mut Graph, loss: TId, p: PId) -> DResult<TId> {
    Ok(grad_all(g, loss, &[p])?[0])
}
