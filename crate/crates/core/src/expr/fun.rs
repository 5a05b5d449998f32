//! Tensor functions and their application to a graph.
//!
//! A [`TensorFun`] is a pipeline of stages applied first to last, so
//! composition is concatenation and associativity holds structurally.

use super::graph::{Graph, PrimOp, TId};
use super::scalar::{self as s, Scalar, F64};
use super::shape::mismatch;
use crate::diag::{DResult, Span};
use crate::netspec::ParamInit;

#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    Conv { k: usize, out: usize, stride: usize, pad: usize, w: ParamInit, b: ParamInit },
    Pool { max: bool, k: usize, stride: usize, pad: usize },
    Relu { rank: Option<usize> },
    Full { out: usize, w: ParamInit, b: ParamInit },
    Flatten { rank: usize, axis: usize },
    Softmax,
    Dropout { rate: f64 },
    Lrn { size: usize, alpha: f64, beta: f64 },
    Concat(Vec<TensorFun>),
}

/// One layer application. Parameters are named `<prefix>_W` and `<prefix>_B`.
#[derive(Clone, Debug, PartialEq)]
pub struct Stage {
    pub op: Op,
    pub prefix: String,
    pub site: Span,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct TensorFun {
    pub stages: Vec<Stage>,
}

/// A tensor-to-scalar head applied to a tensor function.
#[derive(Clone, Debug, PartialEq)]
pub enum ScalarHead {
    /// Mean negative log-likelihood against one-hot labels of `K` classes.
    LogLoss(usize),
    Precision(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarFun {
    pub head: ScalarHead,
    pub body: TensorFun,
    pub site: Span,
}

impl TensorFun {
    pub fn id() -> Self {
        TensorFun::default()
    }

    pub fn stage(op: Op, prefix: impl Into<String>, site: Span) -> Self {
        TensorFun {
            stages: vec![Stage {
                op,
                prefix: prefix.into(),
                site,
            }],
        }
    }

    /// `f ∘ g`: applies `g` first.
    pub fn compose(f: &TensorFun, g: &TensorFun) -> TensorFun {
        let mut stages = g.stages.clone();
        stages.extend(f.stages.iter().cloned());
        TensorFun { stages }
    }

    pub fn apply(&self, g: &mut Graph, x: TId) -> DResult<TId> {
        self.stages.iter().try_fold(x, |x, st| apply_stage(st, g, x))
    }
}

impl ScalarFun {
    /// Builds the rank-0 root of this function applied to the image input.
    pub fn apply(&self, g: &mut Graph) -> DResult<TId> {
        let x = g.images();
        let out = self.body.apply(g, x)?;
        g.site = self.site;
        let shape = g.shape(out).to_vec();
        let k = match self.head {
            ScalarHead::LogLoss(k) | ScalarHead::Precision(k) => k,
        };
        if shape.len() != 2 || shape[1] != k {
            return Err(mismatch(self.site, format!("expected scores of shape [N, {k}], found {shape:?}")));
        }
        let y = g.input(super::graph::InputKind::Labels(k));
        match self.head {
            ScalarHead::LogLoss(_) => {
                let l = g.index_abs(shape.clone(), s::log(s::ident(out, 2)))?;
                let body = s::div(s::sub(s::c(0.0), Scalar::Dot(y, l)), Scalar::Card(shape[0]));
                g.index_abs(vec![], body)
            }
            ScalarHead::Precision(_) => g.index_abs(vec![], Scalar::Precision(y, out)),
        }
    }
}

/// `Σ_k c_k · f_k`; a lone unit-weight term is its own root.
pub fn weighted_sum(g: &mut Graph, terms: &[(f64, TId)]) -> DResult<TId> {
    if let [(c, t)] = terms {
        if *c == 1.0 {
            return Ok(*t);
        }
    }
    let mut body: Option<Scalar> = None;
    for (k, &(c, t)) in terms.iter().enumerate() {
        let term = s::mul(Scalar::Named(F64(c), format!("loss{}", k + 1)), s::elem(t, vec![]));
        body = Some(match body {
            None => term,
            Some(b) => s::add(b, term),
        });
    }
    g.index_abs(vec![], body.unwrap_or_else(|| s::c(0.0)))
}

fn apply_stage(st: &Stage, g: &mut Graph, x: TId) -> DResult<TId> {
    g.site = st.site;
    let xs = g.shape(x).to_vec();
    let w_name = format!("{}_W", st.prefix);
    let b_name = format!("{}_B", st.prefix);
    match &st.op {
        Op::Conv { k, out, stride, pad, w, b } => {
            if xs.len() != 4 {
                return Err(mismatch(st.site, format!("conv expects a rank-4 input (N,C,H,W), found {xs:?}")));
            }
            let wt = g.param(&w_name, vec![*out, xs[1], *k, *k], w)?;
            let bt = g.param(&b_name, vec![*out], b)?;
            g.prim(PrimOp::Conv { stride: *stride, pad: *pad }, vec![x, wt, bt])
        }
        Op::Pool { max, k, stride, pad } => g.prim(
            PrimOp::Pool {
                k: *k,
                stride: *stride,
                pad: *pad,
                max: *max,
            },
            vec![x],
        ),
        Op::Relu { rank } => {
            if let Some(r) = rank {
                if xs.len() != *r {
                    return Err(mismatch(st.site, format!("relu({r}) applied to rank-{} input {xs:?}", xs.len())));
                }
            }
            g.prim(PrimOp::Relu, vec![x])
        }
        Op::Full { out, w, b } => {
            if xs.len() != 2 {
                return Err(mismatch(
                    st.site,
                    format!("full expects a rank-2 input (N, features), found {xs:?}; flatten it first"),
                ));
            }
            let (n, inp) = (xs[0], xs[1]);
            let wt = g.param(&w_name, vec![*out, inp], w)?;
            let bt = g.param(&b_name, vec![*out], b)?;
            let prod = g.index_abs(vec![n, *out], s::sum(2, inp, s::mul(s::elem(x, vec![0, 2]), s::elem(wt, vec![1, 2]))))?;
            g.index_abs(vec![n, *out], s::add(s::ident(prod, 2), s::elem(bt, vec![1])))
        }
        Op::Flatten { rank, axis } => g.add(super::graph::TNode::Flatten {
            arg: x,
            rank: *rank,
            axis: *axis,
        }),
        Op::Softmax => {
            if xs.len() != 2 {
                return Err(mismatch(st.site, format!("softmax expects a rank-2 input, found {xs:?}")));
            }
            g.prim(PrimOp::Softmax, vec![x])
        }
        Op::Dropout { rate } => {
            let m = g.mask(*rate, xs)?;
            g.prim(PrimOp::Dropout { rate: F64(*rate) }, vec![x, m])
        }
        Op::Lrn { size, alpha, beta } => g.prim(
            PrimOp::Lrn {
                size: *size,
                alpha: F64(*alpha),
                beta: F64(*beta),
            },
            vec![x],
        ),
        Op::Concat(branches) => {
            let outs: Vec<TId> = branches.iter().map(|b| b.apply(g, x)).collect::<DResult<_>>()?;
            g.site = st.site;
            g.prim(PrimOp::Concat, outs)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(op: Op, p: &str) -> TensorFun {
        TensorFun::stage(op, p, Span::default())
    }

    #[test]
    fn composition_is_associative_after_normalization() {
        let a = f(Op::Relu { rank: None }, "a");
        let b = f(Op::Softmax, "b");
        let c = f(Op::Flatten { rank: 4, axis: 1 }, "c");
        let left = TensorFun::compose(&TensorFun::compose(&a, &b), &c);
        let right = TensorFun::compose(&a, &TensorFun::compose(&b, &c));
        assert_eq!(left, right);
        assert_eq!(TensorFun::compose(&TensorFun::id(), &b), b);
    }

    #[test]
    fn applied_order_is_right_to_left() {
        let mut g = Graph::new([2, 3, 4, 4], 10);
        let x = g.images();
        let net = TensorFun::compose(
            &f(Op::Full { out: 5, w: ParamInit::xavier(), b: ParamInit::zero() }, "fc"),
            &f(Op::Flatten { rank: 4, axis: 1 }, "fl"),
        );
        let y = net.apply(&mut g, x).unwrap();
        assert_eq!(g.shape(y), [2, 5]);
        assert_eq!(g.params[0].shape, [5, 48]);
    }

    #[test]
    fn full_on_rank4_is_shape_mismatch() {
        let mut g = Graph::new([2, 3, 4, 4], 10);
        let x = g.images();
        let e = f(Op::Full { out: 5, w: ParamInit::xavier(), b: ParamInit::zero() }, "fc").apply(&mut g, x).unwrap_err();
        assert_eq!(e.kind, crate::diag::DiagKind::ShapeMismatch);
    }
}
