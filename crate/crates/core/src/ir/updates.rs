//! Momentum SGD with weight decay and optional global clipping.

use super::{Buffer, Stmt};
use crate::expr::{Graph, PId};
use crate::netspec::SolverConfig;

/// Per parameter `p` with multipliers `m` (rate) and `d` (decay):
/// `g += decay·d·p`, then clipping, `v = momentum·v − lr·m·g`, `p += v`.
pub fn form_updates(g: &Graph, params: &[PId], solver: &SolverConfig) -> Vec<Stmt> {
    let mut out = Vec::new();
    for &p in params {
        let d = solver.decay * g.param_info(p).init.decay_mult;
        if d != 0.0 {
            out.push(Stmt::Update {
                param: p,
                target: Buffer::Grad,
                src: Buffer::Param,
                alpha: d,
                beta: 1.0,
            });
        }
    }
    if solver.clip > 0.0 {
        out.push(Stmt::ClipGrads { threshold: solver.clip });
    }
    for &p in params {
        let m = g.param_info(p).init.lr_mult;
        out.push(Stmt::Update {
            param: p,
            target: Buffer::Velocity,
            src: Buffer::Grad,
            alpha: -solver.lr * m,
            beta: solver.momentum,
        });
        out.push(Stmt::Update {
            param: p,
            target: Buffer::Param,
            src: Buffer::Velocity,
            alpha: 1.0,
            beta: 1.0,
        });
    }
    out
}
