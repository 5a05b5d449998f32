//! The whole pipeline from a parsed spec to a scheduled program.

use crate::autodiff::grad_all;
use crate::diag::{DResult, DiagKind, Diagnostic};
use crate::expr::TId;
use crate::ir::ssa::Root;
use crate::ir::{self, IrProgram, Stmt};
use crate::netspec::{elaborate, NetworkProgram};
use crate::opt::{optimize, Pass, RewriteTrace};
use tensorc_runtime::PoolMode;

#[derive(Clone, Debug)]
pub struct Options {
    pub mode: PoolMode,
    /// Bytes; `None` is unlimited.
    pub workspace_cap: Option<usize>,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            mode: PoolMode::Reuse,
            workspace_cap: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Compiled {
    pub ir: IrProgram,
    /// Roots before optimization: loss, accuracy if any, then gradients.
    pub unoptimized: Vec<TId>,
    pub optimized: Vec<TId>,
    pub traces: Vec<(Pass, RewriteTrace)>,
}

pub fn compile(prog: &NetworkProgram, opts: &Options) -> DResult<Compiled> {
    let mut e = elaborate(prog)?;
    let grads = grad_all(&mut e.graph, e.loss, &e.params)?;
    let mut roots = vec![e.loss];
    roots.extend(e.accuracy);
    roots.extend(&grads);
    let g = &mut e.graph;
    let o = optimize(g, &roots)?;
    let loss = o.roots[0];
    let accuracy = e.accuracy.map(|_| o.roots[1]);
    let grads = &o.roots[1 + accuracy.is_some() as usize..];

    let mut train_roots = vec![Root::Print(loss)];
    train_roots.extend(e.params.iter().zip(grads).map(|(&p, &t)| Root::Accum(p, t)));
    let mut train = ir::cse(g, &ir::to_ssa(g, &train_roots))?;
    train.extend(ir::form_updates(g, &e.params, &prog.solver));
    let train = finish(g, &train, opts.mode)?;

    let mut test_roots = vec![Root::Print(loss)];
    test_roots.extend(accuracy.map(Root::Print));
    let test = ir::cse(g, &ir::to_ssa(g, &test_roots))?;
    // CSE may rename the printed roots
    let prints: Vec<TId> = test
        .iter()
        .filter_map(|s| match s {
            Stmt::Print { node } => Some(*node),
            _ => None,
        })
        .collect();
    let (loss, accuracy) = (prints[0], prints.get(1).copied());
    let test = finish(g, &test, opts.mode)?;

    ir::verify(g, &train, Some(&e.params)).map_err(internal)?;
    ir::verify(g, &test, None).map_err(internal)?;
    Ok(Compiled {
        ir: IrProgram {
            graph: e.graph,
            params: e.params,
            loss,
            accuracy,
            train,
            test,
            solver: prog.solver.clone(),
            data: prog.data.clone(),
            mode: opts.mode,
            workspace_cap: opts.workspace_cap,
        },
        unoptimized: roots,
        optimized: o.roots,
        traces: o.traces,
    })
}

fn finish(g: &crate::expr::Graph, stmts: &[Stmt], mode: PoolMode) -> DResult<Vec<Stmt>> {
    let s = ir::schedule(g, stmts)?;
    let s = ir::inline_inplace(g, &s);
    Ok(ir::insert_dealloc(g, &s, mode))
}

fn internal(m: String) -> Diagnostic {
    Diagnostic::new(DiagKind::InternalError, crate::Span::default(), m)
}
