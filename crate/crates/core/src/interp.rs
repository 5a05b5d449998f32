//! Direct execution of a compiled program on the runtime.

use crate::expr::lower::{lower, Lowered};
use crate::expr::{Graph, InputKind, PId, TId, TNode};
use crate::ir::{inplace_operand, Buffer, InPlace, IrProgram, Stmt};
use crate::netspec::{Init as SpecInit, ParamInit};
use std::collections::HashMap;
use tensorc_runtime::driver::{Network, Params, TestOutput};
use tensorc_runtime::{solver, Arg, Batch, Context, Element, Init, Result, RuntimeError, Tensor};

pub fn runtime_init(p: &ParamInit) -> Init {
    match p.init {
        SpecInit::Xavier => Init::Xavier,
        SpecInit::Const(v) => Init::Const(v),
        SpecInit::Gaussian(s) => Init::Gaussian(s),
    }
}

/// `(name, dims, initializer)` of every parameter, in program order.
pub fn param_specs(p: &IrProgram) -> Vec<(String, Vec<usize>, Init)> {
    p.params
        .iter()
        .map(|&q| {
            let i = p.graph.param_info(q);
            (i.name.clone(), i.shape.clone(), runtime_init(&i.init))
        })
        .collect()
}

pub struct Interpreter<'p, T: Element> {
    prog: &'p IrProgram,
    ctx: Context<T>,
    params: Params<T>,
    slot: HashMap<PId, usize>,
    vals: HashMap<TId, Tensor<T>>,
    /// Live pool bytes after each train statement, when enabled.
    pub live_trace: Option<Vec<usize>>,
}

impl<'p, T: Element> Interpreter<'p, T> {
    pub fn new(prog: &'p IrProgram, seed: u64) -> Self {
        Interpreter {
            prog,
            ctx: Context::new(prog.mode, prog.workspace_cap, seed),
            params: Params::init(&param_specs(prog), seed),
            slot: prog.params.iter().enumerate().map(|(i, &q)| (q, i)).collect(),
            vals: HashMap::new(),
            live_trace: None,
        }
    }

    pub fn context(&self) -> &Context<T> {
        &self.ctx
    }

    fn run(&mut self, body: &[Stmt], batch: &Batch, trace: bool) -> Result<Vec<(TId, f64)>> {
        let mut printed = Vec::new();
        for s in body {
            self.exec(s, batch, &mut printed)?;
            if trace {
                if let Some(t) = &mut self.live_trace {
                    t.push(self.ctx.pool().stats().live_bytes);
                }
            }
        }
        // a verified body frees everything; this only guards failed runs
        for (_, t) in self.vals.drain() {
            self.ctx.release(t);
        }
        Ok(printed)
    }

    fn exec(&mut self, s: &Stmt, batch: &Batch, printed: &mut Vec<(TId, f64)>) -> Result<()> {
        let g = &self.prog.graph;
        match s {
            Stmt::Let { node, inplace } => {
                let v = self.compute(*node, *inplace, batch)?;
                self.vals.insert(*node, v);
            }
            Stmt::Dealloc { node, .. } => {
                if let Some(t) = self.vals.remove(node) {
                    self.ctx.release(t);
                }
            }
            Stmt::Accum { param, node } => {
                let i = self.slot[param];
                let held = g.storage(*node);
                if self.vals.contains_key(&held) || matches!(g.node(held), TNode::Param(_)) {
                    let src = operand(g, &self.vals, &self.params.values, &self.slot, *node)?;
                    for (d, &v) in self.params.grads[i].data_mut().iter_mut().zip(src.data) {
                        *d = *d + v;
                    }
                } else {
                    let Lowered::Kernel(k, args) = lower(g, *node) else {
                        return Err(RuntimeError::Unsupported("gradient without a kernel"));
                    };
                    let a = operands(g, &self.vals, &self.params.values, &self.slot, &args)?;
                    self.ctx.eval_into(&k, &a, &mut self.params.grads[i], true)?;
                }
            }
            Stmt::Print { node } => {
                let v = match self.vals.get(node) {
                    Some(t) => t.item().as_f64(),
                    None => {
                        let t = self.compute(*node, InPlace::No, batch)?;
                        let v = t.item().as_f64();
                        self.ctx.release(t);
                        v
                    }
                };
                printed.push((*node, v));
            }
            Stmt::Update {
                param,
                target,
                src,
                alpha,
                beta,
            } => {
                let i = self.slot[param];
                let p = &mut self.params;
                let (t, s): (&mut Tensor<T>, &Tensor<T>) = match (target, src) {
                    (Buffer::Grad, Buffer::Param) => (&mut p.grads[i], &p.values[i]),
                    (Buffer::Velocity, Buffer::Grad) => (&mut p.velocities[i], &p.grads[i]),
                    (Buffer::Param, Buffer::Velocity) => (&mut p.values[i], &p.velocities[i]),
                    (Buffer::Param, Buffer::Grad) => (&mut p.values[i], &p.grads[i]),
                    _ => return Err(RuntimeError::Unsupported("update between these buffers")),
                };
                solver::axpby(t, s, *alpha, *beta)?;
            }
            Stmt::ClipGrads { threshold } => {
                let mut gs: Vec<&mut Tensor<T>> = self.params.grads.iter_mut().collect();
                solver::clip_global(&mut gs, *threshold);
            }
        }
        Ok(())
    }

    fn compute(&mut self, t: TId, inplace: InPlace, batch: &Batch) -> Result<Tensor<T>> {
        let g = &self.prog.graph;
        match g.node(t) {
            TNode::Input(InputKind::Images) => return self.ctx.images(batch, &g.images[1..]),
            TNode::Input(InputKind::Labels(k)) => return self.ctx.indicator(batch, *k),
            _ => {}
        }
        match lower(g, t) {
            Lowered::Precision(labels, scores) => {
                let y = operand(g, &self.vals, &self.params.values, &self.slot, labels)?;
                let s = operand(g, &self.vals, &self.params.values, &self.slot, scores)?;
                let cols = *s.shape.last().unwrap_or(&1);
                let p = tensorc_runtime::kernels::misc::precision(s.data, y.data, cols);
                let mut out = self.ctx.pool_mut().acquire(&[])?;
                out.data_mut()[0] = T::of(p);
                Ok(out)
            }
            Lowered::Kernel(k, args) => match inplace {
                InPlace::No => {
                    let a = operands(g, &self.vals, &self.params.values, &self.slot, &args)?;
                    self.ctx.eval(&k, &a)
                }
                InPlace::Yes | InPlace::CopyThen => {
                    let o = inplace_operand(g, t).ok_or(RuntimeError::Unsupported("in-place without an operand"))?;
                    let mut target = if inplace == InPlace::Yes {
                        self.vals.remove(&o).ok_or(RuntimeError::Unsupported("in-place operand is not held"))?
                    } else {
                        let src = operand(g, &self.vals, &self.params.values, &self.slot, o)?;
                        let mut c = self.ctx.pool_mut().acquire(src.shape)?;
                        c.data_mut().copy_from_slice(src.data);
                        c
                    };
                    target.reshape(g.shape(t))?;
                    let rest = operands(g, &self.vals, &self.params.values, &self.slot, &args[1..])?;
                    self.ctx.eval_inplace(&k, &mut target, &rest)?;
                    Ok(target)
                }
            },
            Lowered::Source => Err(RuntimeError::Unsupported("source node as a statement")),
        }
    }
}

fn printed(out: &[(TId, f64)], node: Option<TId>) -> Option<f64> {
    out.iter().find(|(t, _)| Some(*t) == node).map(|(_, v)| *v)
}

fn operand<'a, T: Element>(
    g: &'a Graph,
    vals: &'a HashMap<TId, Tensor<T>>,
    params: &'a [Tensor<T>],
    slot: &HashMap<PId, usize>,
    t: TId,
) -> Result<Arg<'a, T>> {
    let s = g.storage(t);
    let held = match g.node(s) {
        TNode::Param(p) => &params[slot[p]],
        _ => vals
            .get(&s)
            .ok_or_else(|| RuntimeError::shape("interp", format!("operand T{} is not live", s.0)))?,
    };
    Ok(held.arg_as(g.shape(t)))
}

fn operands<'a, T: Element>(
    g: &'a Graph,
    vals: &'a HashMap<TId, Tensor<T>>,
    params: &'a [Tensor<T>],
    slot: &HashMap<PId, usize>,
    ts: &[TId],
) -> Result<Vec<Arg<'a, T>>> {
    ts.iter().map(|&t| operand(g, vals, params, slot, t)).collect()
}

impl<T: Element> Network<T> for Interpreter<'_, T> {
    fn params(&self) -> &Params<T> {
        &self.params
    }

    fn params_mut(&mut self) -> &mut Params<T> {
        &mut self.params
    }

    fn train_step(&mut self, batch: &Batch, iteration: u64) -> Result<f64> {
        self.ctx.set_training(true);
        self.ctx.set_iteration(iteration);
        self.params.zero_grads();
        let body = &self.prog.train;
        let out = self.run(body, batch, true)?;
        Ok(printed(&out, Some(self.prog.loss)).unwrap_or(f64::NAN))
    }

    fn test_step(&mut self, batch: &Batch) -> Result<TestOutput> {
        self.ctx.set_training(false);
        let body = &self.prog.test;
        let out = self.run(body, batch, false)?;
        Ok(TestOutput {
            loss: printed(&out, Some(self.prog.loss)).unwrap_or(f64::NAN),
            precision: printed(&out, self.prog.accuracy),
        })
    }
}
