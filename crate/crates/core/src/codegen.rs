//! Emits a standalone Rust program for a compiled network. The program
//! depends only on `tensorc_runtime`; each runtime call is preceded by the
//! IR statement it implements.

use crate::expr::lower::{lower, Lowered};
use crate::expr::{Graph, InputKind, PId, TId, TNode};
use crate::interp::param_specs;
use crate::ir::{inplace_operand, Buffer, InPlace, IrProgram, Names, Stmt};
use crate::netspec::DataSource;
use std::collections::HashMap;
use std::fmt::Write;
use tensorc_runtime::kernels::{BinaryOp, UnaryOp};
use tensorc_runtime::{IndexExpr, Kernel};

/// File name for the program generated from `p`.
pub fn file_name(p: &IrProgram) -> String {
    format!("{}.gen.rs", p.solver.name)
}

/// Struct name derived from the solver name, e.g. `lenet` → `Lenet`.
pub fn type_name(p: &IrProgram) -> String {
    let mut out = String::new();
    for part in p.solver.name.split(|c: char| !c.is_ascii_alphanumeric()).filter(|s| !s.is_empty()) {
        let mut cs = part.chars();
        if let Some(f) = cs.next() {
            out.push(f.to_ascii_uppercase());
            out.extend(cs);
        }
    }
    if out.is_empty() || out.starts_with(|c: char| c.is_ascii_digit()) {
        out.insert_str(0, "Net");
    }
    out
}

pub fn emit(p: &IrProgram) -> String {
    let ty = type_name(p);
    let slot: HashMap<PId, usize> = p.params.iter().enumerate().map(|(i, &q)| (q, i)).collect();
    let mut s = String::new();
    let w = &mut s;
    let _ = writeln!(w, "//! Training program for `{}`, generated by tensorc.", p.solver.name);
    let _ = writeln!(w, "//!");
    let _ = writeln!(w, "//! Each runtime call follows the IR statement it implements. IR names in");
    let _ = writeln!(w, "//! comments are per body and unrelated to the local variable names.");
    let _ = writeln!(w);
    let _ = writeln!(w, "#![allow(dead_code, unused_imports, unused_mut, unused_variables, unused_assignments, clippy::all)]");
    let _ = writeln!(w);
    let _ = writeln!(w, "use std::path::Path;");
    let _ = writeln!(w, "use tensorc_runtime::driver::{{Network, Params, TestOutput}};");
    let _ = writeln!(w, "use tensorc_runtime::kernels::{{misc, BinaryOp, UnaryOp}};");
    let _ = writeln!(w, "use tensorc_runtime::{{");
    let _ = writeln!(w, "    snapshot, solver, Batch, Context, Dataset, Element, IndexExpr, IndexOp, Init, Kernel, PoolMode, Result, Split, Tensor,");
    let _ = writeln!(w, "}};");
    let _ = writeln!(w);
    let _ = writeln!(w, "/// Allocation strategy: `PoolMode::Reuse` or `PoolMode::Dealloc`.");
    let _ = writeln!(w, "pub const MODE: PoolMode = PoolMode::{:?};", p.mode);
    let _ = writeln!(w);
    let _ = writeln!(w, "pub type F = f32;");
    let cap = match p.workspace_cap {
        Some(c) => format!("Some({c})"),
        None => "None".into(),
    };
    let _ = writeln!(w, "/// Convolution workspace limit in bytes.");
    let _ = writeln!(w, "pub const WORKSPACE_CAP: Option<usize> = {cap};");
    let _ = writeln!(w, "pub const BATCH: usize = {};", p.data.batch);
    let _ = writeln!(w, "pub const SAMPLE: [usize; 3] = {:?};", p.data.shape);
    let _ = writeln!(w, "pub const CLASSES: usize = {};", p.data.classes);
    let _ = writeln!(w, "pub const TRAIN_ITERS: u64 = {};", p.solver.train_iters);
    let _ = writeln!(w, "pub const TEST_ITERS: usize = {};", p.solver.test_iters);
    let _ = writeln!(w, "pub const SNAPSHOT_EVERY: u64 = {};", p.solver.snapshot_every);
    let _ = writeln!(w);

    let _ = writeln!(w, "pub fn param_specs() -> Vec<(String, Vec<usize>, Init)> {{");
    let _ = writeln!(w, "    vec![");
    for (name, dims, init) in param_specs(p) {
        let _ = writeln!(w, "        ({name:?}.to_string(), vec!{dims:?}, Init::{init:?}),");
    }
    let _ = writeln!(w, "    ]");
    let _ = writeln!(w, "}}");
    let _ = writeln!(w);

    let _ = writeln!(w, "pub struct {ty} {{");
    let _ = writeln!(w, "    pub ctx: Context<F>,");
    let _ = writeln!(w, "    pub params: Params<F>,");
    let _ = writeln!(w, "}}");
    let _ = writeln!(w);
    let _ = writeln!(w, "impl {ty} {{");
    let _ = writeln!(w, "    pub fn new(seed: u64) -> Self {{");
    let _ = writeln!(w, "        {ty} {{");
    let _ = writeln!(w, "            ctx: Context::new(MODE, WORKSPACE_CAP, seed),");
    let _ = writeln!(w, "            params: Params::init(&param_specs(), seed),");
    let _ = writeln!(w, "        }}");
    let _ = writeln!(w, "    }}");
    let _ = writeln!(w, "}}");
    let _ = writeln!(w);

    let _ = writeln!(w, "impl Network<F> for {ty} {{");
    let _ = writeln!(w, "    fn params(&self) -> &Params<F> {{");
    let _ = writeln!(w, "        &self.params");
    let _ = writeln!(w, "    }}");
    let _ = writeln!(w);
    let _ = writeln!(w, "    fn params_mut(&mut self) -> &mut Params<F> {{");
    let _ = writeln!(w, "        &mut self.params");
    let _ = writeln!(w, "    }}");
    let _ = writeln!(w);
    let _ = writeln!(w, "    fn train_step(&mut self, batch: &Batch, iteration: u64) -> Result<f64> {{");
    let _ = writeln!(w, "        let {ty} {{ ctx, params: p }} = self;");
    let _ = writeln!(w, "        ctx.set_training(true);");
    let _ = writeln!(w, "        ctx.set_iteration(iteration);");
    let _ = writeln!(w, "        p.zero_grads();");
    let _ = writeln!(w, "        let mut loss = f64::NAN;");
    Body::new(p, &slot, &p.train).emit(w);
    let _ = writeln!(w, "        Ok(loss)");
    let _ = writeln!(w, "    }}");
    let _ = writeln!(w);
    let _ = writeln!(w, "    fn test_step(&mut self, batch: &Batch) -> Result<TestOutput> {{");
    if p.test.is_empty() {
        let _ = writeln!(w, "        Ok(TestOutput {{ loss: f64::NAN, precision: None }})");
    } else {
        let _ = writeln!(w, "        let {ty} {{ ctx, params: p }} = self;");
        let _ = writeln!(w, "        ctx.set_training(false);");
        let _ = writeln!(w, "        let mut loss = f64::NAN;");
        let _ = writeln!(w, "        let mut precision = None;");
        Body::new(p, &slot, &p.test).emit(w);
        let _ = writeln!(w, "        Ok(TestOutput {{ loss, precision }})");
    }
    let _ = writeln!(w, "    }}");
    let _ = writeln!(w, "}}");
    let _ = writeln!(w);
    emit_main(w, p, &ty);
    s
}

fn emit_main(w: &mut String, p: &IrProgram, ty: &str) {
    let name = &p.solver.name;
    let samples = p.data.samples.map_or("None".to_string(), |n| format!("Some({n})"));
    let _ = writeln!(w, "/// Training and test sets. `dir` overrides the data source compiled in.");
    let _ = writeln!(w, "pub fn datasets(dir: Option<&Path>) -> Result<(Dataset, Dataset)> {{");
    let _ = writeln!(w, "    let test_n = BATCH * TEST_ITERS.max(1);");
    let (seed, dir) = match &p.data.source {
        DataSource::Synthetic(s) => (*s, "None".to_string()),
        DataSource::MnistIdx(d) => (0, format!("Some(Path::new({d:?}))")),
    };
    let _ = writeln!(w, "    match dir.or({dir}) {{");
    let _ = writeln!(w, "        Some(d) => Ok((");
    let _ = writeln!(w, "            Dataset::load_mnist(d, Split::Train, &SAMPLE, CLASSES, {samples})?,");
    let _ = writeln!(w, "            Dataset::load_mnist(d, Split::Test, &SAMPLE, CLASSES, Some(test_n))?,");
    let _ = writeln!(w, "        )),");
    let _ = writeln!(w, "        None => Ok((");
    let n = p.data.samples.map_or("BATCH * 20".to_string(), |n| n.to_string());
    let _ = writeln!(w, "            Dataset::synthetic({seed}, Split::Train, {n}, &SAMPLE, CLASSES),");
    let _ = writeln!(w, "            Dataset::synthetic({seed}, Split::Test, test_n, &SAMPLE, CLASSES),");
    let _ = writeln!(w, "        )),");
    let _ = writeln!(w, "    }}");
    let _ = writeln!(w, "}}");
    let _ = writeln!(w);
    let _ = writeln!(w, "pub fn test(net: &mut {ty}, data: &Dataset) -> Result<TestOutput> {{");
    let _ = writeln!(w, "    let (mut loss, mut hits) = (0.0, 0.0);");
    let _ = writeln!(w, "    for i in 0..TEST_ITERS {{");
    let _ = writeln!(w, "        let out = net.test_step(&data.batch(i, BATCH))?;");
    let _ = writeln!(w, "        loss += out.loss;");
    let _ = writeln!(w, "        hits += out.precision.unwrap_or(0.0);");
    let _ = writeln!(w, "    }}");
    let _ = writeln!(w, "    let n = TEST_ITERS.max(1) as f64;");
    let prec = if p.accuracy.is_some() { "Some(hits / n)" } else { "None" };
    let _ = writeln!(w, "    Ok(TestOutput {{ loss: loss / n, precision: {prec} }})");
    let _ = writeln!(w, "}}");
    let _ = writeln!(w);
    let _ = writeln!(w, "/// Trains from the last snapshot in `dir`, if any, saving every");
    let _ = writeln!(w, "/// `SNAPSHOT_EVERY` iterations and at the end.");
    let _ = writeln!(w, "pub fn train(net: &mut {ty}, data: &Dataset, test_data: &Dataset, dir: &Path) -> Result<()> {{");
    let _ = writeln!(w, "    let mut start = 0;");
    let _ = writeln!(w, "    if snapshot::has_snapshot(dir) {{");
    let _ = writeln!(w, "        start = net.params.load(dir)?.1;");
    let _ = writeln!(w, "    }}");
    let _ = writeln!(w, "    for it in start..TRAIN_ITERS {{");
    let _ = writeln!(w, "        let loss = net.train_step(&data.batch(it as usize, BATCH), it)?;");
    let _ = writeln!(w, "        println!(\"iteration {{it}}: loss {{loss:.6}}\");");
    let _ = writeln!(w, "        if SNAPSHOT_EVERY > 0 && (it + 1) % SNAPSHOT_EVERY == 0 && it + 1 < TRAIN_ITERS {{");
    let _ = writeln!(w, "            net.params.save(dir, it + 1)?;");
    let _ = writeln!(w, "            report(&test(net, test_data)?);");
    let _ = writeln!(w, "        }}");
    let _ = writeln!(w, "    }}");
    let _ = writeln!(w, "    net.params.save(dir, TRAIN_ITERS.max(start))?;");
    let _ = writeln!(w, "    report(&test(net, test_data)?);");
    let _ = writeln!(w, "    Ok(())");
    let _ = writeln!(w, "}}");
    let _ = writeln!(w);
    let _ = writeln!(w, "fn report(t: &TestOutput) {{");
    let _ = writeln!(w, "    match t.precision {{");
    let _ = writeln!(w, "        Some(p) => println!(\"test: loss {{:.6}} precision {{p:.4}}\", t.loss),");
    let _ = writeln!(w, "        None => println!(\"test: loss {{:.6}}\", t.loss),");
    let _ = writeln!(w, "    }}");
    let _ = writeln!(w, "}}");
    let _ = writeln!(w);
    let _ = writeln!(w, "/// Usage: `{name} [DATA_DIR]`. `TENSORC_SEED` sets the seed.");
    let _ = writeln!(w, "pub fn main() {{");
    let _ = writeln!(w, "    let seed = std::env::var(\"TENSORC_SEED\").ok().and_then(|s| s.parse().ok()).unwrap_or(42);");
    let _ = writeln!(w, "    let dir = std::env::args().nth(1);");
    let _ = writeln!(w, "    let run = || -> Result<()> {{");
    let _ = writeln!(w, "        let (data, test_data) = datasets(dir.as_deref().map(Path::new))?;");
    let _ = writeln!(w, "        let mut net = {ty}::new(seed);");
    let _ = writeln!(w, "        train(&mut net, &data, &test_data, Path::new({:?}))", format!("{name}.snapshot"));
    let _ = writeln!(w, "    }};");
    let _ = writeln!(w, "    if let Err(e) = run() {{");
    let _ = writeln!(w, "        eprintln!(\"error: {{e}}\");");
    let _ = writeln!(w, "        std::process::exit(2);");
    let _ = writeln!(w, "    }}");
    let _ = writeln!(w, "}}");
}

struct Body<'a> {
    p: &'a IrProgram,
    g: &'a Graph,
    slot: &'a HashMap<PId, usize>,
    stmts: &'a [Stmt],
    names: Names,
}

const IND: &str = "        ";

impl<'a> Body<'a> {
    fn new(p: &'a IrProgram, slot: &'a HashMap<PId, usize>, stmts: &'a [Stmt]) -> Self {
        Body {
            p,
            g: &p.graph,
            slot,
            stmts,
            names: Names::new([stmts]),
        }
    }

    fn local(&self, t: TId) -> String {
        match self.names.get(t) {
            Some(n) => format!("x{n}"),
            None => format!("t{}", t.0),
        }
    }

    /// The tensor holding `t`, as an expression of type `Tensor<F>`.
    fn holder(&self, t: TId) -> String {
        let s = self.g.storage(t);
        match self.g.node(s) {
            TNode::Param(q) => format!("p.values[{}]", self.slot[q]),
            _ => self.local(s),
        }
    }

    fn arg(&self, t: TId) -> String {
        let s = self.g.storage(t);
        if self.g.shape(t) == self.g.shape(s) {
            format!("{}.arg()", self.holder(t))
        } else {
            format!("{}.arg_as(&{:?})", self.holder(t), self.g.shape(t))
        }
    }

    fn args(&self, ts: &[TId]) -> String {
        let a: Vec<String> = ts.iter().map(|&t| self.arg(t)).collect();
        format!("&[{}]", a.join(", "))
    }

    fn emit(&self, w: &mut String) {
        for s in self.stmts {
            let _ = writeln!(w, "{IND}// {}", crate::ir::render_stmt(self.g, &self.names, s));
            self.stmt(w, s);
        }
    }

    /// Expression computing `t` into a fresh tensor.
    fn compute(&self, t: TId) -> String {
        let g = self.g;
        match g.node(t) {
            TNode::Input(InputKind::Images) => return "ctx.images(batch, &SAMPLE)?".into(),
            TNode::Input(InputKind::Labels(k)) => return format!("ctx.indicator(batch, {k})?"),
            _ => {}
        }
        match lower(g, t) {
            Lowered::Precision(labels, scores) => format!(
                "{{ let mut t = ctx.pool_mut().acquire(&[])?; t.data_mut()[0] = F::of(misc::precision({}.data(), {}.data(), {})); t }}",
                self.holder(scores),
                self.holder(labels),
                g.shape(scores).last().copied().unwrap_or(1)
            ),
            Lowered::Kernel(k, args) => format!("ctx.eval(&{}, {})?", kernel_expr(&k), self.args(&args)),
            Lowered::Source => unreachable!("sources are inputs or parameters"),
        }
    }

    fn stmt(&self, w: &mut String, s: &Stmt) {
        let g = self.g;
        match s {
            Stmt::Let { node, inplace } => {
                let x = self.local(*node);
                match inplace {
                    InPlace::No => {
                        let _ = writeln!(w, "{IND}let {x} = {};", self.compute(*node));
                    }
                    InPlace::Yes | InPlace::CopyThen => {
                        let o = inplace_operand(g, *node).expect("verified in-place statement");
                        let Lowered::Kernel(k, args) = lower(g, *node) else { unreachable!("in-place statements lower to kernels") };
                        if *inplace == InPlace::Yes {
                            let _ = writeln!(w, "{IND}let mut {x} = {};", self.holder(o));
                        } else {
                            let _ = writeln!(w, "{IND}let mut {x} = ctx.copy(&{})?;", self.holder(o));
                        }
                        if g.shape(*node) != g.shape(g.storage(o)) {
                            let _ = writeln!(w, "{IND}{x}.reshape(&{:?})?;", g.shape(*node));
                        }
                        let _ = writeln!(w, "{IND}ctx.eval_inplace(&{}, &mut {x}, {})?;", kernel_expr(&k), self.args(&args[1..]));
                    }
                }
            }
            Stmt::Dealloc { node, .. } => {
                let _ = writeln!(w, "{IND}ctx.release({});", self.local(*node));
            }
            Stmt::Accum { param, node } => {
                let i = self.slot[param];
                let held = g.storage(*node);
                if self.names.get(held).is_some() || matches!(g.node(held), TNode::Param(_)) {
                    let _ = writeln!(w, "{IND}solver::axpby(&mut p.grads[{i}], &{}, 1.0, 1.0)?;", self.holder(*node));
                } else {
                    let Lowered::Kernel(k, args) = lower(g, *node) else { unreachable!("gradients lower to kernels") };
                    let _ = writeln!(w, "{IND}ctx.eval_into(&{}, {}, &mut p.grads[{i}], true)?;", kernel_expr(&k), self.args(&args));
                }
            }
            Stmt::Print { node } => {
                let value = if self.names.get(*node).is_some() {
                    format!("{}.item().as_f64()", self.local(*node))
                } else if matches!(lower(g, *node), Lowered::Precision(..)) {
                    let Lowered::Precision(labels, scores) = lower(g, *node) else { unreachable!() };
                    format!(
                        "misc::precision({}.data(), {}.data(), {})",
                        self.holder(scores),
                        self.holder(labels),
                        g.shape(scores).last().copied().unwrap_or(1)
                    )
                } else {
                    let _ = writeln!(w, "{IND}let v = {};", self.compute(*node));
                    let _ = writeln!(w, "{IND}let value = v.item().as_f64();");
                    let _ = writeln!(w, "{IND}ctx.release(v);");
                    "value".into()
                };
                if Some(*node) == self.p.accuracy {
                    let _ = writeln!(w, "{IND}precision = Some({value});");
                } else {
                    let _ = writeln!(w, "{IND}loss = {value};");
                }
            }
            Stmt::Update {
                param,
                target,
                src,
                alpha,
                beta,
            } => {
                let i = self.slot[param];
                let buf = |b: &Buffer| match b {
                    Buffer::Param => "values",
                    Buffer::Grad => "grads",
                    Buffer::Velocity => "velocities",
                };
                let _ = writeln!(
                    w,
                    "{IND}solver::axpby(&mut p.{}[{i}], &p.{}[{i}], {alpha:?}, {beta:?})?;",
                    buf(target),
                    buf(src)
                );
            }
            Stmt::ClipGrads { threshold } => {
                let _ = writeln!(w, "{IND}solver::clip_global(&mut p.grads.iter_mut().collect::<Vec<_>>(), {threshold:?});");
            }
        }
    }
}

/// Rust constructor syntax for a kernel.
pub fn kernel_expr(k: &Kernel) -> String {
    match k {
        Kernel::Conv { stride, pad } => format!("Kernel::Conv {{ stride: {stride}, pad: {pad} }}"),
        Kernel::ConvBackwardData { stride, pad, input } => {
            format!("Kernel::ConvBackwardData {{ stride: {stride}, pad: {pad}, input: {input:?} }}")
        }
        Kernel::ConvBackwardFilter { stride, pad, k } => {
            format!("Kernel::ConvBackwardFilter {{ stride: {stride}, pad: {pad}, k: {k} }}")
        }
        Kernel::Pool { k, stride, pad, max } => format!("Kernel::Pool {{ k: {k}, stride: {stride}, pad: {pad}, max: {max} }}"),
        Kernel::PoolBackward { k, stride, pad, max } => {
            format!("Kernel::PoolBackward {{ k: {k}, stride: {stride}, pad: {pad}, max: {max} }}")
        }
        Kernel::MatMul { ta, tb } => format!("Kernel::MatMul {{ ta: {ta}, tb: {tb} }}"),
        Kernel::Map(op) => format!("Kernel::Map({})", unary(*op)),
        Kernel::Binary(op) => format!("Kernel::Binary({})", binary(*op)),
        Kernel::ConcatBackward { lo, hi } => format!("Kernel::ConcatBackward {{ lo: {lo}, hi: {hi} }}"),
        Kernel::DropoutMask { rate, site, shape } => {
            format!("Kernel::DropoutMask {{ rate: {rate:?}, site: {site}, shape: vec!{shape:?} }}")
        }
        Kernel::Lrn { size, alpha, beta } => format!("Kernel::Lrn {{ size: {size}, alpha: {alpha:?}, beta: {beta:?} }}"),
        Kernel::LrnBackward { size, alpha, beta } => {
            format!("Kernel::LrnBackward {{ size: {size}, alpha: {alpha:?}, beta: {beta:?} }}")
        }
        Kernel::Index { shape, body } => format!("Kernel::Index {{ shape: vec!{shape:?}, body: {} }}", index_expr(body)),
        Kernel::Fill { shape, value } => format!("Kernel::Fill {{ shape: vec!{shape:?}, value: {value:?} }}"),
        Kernel::ConvBackwardBias
        | Kernel::Relu
        | Kernel::ReluBackward
        | Kernel::Softmax
        | Kernel::SoftmaxBackward
        | Kernel::BiasAdd
        | Kernel::ColSum
        | Kernel::Concat
        | Kernel::Copy => format!("Kernel::{k:?}"),
    }
}

fn unary(op: UnaryOp) -> String {
    match op {
        UnaryOp::Scale(c) => format!("UnaryOp::Scale({c:?})"),
        op => format!("UnaryOp::{op:?}"),
    }
}

fn binary(op: BinaryOp) -> String {
    format!("BinaryOp::{op:?}")
}

fn index_expr(e: &IndexExpr) -> String {
    let b = |x: &IndexExpr| format!("Box::new({})", index_expr(x));
    match e {
        IndexExpr::Const(c) => format!("IndexExpr::Const({c:?})"),
        IndexExpr::Level(l) => format!("IndexExpr::Level({l})"),
        IndexExpr::Load { operand, idx } => format!("IndexExpr::Load {{ operand: {operand}, idx: vec!{idx:?} }}"),
        IndexExpr::Unary(op, a) => format!("IndexExpr::Unary(IndexOp::{op:?}, {})", b(a)),
        IndexExpr::Binary(op, x, y) => format!("IndexExpr::Binary({}, {}, {})", binary(*op), b(x), b(y)),
        IndexExpr::Max(x, y) => format!("IndexExpr::Max({}, {})", b(x), b(y)),
        IndexExpr::Ge(x, y) => format!("IndexExpr::Ge({}, {})", b(x), b(y)),
        IndexExpr::Sum { level, extent, body } => {
            format!("IndexExpr::Sum {{ level: {level}, extent: {extent}, body: {} }}", b(body))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tensorc_runtime::IndexOp;

    #[test]
    fn kernel_literals() {
        assert_eq!(kernel_expr(&Kernel::Relu), "Kernel::Relu");
        assert_eq!(kernel_expr(&Kernel::Map(UnaryOp::Scale(-0.5))), "Kernel::Map(UnaryOp::Scale(-0.5))");
        assert_eq!(
            kernel_expr(&Kernel::Pool { k: 2, stride: 2, pad: 0, max: true }),
            "Kernel::Pool { k: 2, stride: 2, pad: 0, max: true }"
        );
        let e = IndexExpr::Unary(IndexOp::Neg, Box::new(IndexExpr::Const(1e-7)));
        assert_eq!(index_expr(&e), "IndexExpr::Unary(IndexOp::Neg, Box::new(IndexExpr::Const(1e-7)))");
    }

    #[test]
    fn type_names() {
        let mut p = crate::compile::compile(
            &crate::netspec::parse_netspec("data { batch = 1 shape = (1,2,2) classes = 2 } net { loss = logloss . softmax . full(2) . flatten(4, 1) }")
                .unwrap(),
            &Default::default(),
        )
        .unwrap()
        .ir;
        p.solver.name = "alex-net".into();
        assert_eq!(type_name(&p), "AlexNet");
        p.solver.name = "9x".into();
        assert_eq!(type_name(&p), "Net9x");
        assert_eq!(file_name(&p), "9x.gen.rs");
    }
}
