//! Training program for `lenet`, generated by tensorc.
//!
//! Each runtime call follows the IR statement it implements. IR names in
//! comments are per body and unrelated to the local variable names.

#![allow(dead_code, unused_imports, unused_mut, unused_variables, unused_assignments, clippy::all)]

use std::path::Path;
use tensorc_runtime::driver::{Network, Params, TestOutput};
use tensorc_runtime::kernels::{misc, BinaryOp, UnaryOp};
use tensorc_runtime::{
    snapshot, solver, Batch, Context, Dataset, Element, IndexExpr, IndexOp, Init, Kernel, PoolMode, Result, Split, Tensor,
};

/// Allocation strategy: `PoolMode::Reuse` or `PoolMode::Dealloc`.
pub const MODE: PoolMode = PoolMode::Reuse;

pub type F = f32;
/// Convolution workspace limit in bytes.
pub const WORKSPACE_CAP: Option<usize> = None;
pub const BATCH: usize = 500;
pub const SAMPLE: [usize; 3] = [1, 28, 28];
pub const CLASSES: usize = 10;
pub const TRAIN_ITERS: u64 = 200;
pub const TEST_ITERS: usize = 4;
pub const SNAPSHOT_EVERY: u64 = 100;

pub fn param_specs() -> Vec<(String, Vec<usize>, Init)> {
    vec![
        ("cv1_W".to_string(), vec![20, 1, 5, 5], Init::Xavier),
        ("cv1_B".to_string(), vec![20], Init::Const(0.0)),
        ("cv2_W".to_string(), vec![50, 20, 5, 5], Init::Xavier),
        ("cv2_B".to_string(), vec![50], Init::Const(0.0)),
        ("fc1_W".to_string(), vec![500, 800], Init::Xavier),
        ("fc1_B".to_string(), vec![500], Init::Const(0.0)),
        ("fc2_W".to_string(), vec![10, 500], Init::Xavier),
        ("fc2_B".to_string(), vec![10], Init::Const(0.0)),
    ]
}

pub struct Lenet {
    pub ctx: Context<F>,
    pub params: Params<F>,
}

impl Lenet {
    pub fn new(seed: u64) -> Self {
        Lenet {
            ctx: Context::new(MODE, WORKSPACE_CAP, seed),
            params: Params::init(&param_specs(), seed),
        }
    }
}

impl Network<F> for Lenet {
    fn params(&self) -> &Params<F> {
        &self.params
    }

    fn params_mut(&mut self) -> &mut Params<F> {
        &mut self.params
    }

    fn train_step(&mut self, batch: &Batch, iteration: u64) -> Result<f64> {
        let Lenet { ctx, params: p } = self;
        ctx.set_training(true);
        ctx.set_iteration(iteration);
        p.zero_grads();
        let mut loss = f64::NAN;
        // val X1 = Cuda(X)
        let x1 = ctx.images(batch, &SAMPLE)?;
        // val X2 = Convolv(1,0)(X1,cv1_W,cv1_B)
        let x2 = ctx.eval(&Kernel::Conv { stride: 1, pad: 0 }, &[x1.arg(), p.values[0].arg(), p.values[1].arg()])?;
        // val X3 = Pooling(2,2,0,true)(X2)
        let x3 = ctx.eval(&Kernel::Pool { k: 2, stride: 2, pad: 0, max: true }, &[x2.arg()])?;
        // val X4 = Convolv(1,0)(X3,cv2_W,cv2_B)
        let x4 = ctx.eval(&Kernel::Conv { stride: 1, pad: 0 }, &[x3.arg(), p.values[2].arg(), p.values[3].arg()])?;
        // val X5 = Pooling(2,2,0,true)(X4)
        let x5 = ctx.eval(&Kernel::Pool { k: 2, stride: 2, pad: 0, max: true }, &[x4.arg()])?;
        // val X6 = (X5[1><3])(i | @) * (fc1_W)(j | @)
        let x6 = ctx.eval(&Kernel::MatMul { ta: false, tb: true }, &[x5.arg_as(&[500, 800]), p.values[4].arg()])?;
        // val X7 = (X6 + (i) => fc1_B)
        let mut x7 = x6;
        ctx.eval_inplace(&Kernel::BiasAdd, &mut x7, &[p.values[5].arg()])?;
        // val X8 = ReLU()(X7)
        let mut x8 = x7;
        ctx.eval_inplace(&Kernel::Relu, &mut x8, &[])?;
        // val X9 = (X8)(i | @) * (fc2_W)(j | @)
        let x9 = ctx.eval(&Kernel::MatMul { ta: false, tb: true }, &[x8.arg(), p.values[6].arg()])?;
        // val X10 = (X9 + (i) => fc2_B)
        let mut x10 = x9;
        ctx.eval_inplace(&Kernel::BiasAdd, &mut x10, &[p.values[7].arg()])?;
        // val X11 = Softmax()(X10)
        let x11 = ctx.eval(&Kernel::Softmax, &[x10.arg()])?;
        // Dealloc(X10)
        ctx.release(x10);
        // val X12 = Log X11.copy
        let mut x12 = ctx.copy(&x11)?;
        ctx.eval_inplace(&Kernel::Map(UnaryOp::Log), &mut x12, &[])?;
        // val X13 = Cuda(Indicator(Y, 10))
        let x13 = ctx.indicator(batch, 10)?;
        // Print(((0 - (X13 . X12)) / |500|))
        let v = ctx.eval(&Kernel::Index { shape: vec![], body: IndexExpr::Binary(BinaryOp::Div, Box::new(IndexExpr::Binary(BinaryOp::Sub, Box::new(IndexExpr::Const(0.0)), Box::new(IndexExpr::Sum { level: 0, extent: 500, body: Box::new(IndexExpr::Sum { level: 1, extent: 10, body: Box::new(IndexExpr::Binary(BinaryOp::Mul, Box::new(IndexExpr::Load { operand: 0, idx: vec![0, 1] }), Box::new(IndexExpr::Load { operand: 1, idx: vec![0, 1] }))) }) }))), Box::new(IndexExpr::Const(500.0))) }, &[x13.arg(), x12.arg()])?;
        let value = v.item().as_f64();
        ctx.release(v);
        loss = value;
        // Dealloc(X12)
        ctx.release(x12);
        // val X14 = 1/(X11.copy)
        let mut x14 = ctx.copy(&x11)?;
        ctx.eval_inplace(&Kernel::Map(UnaryOp::Recip), &mut x14, &[])?;
        // val X15 = (i,j) => ((-0.002 * X13[i,j]) * X14[i,j])
        let x15 = ctx.eval(&Kernel::Index { shape: vec![500, 10], body: IndexExpr::Binary(BinaryOp::Mul, Box::new(IndexExpr::Binary(BinaryOp::Mul, Box::new(IndexExpr::Const(-0.002)), Box::new(IndexExpr::Load { operand: 0, idx: vec![0, 1] }))), Box::new(IndexExpr::Load { operand: 1, idx: vec![0, 1] })) }, &[x13.arg(), x14.arg()])?;
        // Dealloc(X13)
        ctx.release(x13);
        // Dealloc(X14)
        ctx.release(x14);
        // val X16 = X15 * d_Softmax()(X11)/d_X10
        let x16 = ctx.eval(&Kernel::SoftmaxBackward, &[x15.arg(), x11.arg()])?;
        // Dealloc(X15)
        ctx.release(x15);
        // Dealloc(X11)
        ctx.release(x11);
        // fc2_W <~~ (X16)(@ | i) * (X8)(@ | j)
        ctx.eval_into(&Kernel::MatMul { ta: true, tb: false }, &[x16.arg(), x8.arg()], &mut p.grads[6], true)?;
        // fc2_B <~~ ColSum(X16)
        ctx.eval_into(&Kernel::ColSum, &[x16.arg()], &mut p.grads[7], true)?;
        // val X17 = (X16)(i | @) * (fc2_W)(@ | j)
        let x17 = ctx.eval(&Kernel::MatMul { ta: false, tb: false }, &[x16.arg(), p.values[6].arg()])?;
        // Dealloc(X16)
        ctx.release(x16);
        // val X18 = X17 * d_ReLU()(X8)/d_X7
        let x18 = ctx.eval(&Kernel::ReluBackward, &[x17.arg(), x8.arg()])?;
        // Dealloc(X17)
        ctx.release(x17);
        // Dealloc(X8)
        ctx.release(x8);
        // fc1_W <~~ (X18)(@ | i) * (X5[1><3])(@ | j)
        ctx.eval_into(&Kernel::MatMul { ta: true, tb: false }, &[x18.arg(), x5.arg_as(&[500, 800])], &mut p.grads[4], true)?;
        // fc1_B <~~ ColSum(X18)
        ctx.eval_into(&Kernel::ColSum, &[x18.arg()], &mut p.grads[5], true)?;
        // val X19 = (X18)(i | @) * (fc1_W)(@ | j)
        let x19 = ctx.eval(&Kernel::MatMul { ta: false, tb: false }, &[x18.arg(), p.values[4].arg()])?;
        // Dealloc(X18)
        ctx.release(x18);
        // val X20 = X19[500,50,4,4] * d_Pooling(2,2,0,true)(X5,X4)/d_X4
        let x20 = ctx.eval(&Kernel::PoolBackward { k: 2, stride: 2, pad: 0, max: true }, &[x19.arg_as(&[500, 50, 4, 4]), x5.arg(), x4.arg()])?;
        // Dealloc(X19)
        ctx.release(x19);
        // Dealloc(X5)
        ctx.release(x5);
        // Dealloc(X4)
        ctx.release(x4);
        // cv2_W <~~ X20 * d_Convolv(1,0)(X3)/d_cv2_W
        ctx.eval_into(&Kernel::ConvBackwardFilter { stride: 1, pad: 0, k: 5 }, &[x20.arg(), x3.arg()], &mut p.grads[2], true)?;
        // cv2_B <~~ X20 * d_Convolv(1,0)()/d_cv2_B
        ctx.eval_into(&Kernel::ConvBackwardBias, &[x20.arg()], &mut p.grads[3], true)?;
        // val X21 = X20 * d_Convolv(1,0)(cv2_W)/d_X3
        let x21 = ctx.eval(&Kernel::ConvBackwardData { stride: 1, pad: 0, input: [500, 20, 12, 12] }, &[x20.arg(), p.values[2].arg()])?;
        // Dealloc(X20)
        ctx.release(x20);
        // val X22 = X21 * d_Pooling(2,2,0,true)(X3,X2)/d_X2
        let x22 = ctx.eval(&Kernel::PoolBackward { k: 2, stride: 2, pad: 0, max: true }, &[x21.arg(), x3.arg(), x2.arg()])?;
        // Dealloc(X21)
        ctx.release(x21);
        // Dealloc(X3)
        ctx.release(x3);
        // Dealloc(X2)
        ctx.release(x2);
        // cv1_W <~~ X22 * d_Convolv(1,0)(X1)/d_cv1_W
        ctx.eval_into(&Kernel::ConvBackwardFilter { stride: 1, pad: 0, k: 5 }, &[x22.arg(), x1.arg()], &mut p.grads[0], true)?;
        // Dealloc(X1)
        ctx.release(x1);
        // cv1_B <~~ X22 * d_Convolv(1,0)()/d_cv1_B
        ctx.eval_into(&Kernel::ConvBackwardBias, &[x22.arg()], &mut p.grads[1], true)?;
        // Dealloc(X22)
        ctx.release(x22);
        // Update(d_cv1_W, cv1_W, 0.0005, 1)
        solver::axpby(&mut p.grads[0], &p.values[0], 0.0005, 1.0)?;
        // Update(d_cv1_B, cv1_B, 0.0005, 1)
        solver::axpby(&mut p.grads[1], &p.values[1], 0.0005, 1.0)?;
        // Update(d_cv2_W, cv2_W, 0.0005, 1)
        solver::axpby(&mut p.grads[2], &p.values[2], 0.0005, 1.0)?;
        // Update(d_cv2_B, cv2_B, 0.0005, 1)
        solver::axpby(&mut p.grads[3], &p.values[3], 0.0005, 1.0)?;
        // Update(d_fc1_W, fc1_W, 0.0005, 1)
        solver::axpby(&mut p.grads[4], &p.values[4], 0.0005, 1.0)?;
        // Update(d_fc1_B, fc1_B, 0.0005, 1)
        solver::axpby(&mut p.grads[5], &p.values[5], 0.0005, 1.0)?;
        // Update(d_fc2_W, fc2_W, 0.0005, 1)
        solver::axpby(&mut p.grads[6], &p.values[6], 0.0005, 1.0)?;
        // Update(d_fc2_B, fc2_B, 0.0005, 1)
        solver::axpby(&mut p.grads[7], &p.values[7], 0.0005, 1.0)?;
        // Update(cv1_W_v, d_cv1_W, -0.01, 0.9)
        solver::axpby(&mut p.velocities[0], &p.grads[0], -0.01, 0.9)?;
        // Update(cv1_W, cv1_W_v, 1, 1)
        solver::axpby(&mut p.values[0], &p.velocities[0], 1.0, 1.0)?;
        // Update(cv1_B_v, d_cv1_B, -0.01, 0.9)
        solver::axpby(&mut p.velocities[1], &p.grads[1], -0.01, 0.9)?;
        // Update(cv1_B, cv1_B_v, 1, 1)
        solver::axpby(&mut p.values[1], &p.velocities[1], 1.0, 1.0)?;
        // Update(cv2_W_v, d_cv2_W, -0.01, 0.9)
        solver::axpby(&mut p.velocities[2], &p.grads[2], -0.01, 0.9)?;
        // Update(cv2_W, cv2_W_v, 1, 1)
        solver::axpby(&mut p.values[2], &p.velocities[2], 1.0, 1.0)?;
        // Update(cv2_B_v, d_cv2_B, -0.01, 0.9)
        solver::axpby(&mut p.velocities[3], &p.grads[3], -0.01, 0.9)?;
        // Update(cv2_B, cv2_B_v, 1, 1)
        solver::axpby(&mut p.values[3], &p.velocities[3], 1.0, 1.0)?;
        // Update(fc1_W_v, d_fc1_W, -0.01, 0.9)
        solver::axpby(&mut p.velocities[4], &p.grads[4], -0.01, 0.9)?;
        // Update(fc1_W, fc1_W_v, 1, 1)
        solver::axpby(&mut p.values[4], &p.velocities[4], 1.0, 1.0)?;
        // Update(fc1_B_v, d_fc1_B, -0.01, 0.9)
        solver::axpby(&mut p.velocities[5], &p.grads[5], -0.01, 0.9)?;
        // Update(fc1_B, fc1_B_v, 1, 1)
        solver::axpby(&mut p.values[5], &p.velocities[5], 1.0, 1.0)?;
        // Update(fc2_W_v, d_fc2_W, -0.01, 0.9)
        solver::axpby(&mut p.velocities[6], &p.grads[6], -0.01, 0.9)?;
        // Update(fc2_W, fc2_W_v, 1, 1)
        solver::axpby(&mut p.values[6], &p.velocities[6], 1.0, 1.0)?;
        // Update(fc2_B_v, d_fc2_B, -0.01, 0.9)
        solver::axpby(&mut p.velocities[7], &p.grads[7], -0.01, 0.9)?;
        // Update(fc2_B, fc2_B_v, 1, 1)
        solver::axpby(&mut p.values[7], &p.velocities[7], 1.0, 1.0)?;
        Ok(loss)
    }

    fn test_step(&mut self, batch: &Batch) -> Result<TestOutput> {
        let Lenet { ctx, params: p } = self;
        ctx.set_training(false);
        let mut loss = f64::NAN;
        let mut precision = None;
        // val X1 = Cuda(X)
        let x1 = ctx.images(batch, &SAMPLE)?;
        // val X2 = Convolv(1,0)(X1,cv1_W,cv1_B)
        let x2 = ctx.eval(&Kernel::Conv { stride: 1, pad: 0 }, &[x1.arg(), p.values[0].arg(), p.values[1].arg()])?;
        // Dealloc(X1)
        ctx.release(x1);
        // val X3 = Pooling(2,2,0,true)(X2)
        let x3 = ctx.eval(&Kernel::Pool { k: 2, stride: 2, pad: 0, max: true }, &[x2.arg()])?;
        // Dealloc(X2)
        ctx.release(x2);
        // val X4 = Convolv(1,0)(X3,cv2_W,cv2_B)
        let x4 = ctx.eval(&Kernel::Conv { stride: 1, pad: 0 }, &[x3.arg(), p.values[2].arg(), p.values[3].arg()])?;
        // Dealloc(X3)
        ctx.release(x3);
        // val X5 = Pooling(2,2,0,true)(X4)
        let x5 = ctx.eval(&Kernel::Pool { k: 2, stride: 2, pad: 0, max: true }, &[x4.arg()])?;
        // Dealloc(X4)
        ctx.release(x4);
        // val X6 = (X5[1><3])(i | @) * (fc1_W)(j | @)
        let x6 = ctx.eval(&Kernel::MatMul { ta: false, tb: true }, &[x5.arg_as(&[500, 800]), p.values[4].arg()])?;
        // Dealloc(X5)
        ctx.release(x5);
        // val X7 = (X6 + (i) => fc1_B)
        let mut x7 = x6;
        ctx.eval_inplace(&Kernel::BiasAdd, &mut x7, &[p.values[5].arg()])?;
        // val X8 = ReLU()(X7)
        let mut x8 = x7;
        ctx.eval_inplace(&Kernel::Relu, &mut x8, &[])?;
        // val X9 = (X8)(i | @) * (fc2_W)(j | @)
        let x9 = ctx.eval(&Kernel::MatMul { ta: false, tb: true }, &[x8.arg(), p.values[6].arg()])?;
        // Dealloc(X8)
        ctx.release(x8);
        // val X10 = (X9 + (i) => fc2_B)
        let mut x10 = x9;
        ctx.eval_inplace(&Kernel::BiasAdd, &mut x10, &[p.values[7].arg()])?;
        // val X11 = Cuda(Indicator(Y, 10))
        let x11 = ctx.indicator(batch, 10)?;
        // Print(Precision(X11, X10))
        precision = Some(misc::precision(x10.data(), x11.data(), 10));
        // val X12 = Softmax()(X10)
        let x12 = ctx.eval(&Kernel::Softmax, &[x10.arg()])?;
        // Dealloc(X10)
        ctx.release(x10);
        // val X13 = Log X12
        let mut x13 = x12;
        ctx.eval_inplace(&Kernel::Map(UnaryOp::Log), &mut x13, &[])?;
        // Print(((0 - (X11 . X13)) / |500|))
        let v = ctx.eval(&Kernel::Index { shape: vec![], body: IndexExpr::Binary(BinaryOp::Div, Box::new(IndexExpr::Binary(BinaryOp::Sub, Box::new(IndexExpr::Const(0.0)), Box::new(IndexExpr::Sum { level: 0, extent: 500, body: Box::new(IndexExpr::Sum { level: 1, extent: 10, body: Box::new(IndexExpr::Binary(BinaryOp::Mul, Box::new(IndexExpr::Load { operand: 0, idx: vec![0, 1] }), Box::new(IndexExpr::Load { operand: 1, idx: vec![0, 1] }))) }) }))), Box::new(IndexExpr::Const(500.0))) }, &[x11.arg(), x13.arg()])?;
        let value = v.item().as_f64();
        ctx.release(v);
        loss = value;
        // Dealloc(X11)
        ctx.release(x11);
        // Dealloc(X13)
        ctx.release(x13);
        Ok(TestOutput { loss, precision })
    }
}

/// Training and test sets. `dir` overrides the data source compiled in.
pub fn datasets(dir: Option<&Path>) -> Result<(Dataset, Dataset)> {
    let test_n = BATCH * TEST_ITERS.max(1);
    match dir.or(None) {
        Some(d) => Ok((
            Dataset::load_mnist(d, Split::Train, &SAMPLE, CLASSES, Some(2000))?,
            Dataset::load_mnist(d, Split::Test, &SAMPLE, CLASSES, Some(test_n))?,
        )),
        None => Ok((
            Dataset::synthetic(1, Split::Train, 2000, &SAMPLE, CLASSES),
            Dataset::synthetic(1, Split::Test, test_n, &SAMPLE, CLASSES),
        )),
    }
}

pub fn test(net: &mut Lenet, data: &Dataset) -> Result<TestOutput> {
    let (mut loss, mut hits) = (0.0, 0.0);
    for i in 0..TEST_ITERS {
        let out = net.test_step(&data.batch(i, BATCH))?;
        loss += out.loss;
        hits += out.precision.unwrap_or(0.0);
    }
    let n = TEST_ITERS.max(1) as f64;
    Ok(TestOutput { loss: loss / n, precision: Some(hits / n) })
}

/// Trains from the last snapshot in `dir`, if any, saving every
/// `SNAPSHOT_EVERY` iterations and at the end.
pub fn train(net: &mut Lenet, data: &Dataset, test_data: &Dataset, dir: &Path) -> Result<()> {
    let mut start = 0;
    if snapshot::has_snapshot(dir) {
        start = net.params.load(dir)?.1;
    }
    for it in start..TRAIN_ITERS {
        let loss = net.train_step(&data.batch(it as usize, BATCH), it)?;
        println!("iteration {it}: loss {loss:.6}");
        if SNAPSHOT_EVERY > 0 && (it + 1) % SNAPSHOT_EVERY == 0 && it + 1 < TRAIN_ITERS {
            net.params.save(dir, it + 1)?;
            report(&test(net, test_data)?);
        }
    }
    net.params.save(dir, TRAIN_ITERS.max(start))?;
    report(&test(net, test_data)?);
    Ok(())
}

fn report(t: &TestOutput) {
    match t.precision {
        Some(p) => println!("test: loss {:.6} precision {p:.4}", t.loss),
        None => println!("test: loss {:.6}", t.loss),
    }
}

/// Usage: `lenet [DATA_DIR]`. `TENSORC_SEED` sets the seed.
pub fn main() {
    let seed = std::env::var("TENSORC_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(42);
    let dir = std::env::args().nth(1);
    let run = || -> Result<()> {
        let (data, test_data) = datasets(dir.as_deref().map(Path::new))?;
        let mut net = Lenet::new(seed);
        train(&mut net, &data, &test_data, Path::new("lenet.snapshot"))
    };
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(2);
    }
}
