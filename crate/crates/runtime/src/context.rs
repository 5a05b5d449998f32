use crate::data::Batch;
use crate::error::{Result, RuntimeError};
use crate::kernels::{linalg, misc, Arg, Kernel};
use crate::pool::{MemoryPool, PoolMode};
use crate::tensor::{Element, Tensor};
use crate::workspace::Workspace;

/// Execution state for one program: the tensor pool, the shared
/// convolution workspace and the dropout stream position.
#[derive(Debug)]
pub struct Context<T: Element> {
    pool: MemoryPool<T>,
    workspace: Workspace<T>,
    seed: u64,
    iteration: u64,
    training: bool,
}

impl<T: Element> Context<T> {
    /// `workspace_cap` in bytes; `None` is unlimited.
    pub fn new(mode: PoolMode, workspace_cap: Option<usize>, seed: u64) -> Self {
        Self::with_pool(MemoryPool::new(mode), workspace_cap, seed)
    }

    pub fn with_pool(pool: MemoryPool<T>, workspace_cap: Option<usize>, seed: u64) -> Self {
        Context {
            pool,
            workspace: Workspace::new(workspace_cap),
            seed,
            iteration: 0,
            training: true,
        }
    }

    pub fn pool(&self) -> &MemoryPool<T> {
        &self.pool
    }

    pub fn pool_mut(&mut self) -> &mut MemoryPool<T> {
        &mut self.pool
    }

    pub fn workspace_bytes(&self) -> usize {
        self.workspace.allocated_bytes()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn set_iteration(&mut self, it: u64) {
        self.iteration = it;
    }

    pub fn training(&self) -> bool {
        self.training
    }

    /// In test mode dropout masks are all ones.
    pub fn set_training(&mut self, on: bool) {
        self.training = on;
    }

    /// Runs `k` into a fresh pooled tensor.
    pub fn eval(&mut self, k: &Kernel, args: &[Arg<'_, T>]) -> Result<Tensor<T>> {
        let shapes: Vec<&[usize]> = args.iter().map(|a| a.shape).collect();
        let shape = k.out_shape(&shapes)?;
        let mut out = self.pool.acquire(&shape)?;
        if let Err(e) = self.run(k, args, out.data_mut(), false) {
            self.pool.release(out);
            return Err(e);
        }
        Ok(out)
    }

    /// Runs `k` into an existing tensor, adding to it when `accumulate`.
    pub fn eval_into(&mut self, k: &Kernel, args: &[Arg<'_, T>], out: &mut Tensor<T>, accumulate: bool) -> Result<()> {
        let shapes: Vec<&[usize]> = args.iter().map(|a| a.shape).collect();
        let shape = k.out_shape(&shapes)?;
        if shape.iter().product::<usize>() != out.len() {
            return Err(RuntimeError::shape(
                k.name(),
                format!("result {shape:?} does not fit destination {:?}", out.shape()),
            ));
        }
        self.run(k, args, out.data_mut(), accumulate)
    }

    /// Applies `k` to `target` in place; `rest` holds the other operands.
    pub fn eval_inplace(&mut self, k: &Kernel, target: &mut Tensor<T>, rest: &[Arg<'_, T>]) -> Result<()> {
        k.run_inplace(target.data_mut(), rest)
    }

    fn run(&mut self, k: &Kernel, args: &[Arg<'_, T>], out: &mut [T], accumulate: bool) -> Result<()> {
        if let Kernel::DropoutMask { .. } = k {
            if !self.training {
                out.fill(T::one());
                return Ok(());
            }
        }
        let shapes: Vec<&[usize]> = args.iter().map(|a| a.shape).collect();
        let ws = match k.workspace_elems(&shapes) {
            Some(n) => self.workspace.get(n),
            None => None,
        };
        k.run(args, out, accumulate, ws, self.seed, self.iteration)
    }

    pub fn copy(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut out = self.pool.acquire(x.shape())?;
        out.data_mut().copy_from_slice(x.data());
        Ok(out)
    }

    /// Input images of `batch` as a pooled `(N, C, H, W)` tensor.
    pub fn images(&mut self, batch: &Batch, sample_shape: &[usize]) -> Result<Tensor<T>> {
        let mut shape = vec![batch.len()];
        shape.extend_from_slice(sample_shape);
        let mut out = self.pool.acquire(&shape)?;
        if out.len() != batch.images.len() {
            let found = vec![batch.images.len()];
            self.pool.release(out);
            return Err(RuntimeError::DimensionMismatch { declared: shape, found });
        }
        for (o, &v) in out.data_mut().iter_mut().zip(&batch.images) {
            *o = T::of(v as f64);
        }
        Ok(out)
    }

    /// One-hot labels of `batch` as a pooled `(N, classes)` tensor.
    pub fn indicator(&mut self, batch: &Batch, classes: usize) -> Result<Tensor<T>> {
        let mut out = self.pool.acquire(&[batch.len(), classes])?;
        misc::indicator(&batch.labels, classes, out.data_mut());
        Ok(out)
    }

    pub fn release(&mut self, t: Tensor<T>) {
        self.pool.release(t);
    }

    pub fn dot(&self, a: &Tensor<T>, b: &Tensor<T>) -> f64 {
        linalg::dot(a.data(), b.data()).as_f64()
    }

    /// Fraction of rows of `pred` whose argmax matches `target`.
    pub fn precision(&self, pred: &Tensor<T>, target: &Tensor<T>) -> f64 {
        let cols = *pred.shape().last().unwrap_or(&1);
        misc::precision(pred.data(), target.data(), cols)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::UnaryOp;

    #[test]
    fn eval_uses_pool_and_reuses_blocks() {
        let mut ctx = Context::<f32>::new(PoolMode::Reuse, None, 42);
        let x = Tensor::from_vec(&[2, 2], vec![-1.0, 2.0, -3.0, 4.0]).unwrap();
        let y = ctx.eval(&Kernel::Relu, &[x.arg()]).unwrap();
        assert_eq!(y.data(), &[0.0, 2.0, 0.0, 4.0]);
        ctx.release(y);
        let z = ctx.eval(&Kernel::Map(UnaryOp::Neg), &[x.arg()]).unwrap();
        assert_eq!(ctx.pool().stats().reuses, 1);
        assert_eq!(ctx.pool().stats().allocs_from_os, 1);
        ctx.release(z);
    }

    #[test]
    fn dropout_is_identity_in_test_mode() {
        let mut ctx = Context::<f32>::new(PoolMode::Reuse, None, 1);
        let k = Kernel::DropoutMask { rate: 0.5, site: 0, shape: vec![64] };
        ctx.set_training(false);
        let m = ctx.eval(&k, &[]).unwrap();
        assert!(m.data().iter().all(|&v| v == 1.0));
        ctx.set_training(true);
        let m = ctx.eval(&k, &[]).unwrap();
        assert!(m.data().iter().any(|&v| v == 0.0));
    }

    #[test]
    fn accumulate_into_gradient_buffer() {
        let mut ctx = Context::<f64>::new(PoolMode::Dealloc, None, 0);
        let a = Tensor::from_vec(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut g = Tensor::full(&[2], 1.0);
        ctx.eval_into(&Kernel::ColSum, &[a.arg()], &mut g, true).unwrap();
        assert_eq!(g.data(), &[5.0, 7.0]);
    }
}
