//! The executable operation vocabulary. The interpreter and generated
//! programs both run statements through [`Kernel`].

use super::conv::{self, ConvGeom};
use super::elementwise::{self, BinaryOp, UnaryOp};
use super::index::{self, IndexExpr};
use super::linalg;
use super::misc;
use super::pool2d::{self, PoolGeom};
use crate::error::{Result, RuntimeError};
use crate::tensor::{numel, Element, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub enum Kernel {
    /// (x, w, b)
    Conv { stride: usize, pad: usize },
    /// (dy, w) → dx with the given input dims.
    ConvBackwardData { stride: usize, pad: usize, input: [usize; 4] },
    /// (dy, x) → dw with kernel size `k`.
    ConvBackwardFilter { stride: usize, pad: usize, k: usize },
    /// (dy) → db
    ConvBackwardBias,
    /// (x)
    Pool { k: usize, stride: usize, pad: usize, max: bool },
    /// (dy, y, x) → dx
    PoolBackward { k: usize, stride: usize, pad: usize, max: bool },
    /// (x)
    Relu,
    /// (dy, y) → dx
    ReluBackward,
    /// (x), over the trailing axis
    Softmax,
    /// (dy, s) → dx
    SoftmaxBackward,
    /// (a, b) rank-2 operands
    MatMul { ta: bool, tb: bool },
    /// (x, b): adds `b` along the trailing axis
    BiasAdd,
    /// (x) rank 2 → column sums
    ColSum,
    Map(UnaryOp),
    Binary(BinaryOp),
    /// (x1, x2, ...) along axis 1
    Concat,
    /// (dy) → channels `lo..hi` of axis 1
    ConcatBackward { lo: usize, hi: usize },
    /// () → mask of `shape`, redrawn every iteration
    DropoutMask { rate: f64, site: u64, shape: Vec<usize> },
    /// (x)
    Lrn { size: usize, alpha: f64, beta: f64 },
    /// (dy, y, x)
    LrnBackward { size: usize, alpha: f64, beta: f64 },
    /// (x)
    Copy,
    /// generic indexed body over the operands
    Index { shape: Vec<usize>, body: IndexExpr },
    /// () → constant tensor
    Fill { shape: Vec<usize>, value: f64 },
}

/// A kernel operand: a tensor, optionally viewed under other dims.
#[derive(Clone, Copy, Debug)]
pub struct Arg<'a, T> {
    pub data: &'a [T],
    pub shape: &'a [usize],
}

impl<T: Element> Tensor<T> {
    pub fn arg(&self) -> Arg<'_, T> {
        Arg {
            data: self.data(),
            shape: self.shape(),
        }
    }

    /// Operand view under `shape`; element counts must agree.
    pub fn arg_as<'a>(&'a self, shape: &'a [usize]) -> Arg<'a, T> {
        debug_assert_eq!(numel(shape), self.len());
        Arg {
            data: self.data(),
            shape,
        }
    }
}

fn want_args<T>(name: &'static str, args: &[Arg<'_, T>], n: usize) -> Result<()> {
    if args.len() != n {
        return Err(RuntimeError::shape(name, format!("expected {n} operands, got {}", args.len())));
    }
    Ok(())
}

fn rank2(name: &'static str, s: &[usize]) -> Result<(usize, usize)> {
    match s {
        [r, c] => Ok((*r, *c)),
        _ => Err(RuntimeError::shape(name, format!("operand {s:?} must be rank 2"))),
    }
}

impl Kernel {
    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Conv { .. } => "Convolv",
            Kernel::ConvBackwardData { .. } => "d_Convolv/d_X",
            Kernel::ConvBackwardFilter { .. } => "d_Convolv/d_W",
            Kernel::ConvBackwardBias => "d_Convolv/d_B",
            Kernel::Pool { .. } => "Pooling",
            Kernel::PoolBackward { .. } => "d_Pooling",
            Kernel::Relu => "ReLU",
            Kernel::ReluBackward => "d_ReLU",
            Kernel::Softmax => "Softmax",
            Kernel::SoftmaxBackward => "d_Softmax",
            Kernel::MatMul { .. } => "MatMul",
            Kernel::BiasAdd => "BiasAdd",
            Kernel::ColSum => "ColSum",
            Kernel::Map(_) => "Map",
            Kernel::Binary(_) => "Binary",
            Kernel::Concat => "Concat",
            Kernel::ConcatBackward { .. } => "d_Concat",
            Kernel::DropoutMask { .. } => "DropoutMask",
            Kernel::Lrn { .. } => "LRN",
            Kernel::LrnBackward { .. } => "d_LRN",
            Kernel::Copy => "Copy",
            Kernel::Index { .. } => "Index",
            Kernel::Fill { .. } => "Fill",
        }
    }

    /// Elements of the shared workspace this kernel would like to use.
    pub fn workspace_elems(&self, args: &[&[usize]]) -> Option<usize> {
        match self {
            Kernel::Conv { stride, pad } => ConvGeom::new(args[0], args[1], *stride, *pad).ok().map(|g| g.workspace_elems()),
            Kernel::ConvBackwardData { stride, pad, input } => {
                ConvGeom::new(input, args[1], *stride, *pad).ok().map(|g| g.workspace_elems())
            }
            Kernel::ConvBackwardFilter { stride, pad, k } => {
                let (dy, x) = (args[0], args[1]);
                ConvGeom::new(x, &[dy[1], x[1], *k, *k], *stride, *pad).ok().map(|g| g.workspace_elems())
            }
            _ => None,
        }
    }

    pub fn out_shape(&self, args: &[&[usize]]) -> Result<Vec<usize>> {
        let name = self.name();
        let arity = |n: usize| -> Result<()> {
            if args.len() != n {
                return Err(RuntimeError::shape(name, format!("expected {n} operands, got {}", args.len())));
            }
            Ok(())
        };
        Ok(match self {
            Kernel::Conv { stride, pad } => {
                arity(3)?;
                ConvGeom::new(args[0], args[1], *stride, *pad)?.out_shape().to_vec()
            }
            Kernel::ConvBackwardData { input, .. } => {
                arity(2)?;
                input.to_vec()
            }
            Kernel::ConvBackwardFilter { k, .. } => {
                arity(2)?;
                vec![args[0][1], args[1][1], *k, *k]
            }
            Kernel::ConvBackwardBias => {
                arity(1)?;
                vec![args[0][1]]
            }
            Kernel::Pool { k, stride, pad, max } => {
                arity(1)?;
                PoolGeom::new(args[0], *k, *stride, *pad, *max)?.out_shape().to_vec()
            }
            Kernel::PoolBackward { .. } => {
                arity(3)?;
                args[2].to_vec()
            }
            Kernel::Relu | Kernel::Softmax | Kernel::Map(_) | Kernel::Copy | Kernel::Lrn { .. } => {
                arity(1)?;
                args[0].to_vec()
            }
            Kernel::ReluBackward | Kernel::SoftmaxBackward | Kernel::BiasAdd => {
                arity(2)?;
                args[0].to_vec()
            }
            Kernel::LrnBackward { .. } => {
                arity(3)?;
                args[0].to_vec()
            }
            Kernel::MatMul { ta, tb } => {
                arity(2)?;
                let (ar, ac) = rank2(name, args[0])?;
                let (br, bc) = rank2(name, args[1])?;
                let (m, ka) = if *ta { (ac, ar) } else { (ar, ac) };
                let (kb, n) = if *tb { (bc, br) } else { (br, bc) };
                if ka != kb {
                    return Err(RuntimeError::shape(name, format!("{:?} x {:?}", args[0], args[1])));
                }
                vec![m, n]
            }
            Kernel::ColSum => {
                arity(1)?;
                let (_, c) = rank2(name, args[0])?;
                vec![c]
            }
            Kernel::Binary(_) => {
                arity(2)?;
                if numel(args[0]) >= numel(args[1]) {
                    args[0].to_vec()
                } else {
                    args[1].to_vec()
                }
            }
            Kernel::Concat => {
                let first = args.first().ok_or_else(|| RuntimeError::shape(name, "no operands"))?;
                let mut out = first.to_vec();
                out[1] = args.iter().map(|a| a[1]).sum();
                out
            }
            Kernel::ConcatBackward { lo, hi } => {
                arity(1)?;
                let mut out = args[0].to_vec();
                out[1] = hi - lo;
                out
            }
            Kernel::DropoutMask { shape, .. } | Kernel::Index { shape, .. } | Kernel::Fill { shape, .. } => shape.clone(),
        })
    }

    /// Runs the kernel, writing (or with `accumulate`, adding) into `out`.
    pub fn run<T: Element>(
        &self,
        args: &[Arg<'_, T>],
        out: &mut [T],
        accumulate: bool,
        workspace: Option<&mut [T]>,
        seed: u64,
        iteration: u64,
    ) -> Result<()> {
        let name = self.name();
        match self {
            Kernel::Conv { stride, pad } => {
                want_args(name, args, 3)?;
                let g = ConvGeom::new(args[0].shape, args[1].shape, *stride, *pad)?;
                if accumulate {
                    let mut tmp = vec![T::zero(); out.len()];
                    conv::forward(&g, args[0].data, args[1].data, args[2].data, &mut tmp, workspace);
                    add_into(out, &tmp);
                } else {
                    conv::forward(&g, args[0].data, args[1].data, args[2].data, out, workspace);
                }
            }
            Kernel::ConvBackwardData { stride, pad, input } => {
                want_args(name, args, 2)?;
                let g = ConvGeom::new(input, args[1].shape, *stride, *pad)?;
                conv::backward_data(&g, args[0].data, args[1].data, out, accumulate, workspace);
            }
            Kernel::ConvBackwardFilter { stride, pad, k } => {
                want_args(name, args, 2)?;
                let (dy, x) = (&args[0], &args[1]);
                let g = ConvGeom::new(x.shape, &[dy.shape[1], x.shape[1], *k, *k], *stride, *pad)?;
                conv::backward_filter(&g, dy.data, x.data, out, accumulate, workspace);
            }
            Kernel::ConvBackwardBias => {
                want_args(name, args, 1)?;
                let s = args[0].shape;
                let g = ConvGeom {
                    n: s[0],
                    cin: 1,
                    h: 1,
                    w: 1,
                    cout: s[1],
                    k: 1,
                    stride: 1,
                    pad: 0,
                    hout: s[2],
                    wout: s[3],
                };
                conv::backward_bias(&g, args[0].data, out, accumulate);
            }
            Kernel::Pool { k, stride, pad, max } => {
                want_args(name, args, 1)?;
                let g = PoolGeom::new(args[0].shape, *k, *stride, *pad, *max)?;
                if accumulate {
                    let mut tmp = vec![T::zero(); out.len()];
                    pool2d::forward(&g, args[0].data, &mut tmp);
                    add_into(out, &tmp);
                } else {
                    pool2d::forward(&g, args[0].data, out);
                }
            }
            Kernel::PoolBackward { k, stride, pad, max } => {
                want_args(name, args, 3)?;
                let g = PoolGeom::new(args[2].shape, *k, *stride, *pad, *max)?;
                pool2d::backward(&g, args[0].data, args[1].data, args[2].data, out, accumulate);
            }
            Kernel::Relu => {
                want_args(name, args, 1)?;
                elementwise::map(UnaryOp::Relu, args[0].data, out, accumulate);
            }
            Kernel::ReluBackward => {
                want_args(name, args, 2)?;
                elementwise::relu_backward(args[0].data, args[1].data, out, accumulate);
            }
            Kernel::Softmax => {
                want_args(name, args, 1)?;
                let cols = *args[0].shape.last().unwrap_or(&1);
                if accumulate {
                    let mut tmp = vec![T::zero(); out.len()];
                    elementwise::softmax(args[0].data, cols, &mut tmp);
                    add_into(out, &tmp);
                } else {
                    elementwise::softmax(args[0].data, cols, out);
                }
            }
            Kernel::SoftmaxBackward => {
                want_args(name, args, 2)?;
                let cols = *args[1].shape.last().unwrap_or(&1);
                elementwise::softmax_backward(args[0].data, args[1].data, cols, out, accumulate);
            }
            Kernel::MatMul { ta, tb } => {
                want_args(name, args, 2)?;
                let (ar, ac) = rank2(name, args[0].shape)?;
                let (br, bc) = rank2(name, args[1].shape)?;
                let (m, k) = if *ta { (ac, ar) } else { (ar, ac) };
                let n = if *tb { br } else { bc };
                linalg::gemm(*ta, *tb, m, n, k, args[0].data, args[1].data, out, accumulate);
            }
            Kernel::BiasAdd => {
                want_args(name, args, 2)?;
                let cols = args[1].data.len();
                for (i, o) in out.iter_mut().enumerate() {
                    let v = args[0].data[i] + args[1].data[i % cols];
                    *o = if accumulate { *o + v } else { v };
                }
            }
            Kernel::ColSum => {
                want_args(name, args, 1)?;
                let (_, c) = rank2(name, args[0].shape)?;
                linalg::col_sum(args[0].data, c, out, accumulate);
            }
            Kernel::Map(op) => {
                want_args(name, args, 1)?;
                elementwise::map(*op, args[0].data, out, accumulate);
            }
            Kernel::Binary(op) => {
                want_args(name, args, 2)?;
                elementwise::binary(*op, args[0].data, args[1].data, out, accumulate);
            }
            Kernel::Concat => {
                let channels: Vec<usize> = args.iter().map(|a| a.shape[1]).collect();
                let outer = args[0].shape[0];
                let inner: usize = args[0].shape[2..].iter().product();
                let parts: Vec<&[T]> = args.iter().map(|a| a.data).collect();
                if accumulate {
                    let mut tmp = vec![T::zero(); out.len()];
                    misc::concat(&parts, &channels, outer, inner, &mut tmp);
                    add_into(out, &tmp);
                } else {
                    misc::concat(&parts, &channels, outer, inner, out);
                }
            }
            Kernel::ConcatBackward { lo, hi } => {
                want_args(name, args, 1)?;
                let s = args[0].shape;
                let inner: usize = s[2..].iter().product();
                misc::slice_channels(args[0].data, s[1], *lo, *hi, s[0], inner, out, accumulate);
            }
            Kernel::DropoutMask { rate, site, .. } => {
                misc::dropout_mask(*rate, seed, *site, iteration, out);
            }
            Kernel::Lrn { .. } | Kernel::LrnBackward { .. } => return Err(RuntimeError::Unsupported(name)),
            Kernel::Copy => {
                want_args(name, args, 1)?;
                if accumulate {
                    add_into(out, args[0].data);
                } else {
                    out.copy_from_slice(args[0].data);
                }
            }
            Kernel::Index { shape, body } => {
                let ops: Vec<index::Operand<'_, T>> = args
                    .iter()
                    .map(|a| index::Operand {
                        shape: a.shape,
                        data: a.data,
                    })
                    .collect();
                index::index_kernel(shape, body, &ops, out, accumulate);
            }
            Kernel::Fill { value, .. } => {
                let v = T::of(*value);
                for o in out.iter_mut() {
                    *o = if accumulate { *o + v } else { v };
                }
            }
        }
        Ok(())
    }

    /// Kernels that may overwrite their first operand.
    pub fn supports_inplace(&self) -> bool {
        matches!(self, Kernel::Map(_) | Kernel::BiasAdd | Kernel::Relu)
    }

    /// Applies an in-place capable kernel to `target`; `rest` are the
    /// remaining operands.
    pub fn run_inplace<T: Element>(&self, target: &mut [T], rest: &[Arg<'_, T>]) -> Result<()> {
        match self {
            Kernel::Map(op) => elementwise::map_inplace(*op, target),
            Kernel::Relu => elementwise::map_inplace(UnaryOp::Relu, target),
            Kernel::BiasAdd => {
                want_args("BiasAdd", rest, 1)?;
                linalg::bias_add_inplace(target, rest[0].data);
            }
            other => return Err(RuntimeError::shape("inplace", format!("{} cannot run in place", other.name()))),
        }
        Ok(())
    }
}

fn add_into<T: Element>(out: &mut [T], src: &[T]) {
    for (o, &s) in out.iter_mut().zip(src) {
        *o = *o + s;
    }
}
