use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

use crate::error::{Result, RuntimeError};

/// Scalar element type of runtime tensors (`f32` by default, `f64` for
/// gradient checking).
pub trait Element:
    Float + FromPrimitive + ToPrimitive + Default + Debug + Display + Sum + Send + Sync + 'static
{
    const BYTES: usize;

    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to float")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("float converts to f64")
    }
}

impl Element for f32 {
    const BYTES: usize = 4;
}

impl Element for f64 {
    const BYTES: usize = 8;
}

/// Dense row-major tensor. The buffer length always equals the product of
/// the dims; the backing allocation may be larger when it came from a pooled
/// block.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
    /// Size of the pool block backing this tensor, in bytes.
    block_bytes: usize,
}

pub fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl<T: Element> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = numel(shape);
        Tensor {
            shape: shape.to_vec(),
            data: vec![T::zero(); n],
            block_bytes: n * T::BYTES,
        }
    }

    pub fn full(shape: &[usize], v: T) -> Self {
        let mut t = Self::zeros(shape);
        t.data.fill(v);
        t
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        if numel(shape) != data.len() {
            return Err(RuntimeError::shape(
                "from_vec",
                format!("shape {shape:?} needs {} elements, got {}", numel(shape), data.len()),
            ));
        }
        let block_bytes = data.len() * T::BYTES;
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
            block_bytes,
        })
    }

    pub fn scalar(v: T) -> Self {
        Tensor {
            shape: Vec::new(),
            data: vec![v],
            block_bytes: T::BYTES,
        }
    }

    /// Wraps a pooled buffer. `buf` must already hold `numel(shape)` elements.
    pub(crate) fn from_block(shape: &[usize], buf: Vec<T>, block_bytes: usize) -> Self {
        debug_assert_eq!(buf.len(), numel(shape));
        Tensor {
            shape: shape.to_vec(),
            data: buf,
            block_bytes,
        }
    }

    pub(crate) fn into_block(self) -> (Vec<T>, usize) {
        (self.data, self.block_bytes)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn block_bytes(&self) -> usize {
        self.block_bytes
    }

    pub fn bytes(&self) -> usize {
        self.data.len() * T::BYTES
    }

    /// Reinterprets the dims without touching the data.
    pub fn reshape(&mut self, shape: &[usize]) -> Result<()> {
        if numel(shape) != self.data.len() {
            return Err(RuntimeError::shape(
                "reshape",
                format!("{:?} -> {shape:?}", self.shape),
            ));
        }
        self.shape = shape.to_vec();
        Ok(())
    }

    pub fn item(&self) -> T {
        self.data[0]
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.as_f64()).collect()
    }

    pub fn cast<U: Element>(&self) -> Tensor<U> {
        let data: Vec<U> = self.data.iter().map(|v| U::of(v.as_f64())).collect();
        Tensor::from_vec(&self.shape, data).expect("same element count")
    }
}

/// A read-only view of a tensor under different dims (flatten / unflatten).
#[derive(Clone, Copy, Debug)]
pub struct View<'a, T> {
    pub shape: &'a [usize],
    pub data: &'a [T],
}

impl<'a, T: Element> View<'a, T> {
    pub fn of(t: &'a Tensor<T>) -> Self {
        View {
            shape: t.shape(),
            data: t.data(),
        }
    }

    pub fn reshaped(t: &'a Tensor<T>, shape: &'a [usize]) -> Result<Self> {
        if numel(shape) != t.len() {
            return Err(RuntimeError::shape(
                "view",
                format!("{:?} viewed as {shape:?}", t.shape()),
            ));
        }
        Ok(View {
            shape,
            data: t.data(),
        })
    }
}
