//! Kernel set. Every kernel works on flat row-major slices; the
//! [`Context`](crate::Context) wraps them with pooled allocation.

pub mod conv;
pub mod dispatch;
pub mod elementwise;
pub mod index;
pub mod linalg;
pub mod misc;
pub mod pool2d;

pub use conv::ConvGeom;
pub use dispatch::{Arg, Kernel};
pub use elementwise::{BinaryOp, UnaryOp};
pub use pool2d::PoolGeom;
