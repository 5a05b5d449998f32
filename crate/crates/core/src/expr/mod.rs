//! Tensor expressions: tensors are indexed scalar expressions over an arena.

pub mod eval;
pub mod fun;
pub mod graph;
pub mod lower;
pub mod scalar;
pub mod shape;

pub use graph::{BinOp, GradOp, Graph, InputKind, MapOp, PId, ParamInfo, PrimOp, TId, TNode};
pub use scalar::{Scalar, F64};
pub use shape::Shape;
