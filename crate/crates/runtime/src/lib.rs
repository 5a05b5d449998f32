//! CPU tensor runtime for tensorc.
//!
//! Programs emitted by the tensorc code generator depend only on this crate.
//! It bundles the kernel set used by the compiled IR, the block-reusing memory
//! pool, parameter snapshots, dataset ingestion and the solver update.

pub mod context;
pub mod data;
pub mod driver;
pub mod error;
pub mod init;
pub mod kernels;
pub mod pool;
pub mod snapshot;
pub mod solver;
pub mod tensor;
pub mod workspace;

pub use context::Context;
pub use data::{Batch, Dataset, Split};
pub use driver::{Network, Params, TestOutput, TrainOptions, TrainReport};
pub use error::{Result, RuntimeError};
pub use init::Init;
pub use kernels::index::{IndexExpr, IndexOp};
pub use kernels::{Arg, Kernel};
pub use pool::{MemoryPool, PoolMode, PoolStats};
pub use tensor::{Element, Tensor};
pub use workspace::Workspace;

/// Bytes per MB used by every memory report.
pub const MB: f64 = 1.0e6;
