//! Non-parametric tests for distributional symmetry: group invariance of a
//! distribution and equivariance of a conditional distribution.

pub mod condsym;
pub mod error;
pub mod groups;
pub mod invariance;
pub mod kernels;
pub mod mmd;
pub mod points;
pub mod rng;
pub mod stats;
pub mod synthdata;

pub use error::{Error, Result};
pub use groups::{GroupElement, GroupFamily, GroupSpec, InvariantKind};
pub use invariance::{McConfig, PowerEstimate, TestResult};
pub use kernels::{Kernel, KernelDescriptor, KernelSpec};
pub use mmd::MmdEstimate;
pub use points::Points;
pub use rng::RngStream;
pub use synthdata::{Generator, Sample};
