//! Hardy-type inequalities for Δλ-Laplacians: operator structure,
//! homogeneous norms, the λ-calculus fields, admissibility checks, seeded
//! Monte-Carlo verification and sharpness sweeps.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod calculus;
pub mod cli;
pub mod error;
pub mod fd;
pub mod fields;
pub mod hardy;
pub mod integrate;
pub mod norms;
pub mod numeric;
pub mod sharpness;
pub mod system;

pub use error::{Error, Result};
pub use fields::{BlockVectorField, ScalarField, Support};
pub use hardy::{ConditionMode, ConditionReport, HardyParams, IndexConvention, Variant};
pub use norms::NormVariant;
pub use system::{BlockPoint, LambdaSystem};
