//! Transition laws, exact samplers and path simulation for a
//! time-inhomogeneous Cox–Ingersoll–Ross diffusion with positive jumps
//!
//! `dξ = (a(t) − β(t)ξ) dt + σ(t)√(ξ ∨ 0) dW + ∫ y μ(dt, dy)`,
//!
//! where `μ` is a Poisson random measure with intensity `ã(t) dt ν(dy)`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coefficients;
pub mod error;
pub mod kernels;
pub mod model;
pub mod numerics;
pub mod paths;
pub mod samplers;
pub mod verify;

pub use error::{Error, Result};
