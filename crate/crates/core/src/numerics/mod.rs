//! Deterministic numerical building blocks: quadrature and random variates.

pub mod quadrature;
pub mod random;

pub use quadrature::{
    integrate, integrate_singular, integrate_to_infinity, integrate_with_breakpoints,
    QuadratureResult,
};
pub use random::{
    exponential, gamma_sample, inhomogeneous_poisson_times, poisson_sample, sample_batched,
    standard_normal, uniform, with_workers, RngStream, StreamRng,
};
