//! Self-similar random fields: construction, transformation, verification.
//!
//! The crate builds multivariate regularly varying normalizations, Gaussian
//! field kernels (Lévy fractional Brownian field, fractional Brownian sheet,
//! the stationary log-polar kernel, lattice models), Lamperti transforms
//! between self-similar and stationary frames, partial-sum processes with
//! exact variance oracles, and the statistical checks that tie them
//! together.
//!
//! `no_std` + `alloc`; scalar math goes through `libm`, so results are
//! bit-identical across targets, and every stochastic routine takes an
//! explicit seed with per-replicate substreams. IO, file formats, and the
//! command-line front end live in the companion `ssrf-cli` crate.

#![cfg_attr(not(test), no_std)]
// Guards of the form !(x > 0.0) are NaN-rejecting by intent.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod attraction;
pub mod error;
pub mod fft;
pub mod fields;
pub mod lamperti;
pub mod linalg;
pub mod math;
pub mod regvar;
pub mod rng;
pub mod statcheck;

pub use error::{Error, Result};
