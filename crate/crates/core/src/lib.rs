//! Variational denoising for Poisson and multiplicative (Gamma) noise.
//!
//! Non-additive models with a Bregman fidelity,
//!
//! ```text
//! F(x, t) = min_v  t·D_{H*}(x/t, v) + J*(∇H*(v)),
//! ```
//!
//! are solved through their convex additive counterparts
//!
//! ```text
//! S(x, t) = min_v  J(x − t·v) + t·H*(v),
//! ```
//!
//! which share the same minimizer and satisfy `S + F = t·H*(x/t)`. Here `J`
//! is the indicator of the Meyer ball of radius `α` (the conjugate of
//! `α·TV`), so every ADMM iteration reduces to a per-pixel scalar update and
//! one anisotropic TV prox.
//!
//! The [`hj`] module checks numerically that `S` solves the Hamilton–Jacobi
//! equation `∂S/∂t + H(∇ₓS) = 0`, that the minimizer is recovered from
//! `∇H(∇ₓS)`, and the large-`t` asymptotics.

// Negated comparisons such as `!(x > 0.0)` deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod admm;
pub mod battery;
pub mod convex;
pub mod error;
pub mod hj;
pub mod image;
pub mod io;
pub mod noise;
pub mod protocol;
pub mod tv;


pub use admm::{AdmmConfig, Model, SolveReport};
pub use convex::{ExtReal, Hamiltonian, HamiltonianKind};
pub use error::{Error, Result};
pub use image::Image;
pub use tv::TvProxConfig;
