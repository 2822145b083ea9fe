//! Eternal solutions in exponential self-similar form for
//!
//! ```text
//! u_t = Δ(u^m) + |x|^σ u^p,   σ = -2(p-1)/(m-1),   m > 1,   1 < p < m,
//! ```
//!
//! looked for as `u(x,t) = e^{αt} f(|x| e^{-βt})` with `β = (m-1)α/2`.
//!
//! The crate computes the profiles `f`, locates the unique exponent `α*`
//! for which the profile has compact support with zero flux at the edge,
//! analyses the associated planar phase system, assembles space-time
//! solutions, and runs a radial finite-volume solver for the regularised
//! problems `u_t = Δ(u^m) + (|x|+ε)^σ u^p` using the self-similar solutions
//! as upper barriers.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod io;
pub mod ode;
pub mod params;
pub mod pde;
pub mod phase;
pub mod profile;
pub mod quad;
pub mod selfsim;
pub mod shooter;

pub use error::{Error, Result};
pub use params::Params;
