//! Finite-length scaling analysis of `q`-ary polar codes on the `q`-ary
//! erasure channel.
//!
//! * [`gf`]: finite-field arithmetic and matrices over `GF(q)`.
//! * [`de`]: density evolution for Reed–Solomon kernels, channel profiles,
//!   code construction and the polarization Markov chain.
//! * [`lyapunov`]: polarization operators, test functions, the contraction
//!   constant `lambda` and the closed-form scaling bounds.
//! * [`ensemble`]: exact combinatorics of uniformly random invertible
//!   kernels.
//! * [`kernel`]: erasure polynomials of fixed kernels.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod de;
pub mod ensemble;
pub mod error;
pub mod gf;
pub mod kernel;
pub mod lyapunov;
pub mod numeric;

pub use de::ErasureProb;
pub use error::{Error, Result};
pub use gf::{Field, FieldParams, Matrix};
pub use num_rational::BigRational;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/finite-fields.md")]
    mod finite_fields {}
    #[doc = include_str!("../../../book/src/density-evolution.md")]
    mod density_evolution {}
    #[doc = include_str!("../../../book/src/lyapunov.md")]
    mod lyapunov {}
    #[doc = include_str!("../../../book/src/ensemble.md")]
    mod ensemble {}
    #[doc = include_str!("../../../book/src/kernels.md")]
    mod kernels {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
