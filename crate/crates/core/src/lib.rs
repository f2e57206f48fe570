//! Numerical laboratory for several complex variables.
//!
//! Grids over polydiscs and related domains, finite-difference Wirtinger
//! calculus, Cauchy transforms and dbar solvers, plurisubharmonicity checks,
//! polynomial and psh hulls, Hermitian linear algebra, finite-dimensional
//! operator models of L2 estimates, and weighted estimates with explicit
//! constants. Every check returns a [`certificate::Certificate`].

// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod cauchy;
pub mod certificate;
pub mod error;
pub mod expr;
pub mod grid;
pub mod hermitian;
pub mod hormander;
pub mod hulls;
pub mod operators;
pub mod polydisc;
pub mod psh;
pub mod quadrature;
pub mod wirtinger;

pub use num_complex::Complex64 as C64;

pub use certificate::Certificate;
pub use error::{Error, Result};
