//! Reduced quasistatic elastoplastic evolution of thin plates.
//!
//! The crate covers the constitutive layer ([`forms`]), the pointwise
//! plastic update ([`local`]), the plate discretization ([`plate`]), the
//! time-incremental solver with its diagnostics ([`evolution`]), the
//! multiplicative dissipation distance on SL(3) ([`sl3`]) and the
//! configuration / persistence layer used by the command line tool
//! ([`config`], [`io`], [`run`]).

// `!(x > 0.0)` also rejects NaN, which is the point of every such test.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod evolution;
pub mod forms;
pub mod io;
pub mod linalg;
pub mod local;
pub mod plate;
pub mod run;
pub mod scenario;
pub mod sl3;
pub mod tensor;

pub use error::{Error, Result};
