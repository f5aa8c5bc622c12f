//! Jamiton laboratory for the inhomogeneous Aw-Rascle-Zhang traffic model.
//!
//! * [`model`] – flow, desired speed and hesitation closures, SCC test.
//! * [`jamiton`] – exact traveling-wave construction and its fundamental-diagram geometry.
//! * [`solver`] – HLL finite volumes with implicit relaxation on a ring road.
//! * [`analysis`] – errors, jump detection and `(m, s)` regression.
//! * [`collision`] – two-jamiton collision experiments and batch harness.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod collision;
pub mod error;
pub mod io;
pub mod jamiton;
pub mod model;
pub mod numerics;
pub mod solver;

pub use error::{Error, Result};
pub use model::ModelParams;
