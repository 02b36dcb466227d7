//! Wasserstein natural-gradient and natural-proximal optimization for
//! implicit generative models.
//!
//! The crate is generic over the floating point type through [`Scalar`]
//! (`f32` or `f64`); the `*64` aliases below fix it to `f64`, which is what
//! the command line tool and the experiment harness use.

// `!(x > 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// `Var` exposes `add`, `sub`, ... as methods; the operator traits delegate to them.
#![allow(clippy::should_implement_trait)]

pub mod adversarial;
pub mod diff;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod linalg;
pub mod matrix;
pub mod models;
pub mod optim;
pub mod params;
pub mod scalar;
pub mod wmetric;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use params::{Layout, ParamVector};
pub use scalar::Scalar;

pub type Matrix64 = Matrix<f64>;
pub type ParamVector64 = ParamVector<f64>;
pub type Tape64 = diff::Tape<f64>;
