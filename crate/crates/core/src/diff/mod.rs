//! Differentiation engine: a reverse-mode tape over matrix-valued
//! primitives, the [`DiffFunction`] abstraction, and finite-difference
//! verification.

mod function;
mod tape;

pub use function::{
    evaluate, finite_diff_check, grad_scalar, grad_scalar_raw, jacobian, Arity, CoordinateCheck,
    DiffFunction, Dim, FiniteDiffReport, FnObjective, Reparametrized,
};
pub use tape::{Gradients, Tape, Var};
