//! Finite-volume simulation of a stiff relaxation model of homogeneous
//! two-phase flow, the equilibrium Euler system it relaxes to, and the
//! diagnostics used to measure the relaxation limit.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod entropy;
pub mod eos;
pub mod equilibrium;
pub mod error;
pub mod field;
pub mod grid;
pub mod harness;
pub mod relax;
mod roots;

pub use eos::{ConservedState, EosModel, PrimitiveState, VoidFractionModel};
pub use equilibrium::EqState;
pub use error::{Error, Result};
pub use field::{FluxScheme, SolutionField, SolverConfig, SourceScheme};
pub use grid::{Boundary, Grid1D};

// The guide's code blocks run as doc-tests through these modules.
#[cfg(doctest)]
pub mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    pub mod model {}
    #[doc = include_str!("../../../book/src/solvers.md")]
    pub mod solvers {}
    #[doc = include_str!("../../../book/src/diagnostics.md")]
    pub mod diagnostics {}
    #[doc = include_str!("../../../book/src/harness.md")]
    pub mod harness {}
}
