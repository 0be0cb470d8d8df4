//! Threshold-2 bootstrap percolation on the Hamming torus `[0, n)^d`.
//!
//! - [`torus`]: vertices, subtori and their distance / enclosing algebra.
//! - [`ca`]: dense synchronous automaton for any threshold; the reference engine.
//! - [`span`]: exact threshold-2 closure by merging subtori, internal spanning.
//! - [`theory`]: closed-form limits, exponent tables, combinatorial counts.
//! - [`montecarlo`]: seeded experiment harness and self-verification suites.

pub mod ca;
pub mod error;
pub mod montecarlo;
pub mod span;
pub mod theory;
pub mod torus;

pub use error::{Error, Result};
pub use span::{CountMode, MaximalDecomposition, SeedSet};
pub use torus::{Dimensions, Subtorus, Vertex};
