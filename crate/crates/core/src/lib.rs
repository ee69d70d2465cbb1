//! Controllability analysis for quantum systems whose excited levels are
//! two-fold degenerate and whose ground level is simple.
//!
//! * [`hilbert`]: basis labels and the `x`, `y`, `h` operator algebra.
//! * [`hamiltonians`]: system specs and the drift, excitation and dipole
//!   Hamiltonians.
//! * [`lie_closure`]: numerical closure of the dynamical Lie algebra, the
//!   ground-truth controllability test.
//! * [`criteria`]: closed-form sufficient conditions and the degeneracy
//!   removal checks.
//! * [`dynamics`]: field relaxation fidelity (perturbative and integrated),
//!   piecewise-constant evolution and pulse optimization.
//! * [`cli`]: the `qdctl` command-line front end.
//!
//! Batch work runs on rayon when the default `parallel` feature is on.

pub mod cli;
pub mod criteria;
pub mod dynamics;
pub mod error;
pub mod exec;
pub mod hamiltonians;
pub mod hilbert;
pub mod lie_closure;
mod linalg;

pub use error::{Error, Result};
pub use exec::Execution;
