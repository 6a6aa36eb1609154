//! A laboratory for the SU(3) lattice matrix-multiply kernel.
//!
//! * [`kernel`]: the site kernel in six parallel decompositions, flop
//!   accounting and verification.
//! * [`layout`]: touch-free allocation and partition-mirroring initialization.
//! * [`roofline`]: compute, bandwidth and instruction-issue bounds.
//! * [`issue_sim`]: a round-robin, single-issue, in-order pipeline model.
//! * [`harness`]: timed runs, scaling sweeps, model comparison, reports.

pub mod complex;
pub mod error;
pub mod harness;
pub mod issue_sim;
pub mod kernel;
pub mod lattice;
pub mod layout;
pub mod roofline;
pub mod scalar;

pub use complex::Complex;
pub use error::{Error, Result};
pub use lattice::{Lattice, LinkSet, Site, Su3Matrix};
pub use scalar::{CountedF64, Precision, Scalar};
