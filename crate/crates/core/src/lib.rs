//! Numerical certification toolkit for the multipartite Bell functional
//! that self-tests GHZ states of arbitrary local dimension with two or
//! more d-outcome measurements per party.
//!
//! The library constructs the Bell operator and its ideal realization,
//! verifies the sum-of-squares operator identities behind the self-testing
//! statement (main and complementary), checks the relation suite forced by
//! maximal violation, computes classical bounds by exhaustive
//! deterministic enumeration, and runs white-noise robustness sweeps.
//!
//! All values are immutable after construction and every public operation
//! is a pure function; enumeration and operator assembly parallelize
//! internally with results independent of the worker count.

pub mod bell;
pub mod bounds;
pub mod error;
pub mod linalg;
pub mod observables;
pub mod sampling;
pub mod scenario;
pub mod sos;

pub use error::{Error, Result};
