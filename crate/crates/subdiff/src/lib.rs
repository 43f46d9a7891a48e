//! Fundamental solution, mild solutions and Newtonian potentials of the
//! Caputo-time-fractional heat equation on R^N (N = 1, 2, 3), together
//! with a verification harness for large-time decay rates and
//! asymptotic profiles across space-time scales.

pub mod datum;
pub mod interp;
pub mod profile;
pub mod quad;
pub mod transforms;
pub mod special;

pub use special::FractionalOrder;
