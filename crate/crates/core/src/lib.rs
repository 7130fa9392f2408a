//! Lattice laboratory for the one-arm exponent of the critical Ising model.
//!
//! The crate implements the random-current representation, the
//! source-switching identity and the second-moment correlation inequalities
//! for Ising and bond percolation, both exactly (enumeration on small balls)
//! and stochastically (cluster Monte Carlo, worm sampling, percolation
//! sampling), together with the power-law lattice sums that turn the
//! correlation inequality into an `r^{-1}` lower bound on `<σ_o>_r^+`.

pub mod current;
pub mod error;
pub mod exact;
pub mod exec;
pub mod graph;
pub mod ising_mc;
pub mod kv;
pub mod lattice;
pub mod percolation;
pub mod random_current;
pub mod rng;
pub mod scaling;
pub mod stats;
pub mod suite;

pub use error::{Error, Result};
pub use exec::Exec;
pub use graph::{Boundary, IsingGraph};
