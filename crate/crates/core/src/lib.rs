//! Exact-arithmetic laboratory for transport duality.
//!
//! * [`finite_ot`]: finite transport problems with primal, dual and support
//!   certificates.
//! * [`circle_dynamics`]: the circle discretized to `Z/M_n Z` along a tower of
//!   primes, rotations and orbit counting potentials.
//! * [`tau_construction`]: level-by-level interval permutations whose
//!   quasi-costs build up negative mass on a shrinking set.
//! * [`dual_sequences`]: corrected dual pairs and the singular-part surrogate.
//! * [`relaxed_gap`]: the double-indexed permutation family, truncated costs and
//!   the gap report.
//! * [`io`]: JSON artifacts with canonical rational text.

pub mod error;
mod lp;
pub mod rational;

pub mod circle_dynamics;
pub mod dual_sequences;
pub mod finite_ot;
pub mod io;
pub mod relaxed_gap;
pub mod tau_construction;

pub use error::{Error, Result};
pub use rational::{ExtRational, Rational};
