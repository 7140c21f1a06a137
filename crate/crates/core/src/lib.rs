//! Tsirelson-type norms on finite-support sequences.
//!
//! The crate computes two implicitly defined norms on `c_00` for a
//! conjugate pair `1/p + 1/q = 1` and a branching factor `r ≥ 2`:
//!
//! * the classical norm `‖x‖_{p,r}`, where the pieces of each split must be
//!   successive ([`classical`]);
//! * the modified norm `|x|_{p,r}`, where the pieces need only be pairwise
//!   disjoint ([`modified`]).
//!
//! Both norms are suprema of pairings against explicit norming sets. The
//! [`certificate`] and [`successive`] modules build and replay membership trees
//! for those sets, and [`stabilization`] runs finite block-sequence
//! experiments comparing `|·|_{p,r}` with `‖·‖_p`.

pub mod classical;
pub mod certificate;
pub mod error;
pub mod exact;
pub mod io;
pub mod successive;
pub mod modified;
pub mod params;
pub mod rng;
pub mod stabilization;
pub mod vector;

pub use error::{Error, Result};
pub use params::{BaseKind, GridBase, Params};
pub use vector::{GridEntry, GridVector, IntervalSet, Sign, SparseVector};

/// Default absolute-plus-relative tolerance for floating point comparisons.
pub const DEFAULT_TOL: f64 = 1e-9;

/// `a ≤ b` up to `tol·(1 + |b|)`.
pub fn approx_le(a: f64, b: f64, tol: f64) -> bool {
    a <= b + tol * (1.0 + b.abs())
}

/// `|a − b| ≤ tol·(1 + |b|)`.
pub fn approx_eq(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}
