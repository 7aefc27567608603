//! Desk-scale numerical laboratory for set convergence on grids.
//!
//! The crate discretizes a window of R^1 or R^2 into a finite lattice and
//! provides, on top of it:
//!
//! - closed sets with hit-or-miss predicates and numerical
//!   Painleve-Kuratowski limits ([`hyperspace`]);
//! - extended-real lower-semicontinuous grid functions, their epigraphs in
//!   the product lattice, and epigraph-based convergence checks ([`lsc`]);
//! - eps-optimal solution sets, selection rules, and a deterministic
//!   solution-set inclusion check ([`argmin`]);
//! - seeded samplers of random closed sets and random grid functions,
//!   Monte Carlo capacity estimation, continuity-radius screening, and the
//!   statistical convergence testers built from them ([`stochastic`]).
//!
//! Everything is deterministic given a seed: replicate streams are derived
//! by counter-based mixing, accumulation is integer counting, and reports
//! serialize with stable field order.

pub mod argmin;
pub mod carrier;
pub mod hyperspace;
pub mod lsc;
pub mod report;
pub mod stochastic;

pub use carrier::{Carrier, GridSpec, Point, ProductGrid, ProductPoint};
pub use hyperspace::{ClosedSet, Excess};
pub use lsc::{ExtReal, LscFunction};
pub use report::Verdict;
