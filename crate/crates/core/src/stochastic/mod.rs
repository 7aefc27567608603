//! Random closed sets and random grid functions as seeded samplers, Monte
//! Carlo capacity estimation, the continuity-radius ledger, and the
//! statistical convergence testers built on top of them.
//!
//! Sampling is deterministic end to end: a sampler draw is a pure function
//! of `(stream, replicate)`, testers derive one stream per sequence index,
//! and all accumulation is integer counting, so reports are bit-identical
//! across runs and thread counts.

use crate::carrier::GridSpec;
use crate::hyperspace::ClosedSet;
use crate::lsc::LscFunction;
use thiserror::Error;

pub mod estimate;
pub mod ledger;
pub mod scenarios;
pub mod substream;
pub mod testers;

pub use estimate::{
    estimate_capacity, estimate_joint, estimate_joint_hit, inclusion_exclusion_union, JointEvent,
};
pub use ledger::{
    build_d, detect_continuity_radii, screen_radii, DBallUnion, RadiusLedger,
    RadiusScreenOutcome, ScreenConfig,
};
pub use scenarios::{
    build_integrand_scenario, build_set_scenario, scenario_library, ArgminSetSampler,
    ScenarioInfo, ScenarioKind, ScenarioParams,
};
pub use testers::{
    epi_continuity_screen, test_argmin_fell, test_argmin_upper_fell, test_epi_convergence_dist,
    test_rcs_convergence, test_selection_portmanteau, test_tightness, EpiEvent, EpiMode,
    EpiPanelTuple,
};

#[derive(Debug, Error, PartialEq)]
pub enum StochasticError {
    #[error("joint probability for index subset mask {0:#b} is missing")]
    MissingJointEntry(u32),
    #[error("panel is malformed: {0}")]
    BadPanel(String),
    #[error("offset sequence must be strictly decreasing, positive, and end below the lattice resolution")]
    BadOffsets,
    #[error("continuity screen rejected every candidate radius; the panel is too aggressive")]
    EmptyLedger,
    #[error("radius {0} is not in the ledger's accepted list")]
    RadiusNotInLedger(f64),
    #[error("samplers live on different grids")]
    GridMismatch,
    #[error("sequence of samplers is empty")]
    EmptySequence,
}

/// A random closed set as a seeded sampler: `draw(stream, replicate)` is
/// the replicate-th independent copy under the given stream, deterministic
/// in both arguments.
pub trait SetSampler: Send + Sync {
    fn id(&self) -> &str;
    fn grid(&self) -> &GridSpec;
    fn draw(&self, stream: u64, replicate: u64) -> ClosedSet<GridSpec>;

    /// Exact hitting probability oracle, when the law admits one.
    fn analytic_capacity(&self, _b: &ClosedSet<GridSpec>) -> Option<f64> {
        None
    }
}

/// A random lower-semicontinuous grid function as a seeded sampler.
pub trait IntegrandSampler: Send + Sync {
    fn id(&self) -> &str;
    fn grid(&self) -> &GridSpec;
    fn draw(&self, stream: u64, replicate: u64) -> LscFunction;

    /// Law metadata: the minimizer is almost surely unique.
    fn unique_argmin(&self) -> bool {
        false
    }

    /// Lattice law of the (unique) minimizer, indexed by lattice id.
    fn argmin_pmf(&self) -> Option<Vec<f64>> {
        None
    }
}
