//! The built-in scenario library: seeded samplers with analytic oracles
//! where the law admits them, used by the packaged experiments and the
//! verification suite.
//!
//! Noise laws are discretized to the lattice by nearest-point rounding, and
//! every analytic law shipped here is evaluated on the same lattice so that
//! estimator comparisons cancel the discretization bias.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::argmin::eps_argmin;
use crate::carrier::{Carrier, GridSpec};
use crate::hyperspace::ClosedSet;
use crate::lsc::{ExtReal, LscFunction};
use crate::stochastic::substream::replicate_rng;
use crate::stochastic::{IntegrandSampler, SetSampler};
use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    SetValued,
    IntegrandValued,
}

/// Static description of one library scenario.
#[derive(Clone, Debug)]
pub struct ScenarioInfo {
    pub id: &'static str,
    pub summary: &'static str,
    pub kind: ScenarioKind,
    /// Testers this scenario is built to exercise.
    pub exercises: &'static [&'static str],
    /// Analytic oracles the samplers carry.
    pub oracles: &'static [&'static str],
    /// Tunable parameters the scenario reads from `ScenarioParams`.
    pub params: &'static [&'static str],
    /// Declared to converge (distributionally, in the epigraph sense for
    /// integrand scenarios) to its own limit sampler.
    pub epi_convergent: bool,
}

/// Tunable scenario parameters with sensible defaults; unknown scenarios
/// ignore the fields they do not use.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioParams {
    /// number of sequence elements
    pub seq_len: usize,
    /// position k (0-based) maps to family index n = index_offset + k + 1
    pub index_offset: u64,
    /// support of the uniform-singleton law
    pub support_lo: f64,
    pub support_hi: f64,
    /// position of the deterministic atom
    pub atom: f64,
    /// noise scale of the random-quadratic family
    pub noise_sd: f64,
    /// tilt magnitude eta_n = tilt_scale / n of the double-well family
    pub tilt_scale: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            seq_len: 16,
            index_offset: 0,
            support_lo: 0.0,
            support_hi: 1.0,
            atom: 0.5,
            noise_sd: 1.0,
            tilt_scale: 1.0,
        }
    }
}

const LIBRARY: &[ScenarioInfo] = &[
    ScenarioInfo {
        id: "alternating-singletons",
        summary: "singletons flipping between -1 and +1; a sequence with no set limit",
        kind: ScenarioKind::SetValued,
        exercises: &["rcs-convergence"],
        oracles: &["indicator-capacity"],
        params: &["seq_len", "index_offset"],
        epi_convergent: false,
    },
    ScenarioInfo {
        id: "deterministic-atom",
        summary: "the constant singleton at `atom`; its capacity steps from 0 to 1",
        kind: ScenarioKind::SetValued,
        exercises: &["continuity-screen", "rcs-convergence"],
        oracles: &["indicator-capacity"],
        params: &["seq_len", "atom"],
        epi_convergent: false,
    },
    ScenarioInfo {
        id: "s1-shrinking-singleton",
        summary: "C_n = {1/n} collapsing onto {0}; indicators are exact",
        kind: ScenarioKind::SetValued,
        exercises: &["rcs-convergence"],
        oracles: &["indicator-capacity"],
        params: &["seq_len", "index_offset"],
        epi_convergent: false,
    },
    ScenarioInfo {
        id: "s2-uniform-singleton",
        summary: "a uniform random point of [support_lo, support_hi], rounded to the lattice",
        kind: ScenarioKind::SetValued,
        exercises: &["rcs-convergence", "continuity-screen"],
        oracles: &["interval-overlap-capacity"],
        params: &["seq_len", "support_lo", "support_hi"],
        epi_convergent: false,
    },
    ScenarioInfo {
        id: "s3-random-quadratic",
        summary: "t^2 - 2 t W with lattice-rounded gaussian W; minimizer law equals the noise law",
        kind: ScenarioKind::IntegrandValued,
        exercises: &["epi-dist", "argmin-upper-fell", "argmin-fell", "tightness", "selection"],
        oracles: &["argmin-law"],
        params: &["seq_len", "noise_sd"],
        epi_convergent: true,
    },
    ScenarioInfo {
        id: "s4-double-well",
        summary: "(t^2-1)^2 with vanishing random tilt +-(tilt_scale/n) t; two limit minimizers",
        kind: ScenarioKind::IntegrandValued,
        exercises: &["epi-dist", "argmin-upper-fell", "selection", "tightness"],
        oracles: &["limit-argmin-set"],
        params: &["seq_len", "index_offset", "tilt_scale"],
        epi_convergent: true,
    },
    ScenarioInfo {
        id: "s5-localized-dip",
        summary: "flat function with a unit dip at 1/n; the dip survives in the limit at 0",
        kind: ScenarioKind::IntegrandValued,
        exercises: &["epi-dist", "argmin-upper-fell"],
        oracles: &["argmin-law"],
        params: &["seq_len", "index_offset"],
        epi_convergent: true,
    },
    ScenarioInfo {
        id: "s6-oscillation",
        summary: "sin(n t) against its lower envelope, the constant -1",
        kind: ScenarioKind::IntegrandValued,
        exercises: &["epi-dist", "argmin-upper-fell"],
        oracles: &[],
        params: &["seq_len", "index_offset"],
        epi_convergent: true,
    },
];

/// All scenarios, sorted by id.
pub fn scenario_library() -> Vec<ScenarioInfo> {
    let mut v = LIBRARY.to_vec();
    v.sort_by_key(|s| s.id);
    v
}

pub fn scenario_info(id: &str) -> Option<ScenarioInfo> {
    LIBRARY.iter().find(|s| s.id == id).cloned()
}

// ---------------------------------------------------------------------------
// samplers

/// Constant random set: every draw is the same set.
pub struct DeterministicSet {
    label: String,
    set: ClosedSet<GridSpec>,
}

impl DeterministicSet {
    pub fn new(label: impl Into<String>, set: ClosedSet<GridSpec>) -> Self {
        DeterministicSet {
            label: label.into(),
            set,
        }
    }
}

impl SetSampler for DeterministicSet {
    fn id(&self) -> &str {
        &self.label
    }

    fn grid(&self) -> &GridSpec {
        self.set.carrier()
    }

    fn draw(&self, _stream: u64, _replicate: u64) -> ClosedSet<GridSpec> {
        self.set.clone()
    }

    fn analytic_capacity(&self, b: &ClosedSet<GridSpec>) -> Option<f64> {
        Some(crate::hyperspace::hits(&self.set, b) as u64 as f64)
    }
}

/// Singleton at a uniform draw from `[lo, hi]`, rounded to the lattice.
pub struct UniformSingleton {
    grid: GridSpec,
    lo: f64,
    hi: f64,
}

impl UniformSingleton {
    pub fn new(grid: &GridSpec, lo: f64, hi: f64) -> Self {
        assert!(hi > lo);
        UniformSingleton { grid: *grid, lo, hi }
    }

    /// Probability that the rounded draw lands exactly on lattice point id:
    /// the overlap of the rounding cell with the support.
    fn point_mass(&self, id: u32) -> f64 {
        let h = self.grid.spacing();
        let x = self.grid.coords_of(self.grid.point(id))[0];
        // edge cells absorb everything rounded (and clamped) beyond them
        let cell_lo = if id == 0 { f64::NEG_INFINITY } else { x - h / 2.0 };
        let cell_hi = if id as usize == self.grid.len() - 1 {
            f64::INFINITY
        } else {
            x + h / 2.0
        };
        let overlap = (cell_hi.min(self.hi) - cell_lo.max(self.lo)).max(0.0);
        overlap / (self.hi - self.lo)
    }
}

impl SetSampler for UniformSingleton {
    fn id(&self) -> &str {
        "uniform-singleton"
    }

    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn draw(&self, stream: u64, replicate: u64) -> ClosedSet<GridSpec> {
        let mut rng = replicate_rng(stream, replicate);
        let u: f64 = rng.random();
        let x = self.lo + u * (self.hi - self.lo);
        ClosedSet::from_points(&self.grid, [self.grid.nearest(&[x])]).unwrap()
    }

    fn analytic_capacity(&self, b: &ClosedSet<GridSpec>) -> Option<f64> {
        Some(b.ids().iter().map(|&id| self.point_mass(id)).sum())
    }
}

/// Constant random integrand: every draw is the same grid function.
pub struct DeterministicIntegrand {
    label: String,
    f: LscFunction,
    unique: bool,
    pmf: Option<Vec<f64>>,
}

impl DeterministicIntegrand {
    pub fn new(label: impl Into<String>, f: LscFunction, unique: bool) -> Self {
        DeterministicIntegrand {
            label: label.into(),
            f,
            unique,
            pmf: None,
        }
    }

    pub fn with_point_mass_argmin(mut self) -> Self {
        let a = eps_argmin(&self.f, 0.0);
        if a.len() == 1 {
            let mut pmf = vec![0.0; self.f.grid().len()];
            pmf[a.ids()[0] as usize] = 1.0;
            self.pmf = Some(pmf);
        }
        self
    }
}

impl IntegrandSampler for DeterministicIntegrand {
    fn id(&self) -> &str {
        &self.label
    }

    fn grid(&self) -> &GridSpec {
        self.f.grid()
    }

    fn draw(&self, _stream: u64, _replicate: u64) -> LscFunction {
        self.f.clone()
    }

    fn unique_argmin(&self) -> bool {
        self.unique
    }

    fn argmin_pmf(&self) -> Option<Vec<f64>> {
        self.pmf.clone()
    }
}

/// `t^2 - 2 t W` with `W ~ N(0, sd)` rounded to the lattice. The lattice
/// minimizer is exactly the rounded noise, so the minimizer law is the
/// lattice-discretized gaussian with its mass beyond the window clamped to
/// the edge points.
pub struct RandomQuadratic {
    grid: GridSpec,
    sd: f64,
}

impl RandomQuadratic {
    pub fn new(grid: &GridSpec, sd: f64) -> Self {
        assert!(sd > 0.0);
        RandomQuadratic { grid: *grid, sd }
    }

    pub fn lattice_noise_pmf(grid: &GridSpec, sd: f64) -> Vec<f64> {
        let normal = Normal::new(0.0, sd).unwrap();
        let h = grid.spacing();
        let n = grid.len();
        (0..n as u32)
            .map(|id| {
                let x = grid.coords_of(grid.point(id))[0];
                let a = if id == 0 { f64::NEG_INFINITY } else { x - h / 2.0 };
                let b = if id as usize == n - 1 { f64::INFINITY } else { x + h / 2.0 };
                normal.cdf(b) - normal.cdf(a)
            })
            .collect()
    }
}

impl IntegrandSampler for RandomQuadratic {
    fn id(&self) -> &str {
        "random-quadratic"
    }

    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn draw(&self, stream: u64, replicate: u64) -> LscFunction {
        let mut rng = replicate_rng(stream, replicate);
        let w: f64 = rng.sample::<f64, _>(StandardNormal) * self.sd;
        let w_lat = self.grid.coords_of(self.grid.nearest(&[w]))[0];
        LscFunction::from_fn(&self.grid, |x| x[0] * x[0] - 2.0 * x[0] * w_lat)
    }

    fn unique_argmin(&self) -> bool {
        true
    }

    fn argmin_pmf(&self) -> Option<Vec<f64>> {
        Some(Self::lattice_noise_pmf(&self.grid, self.sd))
    }
}

/// `(t^2 - 1)^2 + s eta t` with an equiprobable random sign `s`. With
/// `eta = 0` the integrand is deterministic with the two minimizers -1, 1.
pub struct DoubleWell {
    grid: GridSpec,
    eta: f64,
}

impl DoubleWell {
    pub fn new(grid: &GridSpec, eta: f64) -> Self {
        DoubleWell { grid: *grid, eta }
    }

    fn well(x: f64) -> f64 {
        let u = x * x - 1.0;
        u * u
    }
}

impl IntegrandSampler for DoubleWell {
    fn id(&self) -> &str {
        "double-well"
    }

    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn draw(&self, stream: u64, replicate: u64) -> LscFunction {
        if self.eta == 0.0 {
            return LscFunction::from_fn(&self.grid, |x| Self::well(x[0]));
        }
        let mut rng = replicate_rng(stream, replicate);
        let s: f64 = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let eta = self.eta;
        LscFunction::from_fn(&self.grid, move |x| Self::well(x[0]) + s * eta * x[0])
    }

    fn unique_argmin(&self) -> bool {
        self.eta != 0.0
    }
}

// ---------------------------------------------------------------------------
// builders

fn singleton(grid: &GridSpec, x: f64) -> ClosedSet<GridSpec> {
    ClosedSet::from_points(grid, [grid.nearest(&[x])]).unwrap()
}

/// A sampler sequence with its limit sampler.
pub type SetScenario = (Vec<Box<dyn SetSampler>>, Box<dyn SetSampler>);

/// A sampler sequence, its limit, and the scenario's compliant eps values.
pub type IntegrandScenario = (
    Vec<Box<dyn IntegrandSampler>>,
    Box<dyn IntegrandSampler>,
    Vec<f64>,
);

/// Instantiates a set-valued scenario: the sampler sequence and its limit.
/// The library families live on one-dimensional windows; other grids and
/// degenerate parameters yield `None`.
pub fn build_set_scenario(
    id: &str,
    grid: &GridSpec,
    params: &ScenarioParams,
) -> Option<SetScenario> {
    if grid.dim() != 1 || params.seq_len == 0 {
        return None;
    }
    let support_ok = params.support_hi.is_finite()
        && params.support_lo.is_finite()
        && params.support_hi > params.support_lo;
    if id == "s2-uniform-singleton" && !support_ok {
        return None;
    }
    let indices = || (0..params.seq_len).map(|k| params.index_offset + k as u64 + 1);
    match id {
        "s1-shrinking-singleton" => {
            let seq: Vec<Box<dyn SetSampler>> = indices()
                .map(|n| {
                    Box::new(DeterministicSet::new(
                        format!("s1[{n}]"),
                        singleton(grid, 1.0 / n as f64),
                    )) as Box<dyn SetSampler>
                })
                .collect();
            let limit = Box::new(DeterministicSet::new("s1-limit", singleton(grid, 0.0)));
            Some((seq, limit))
        }
        "s2-uniform-singleton" => {
            let mk = || -> Box<dyn SetSampler> {
                Box::new(UniformSingleton::new(grid, params.support_lo, params.support_hi))
            };
            let seq: Vec<Box<dyn SetSampler>> = (0..params.seq_len).map(|_| mk()).collect();
            Some((seq, mk()))
        }
        "alternating-singletons" => {
            let seq: Vec<Box<dyn SetSampler>> = indices()
                .map(|n| {
                    let x = if n % 2 == 1 { -1.0 } else { 1.0 };
                    Box::new(DeterministicSet::new(format!("alt[{n}]"), singleton(grid, x)))
                        as Box<dyn SetSampler>
                })
                .collect();
            let limit = Box::new(DeterministicSet::new("alt-limit", singleton(grid, 1.0)));
            Some((seq, limit))
        }
        "deterministic-atom" => {
            let mk = || -> Box<dyn SetSampler> {
                Box::new(DeterministicSet::new("atom", singleton(grid, params.atom)))
            };
            let seq: Vec<Box<dyn SetSampler>> = (0..params.seq_len).map(|_| mk()).collect();
            Some((seq, mk()))
        }
        _ => None,
    }
}

/// Instantiates an integrand-valued scenario: the sampler sequence, its
/// limit, and the compliant eps sequence the scenario declares.
pub fn build_integrand_scenario(
    id: &str,
    grid: &GridSpec,
    params: &ScenarioParams,
) -> Option<IntegrandScenario> {
    if grid.dim() != 1 || params.seq_len == 0 {
        return None;
    }
    let sd_ok = params.noise_sd.is_finite() && params.noise_sd > 0.0;
    if id == "s3-random-quadratic" && !sd_ok {
        return None;
    }
    let indices = || (0..params.seq_len).map(|k| params.index_offset + k as u64 + 1);
    let zeros = vec![0.0; params.seq_len];
    match id {
        "s3-random-quadratic" => {
            let seq: Vec<Box<dyn IntegrandSampler>> = (0..params.seq_len)
                .map(|_| Box::new(RandomQuadratic::new(grid, params.noise_sd)) as Box<_>)
                .collect();
            let limit = Box::new(RandomQuadratic::new(grid, params.noise_sd));
            Some((seq, limit, zeros))
        }
        "s4-double-well" => {
            let seq: Vec<Box<dyn IntegrandSampler>> = indices()
                .map(|n| Box::new(DoubleWell::new(grid, params.tilt_scale / n as f64)) as Box<_>)
                .collect();
            let limit = Box::new(DoubleWell::new(grid, 0.0));
            Some((seq, limit, zeros))
        }
        "s5-localized-dip" => {
            let dip = |at: f64, label: String| {
                let mut f = LscFunction::constant(grid, ExtReal::finite(0.0));
                f.set_value(grid.nearest(&[at]), ExtReal::finite(-1.0));
                DeterministicIntegrand::new(label, f, true).with_point_mass_argmin()
            };
            let seq: Vec<Box<dyn IntegrandSampler>> = indices()
                .map(|n| Box::new(dip(1.0 / n as f64, format!("s5[{n}]"))) as Box<_>)
                .collect();
            let limit = Box::new(dip(0.0, "s5-limit".into()));
            Some((seq, limit, zeros))
        }
        "s6-oscillation" => {
            let seq: Vec<Box<dyn IntegrandSampler>> = indices()
                .map(|n| {
                    let f = LscFunction::from_fn(grid, move |x| (n as f64 * x[0]).sin());
                    Box::new(DeterministicIntegrand::new(format!("s6[{n}]"), f, false)) as Box<_>
                })
                .collect();
            let limit = Box::new(DeterministicIntegrand::new(
                "s6-limit",
                LscFunction::constant(grid, ExtReal::finite(-1.0)),
                false,
            ));
            Some((seq, limit, zeros))
        }
        _ => None,
    }
}

/// The solution set of a random integrand, viewed as a random closed set.
pub struct ArgminSetSampler<'a> {
    integrand: &'a dyn IntegrandSampler,
    eps: f64,
    label: String,
}

impl<'a> ArgminSetSampler<'a> {
    pub fn new(integrand: &'a dyn IntegrandSampler, eps: f64) -> Self {
        let label = format!("argmin({}, {eps})", integrand.id());
        ArgminSetSampler {
            integrand,
            eps,
            label,
        }
    }
}

impl SetSampler for ArgminSetSampler<'_> {
    fn id(&self) -> &str {
        &self.label
    }

    fn grid(&self) -> &GridSpec {
        self.integrand.grid()
    }

    fn draw(&self, stream: u64, replicate: u64) -> ClosedSet<GridSpec> {
        eps_argmin(&self.integrand.draw(stream, replicate), self.eps)
    }

    fn analytic_capacity(&self, b: &ClosedSet<GridSpec>) -> Option<f64> {
        // exact only when the solution set is a.s. the unique minimizer
        if self.eps != 0.0 || !self.integrand.unique_argmin() {
            return None;
        }
        let pmf = self.integrand.argmin_pmf()?;
        Some(b.ids().iter().map(|&id| pmf[id as usize]).sum())
    }
}
