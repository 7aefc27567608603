//! The continuity-radius ledger: a finite stand-in for the dense set of
//! radii whose closed balls have hitting events that are continuity sets of
//! the limit law.
//!
//! Continuity cannot be certified from finite samples, only screened: a
//! radius is kept when widening and shrinking the ball by `delta` moves the
//! estimated hitting probability by no more than `kappa` plus a six-sigma
//! sampling allowance. Screened-out radii are excluded from panels.

use crate::carrier::{Carrier, GridSpec, Point};
use crate::hyperspace::{closed_ball, ClosedSet};
use crate::stochastic::estimate::estimate_capacity;
use crate::stochastic::substream::mix;
use crate::stochastic::{SetSampler, StochasticError};

/// Configuration of the continuity screen: the centers every candidate must
/// survive, the probe offset, and the acceptance threshold.
#[derive(Clone, Debug)]
pub struct ScreenConfig {
    pub centers: Vec<Point>,
    pub delta: f64,
    pub kappa: f64,
    pub n_samples: u64,
    /// Prefer the sampler's analytic capacity over Monte Carlo when it has
    /// one (the sampling allowance is then zero).
    pub use_analytic: bool,
}

/// Outcome of screening one radius at one center.
fn probe_gap(
    sampler: &dyn SetSampler,
    center: Point,
    r: f64,
    cfg: &ScreenConfig,
    stream: u64,
) -> (f64, f64) {
    let grid = sampler.grid();
    let plus = closed_ball(grid, center, r + cfg.delta);
    let minus = closed_ball(grid, center, r - cfg.delta);
    let eval = |b: &ClosedSet<GridSpec>, salt: u64| -> (f64, f64) {
        if cfg.use_analytic {
            if let Some(p) = sampler.analytic_capacity(b) {
                return (p, 0.0);
            }
        }
        let est = estimate_capacity(sampler, b, cfg.n_samples, mix(stream, salt));
        (est.value, est.std_error)
    };
    let (p_plus, se_plus) = eval(&plus, 1);
    let (p_minus, se_minus) = eval(&minus, 2);
    let pooled = (se_plus * se_plus + se_minus * se_minus).sqrt();
    ((p_plus - p_minus).abs(), pooled)
}

/// Screen verdict for one radius at one center.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadiusScreenOutcome {
    pub radius: f64,
    pub gap: f64,
    pub pooled_se: f64,
    pub accepted: bool,
}

/// Screens each candidate radius at one center, reporting the probed gap.
#[allow(clippy::too_many_arguments)]
pub fn screen_radii(
    sampler: &dyn SetSampler,
    center: Point,
    candidate_radii: &[f64],
    delta: f64,
    n_samples: u64,
    stream: u64,
    kappa: f64,
    use_analytic: bool,
) -> Vec<RadiusScreenOutcome> {
    assert!(delta >= sampler.grid().spacing(), "delta below lattice resolution");
    assert!(kappa > 0.0);
    let cfg = ScreenConfig {
        centers: vec![center],
        delta,
        kappa,
        n_samples,
        use_analytic,
    };
    candidate_radii
        .iter()
        .map(|&r| {
            let (gap, pooled) = probe_gap(sampler, center, r, &cfg, mix(stream, r.to_bits()));
            RadiusScreenOutcome {
                radius: r,
                gap,
                pooled_se: pooled,
                accepted: gap <= kappa + 6.0 * pooled,
            }
        })
        .collect()
}

/// Keeps the candidate radii whose hitting probability is stable under a
/// `delta` perturbation at the given center: gap <= kappa + 6 * pooled SE.
#[allow(clippy::too_many_arguments)]
pub fn detect_continuity_radii(
    sampler: &dyn SetSampler,
    center: Point,
    candidate_radii: &[f64],
    delta: f64,
    n_samples: u64,
    stream: u64,
    kappa: f64,
    use_analytic: bool,
) -> Vec<f64> {
    screen_radii(
        sampler,
        center,
        candidate_radii,
        delta,
        n_samples,
        stream,
        kappa,
        use_analytic,
    )
    .into_iter()
    .filter(|o| o.accepted)
    .map(|o| o.radius)
    .collect()
}

/// The ledger: base radii, the decreasing offset sequence, and the
/// candidates `r +- s_k` that survived the continuity screen at every
/// center of the panel.
#[derive(Clone, Debug, PartialEq)]
pub struct RadiusLedger {
    pub base_radii: Vec<f64>,
    pub offsets: Vec<f64>,
    pub accepted: Vec<f64>,
}

impl RadiusLedger {
    pub fn contains(&self, r: f64) -> bool {
        self.accepted.contains(&r)
    }
}

/// Builds the ledger against the limit law: candidates `{r +- s_k}` with
/// negative ones dropped, screened per center panel.
pub fn build_d(
    limit: &dyn SetSampler,
    base_radii: &[f64],
    offsets: &[f64],
    screen: &ScreenConfig,
    stream: u64,
) -> Result<RadiusLedger, StochasticError> {
    let resolution = limit.grid().spacing();
    let decreasing = offsets.windows(2).all(|w| w[0] > w[1]);
    let positive = offsets.iter().all(|&s| s > 0.0);
    let below_resolution = offsets.last().is_some_and(|&s| s < resolution);
    if !(decreasing && positive && below_resolution) {
        return Err(StochasticError::BadOffsets);
    }
    let mut candidates = Vec::new();
    for &r in base_radii {
        for &s in offsets {
            candidates.push(r + s);
            if r - s > 0.0 {
                candidates.push(r - s);
            }
        }
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let accepted: Vec<f64> = candidates
        .into_iter()
        .filter(|&r| {
            screen.centers.iter().all(|&c| {
                let (gap, pooled) =
                    probe_gap(limit, c, r, screen, mix(stream, r.to_bits()));
                gap <= screen.kappa + 6.0 * pooled
            })
        })
        .collect();
    if accepted.is_empty() {
        return Err(StochasticError::EmptyLedger);
    }
    Ok(RadiusLedger {
        base_radii: base_radii.to_vec(),
        offsets: offsets.to_vec(),
        accepted,
    })
}

/// A finite union of closed balls with centers on the lattice and radii
/// drawn from a ledger; the panel elements of the set-convergence tester.
#[derive(Clone, Debug, PartialEq)]
pub struct DBallUnion {
    balls: Vec<(Point, f64)>,
}

impl DBallUnion {
    pub fn new(balls: Vec<(Point, f64)>, ledger: &RadiusLedger) -> Result<Self, StochasticError> {
        if balls.is_empty() {
            return Err(StochasticError::BadPanel("union needs at least one ball".into()));
        }
        for &(_, r) in &balls {
            if !ledger.contains(r) {
                return Err(StochasticError::RadiusNotInLedger(r));
            }
        }
        Ok(DBallUnion { balls })
    }

    /// Unchecked constructor for panels whose radii come from elsewhere
    /// (explicit configs, unit tests).
    pub fn from_balls(balls: Vec<(Point, f64)>) -> Result<Self, StochasticError> {
        if balls.is_empty() {
            return Err(StochasticError::BadPanel("union needs at least one ball".into()));
        }
        Ok(DBallUnion { balls })
    }

    pub fn balls(&self) -> &[(Point, f64)] {
        &self.balls
    }

    pub fn realize(&self, grid: &GridSpec) -> ClosedSet<GridSpec> {
        let mut out = ClosedSet::empty(grid);
        for &(c, r) in &self.balls {
            out = out.union(&closed_ball(grid, c, r));
        }
        out
    }

    pub fn describe(&self, grid: &GridSpec) -> String {
        let parts: Vec<String> = self
            .balls
            .iter()
            .map(|&(c, r)| format!("B({:?},{r})", grid.coords_of(c)))
            .collect();
        parts.join("+")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperspace::hits;
    use crate::stochastic::SetSampler;

    struct Atom {
        grid: GridSpec,
        at: f64,
    }

    impl SetSampler for Atom {
        fn id(&self) -> &str {
            "atom"
        }
        fn grid(&self) -> &GridSpec {
            &self.grid
        }
        fn draw(&self, _stream: u64, _replicate: u64) -> ClosedSet<GridSpec> {
            ClosedSet::from_points(&self.grid, [self.grid.nearest(&[self.at])]).unwrap()
        }
        fn analytic_capacity(&self, b: &ClosedSet<GridSpec>) -> Option<f64> {
            let draw = ClosedSet::from_points(&self.grid, [self.grid.nearest(&[self.at])]).unwrap();
            Some(hits(&draw, b) as u64 as f64)
        }
    }

    fn grid() -> GridSpec {
        GridSpec::line(-1.0, 1.0, 0.01, -1.0, 1.0, 0.5).unwrap()
    }

    #[test]
    fn step_function_screen_rejects_the_jump() {
        let g = grid();
        let s = Atom { grid: g, at: 0.5 };
        let center = g.nearest(&[0.0]);
        // analytic oracle path
        let kept = detect_continuity_radii(&s, center, &[0.3, 0.5, 0.7], 0.05, 100, 7, 0.02, true);
        assert_eq!(kept, vec![0.3, 0.7]);
        // Monte Carlo path agrees: the sampler is deterministic, so the
        // estimates are exact and the allowance is zero
        let kept_mc =
            detect_continuity_radii(&s, center, &[0.3, 0.5, 0.7], 0.05, 2000, 7, 0.02, false);
        assert_eq!(kept_mc, vec![0.3, 0.7]);
    }

    #[test]
    fn vacuous_threshold_accepts_everything() {
        let g = grid();
        let s = Atom { grid: g, at: 0.5 };
        let kept =
            detect_continuity_radii(&s, g.nearest(&[0.0]), &[0.3, 0.5, 0.7], 0.05, 50, 7, 1.0, true);
        assert_eq!(kept, vec![0.3, 0.5, 0.7]);
    }

    #[test]
    fn build_d_candidate_arithmetic_and_screen() {
        let g = grid();
        let s = Atom { grid: g, at: 0.5 };
        let screen = ScreenConfig {
            centers: vec![g.nearest(&[0.0])],
            delta: 0.04,
            kappa: 0.02,
            n_samples: 100,
            use_analytic: true,
        };
        let ledger = build_d(&s, &[0.5], &[0.25, 0.125, 0.005], &screen, 3).unwrap();
        // candidates are {0.75, 0.625, 0.505, 0.25, 0.375, 0.495}; the
        // screen at center 0 rejects those within delta of the atom at 0.5
        for r in [0.25, 0.375, 0.625, 0.75] {
            assert!(ledger.contains(r), "expected {r} accepted");
        }
        for r in [0.495, 0.505] {
            assert!(!ledger.contains(r), "expected {r} rejected");
        }
        assert_eq!(ledger.base_radii, vec![0.5]);
    }

    #[test]
    fn build_d_validates_offsets() {
        let g = grid();
        let s = Atom { grid: g, at: 0.5 };
        let screen = ScreenConfig {
            centers: vec![g.nearest(&[0.0])],
            delta: 0.04,
            kappa: 0.02,
            n_samples: 10,
            use_analytic: true,
        };
        for bad in [vec![0.1, 0.2], vec![-0.1, -0.2], vec![0.5, 0.25]] {
            assert_eq!(
                build_d(&s, &[0.5], &bad, &screen, 3).unwrap_err(),
                StochasticError::BadOffsets
            );
        }
    }

    #[test]
    fn union_respects_ledger_and_realizes() {
        let g = grid();
        let ledger = RadiusLedger {
            base_radii: vec![0.5],
            offsets: vec![0.005],
            accepted: vec![0.25, 0.495],
        };
        let c = g.nearest(&[0.0]);
        assert!(DBallUnion::new(vec![(c, 0.3)], &ledger).is_err());
        let u = DBallUnion::new(vec![(c, 0.25), (g.nearest(&[0.75]), 0.25)], &ledger);
        assert!(u.is_ok());
        let set = u.unwrap().realize(&g);
        assert!(set.contains(g.nearest(&[0.1])));
        assert!(set.contains(g.nearest(&[0.8])));
        assert!(!set.contains(g.nearest(&[0.4])));
    }
}
