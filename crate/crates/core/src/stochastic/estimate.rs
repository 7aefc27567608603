//! Monte Carlo estimation of hitting probabilities and joint hit/miss
//! events, plus the inclusion-exclusion expansion of a union-hit
//! probability from its joint estimates.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::hyperspace::{hits, ClosedSet};
use crate::carrier::GridSpec;
use crate::report::CapacityEstimate;
use crate::stochastic::{SetSampler, StochasticError};

/// One component of a joint event: hit the set, or miss it when `miss`.
pub struct JointEvent<'a> {
    pub set: &'a ClosedSet<GridSpec>,
    pub miss: bool,
}

/// Fraction of replicates whose draw hits `b`.
pub fn estimate_capacity(
    sampler: &dyn SetSampler,
    b: &ClosedSet<GridSpec>,
    n_samples: u64,
    stream: u64,
) -> CapacityEstimate {
    estimate_joint(
        sampler,
        &[JointEvent { set: b, miss: false }],
        n_samples,
        stream,
    )
}

/// Fraction of replicates hitting every set in `bs` simultaneously.
pub fn estimate_joint_hit(
    sampler: &dyn SetSampler,
    bs: &[&ClosedSet<GridSpec>],
    n_samples: u64,
    stream: u64,
) -> CapacityEstimate {
    let events: Vec<JointEvent> = bs.iter().map(|set| JointEvent { set, miss: false }).collect();
    estimate_joint(sampler, &events, n_samples, stream)
}

/// Fraction of replicates realizing every component of the joint event.
/// Replicates are independent; evaluation may run in parallel and the
/// count is order-independent.
pub fn estimate_joint(
    sampler: &dyn SetSampler,
    events: &[JointEvent],
    n_samples: u64,
    stream: u64,
) -> CapacityEstimate {
    assert!(n_samples >= 1, "need at least one replicate");
    assert!(!events.is_empty(), "need at least one event");
    let count: u64 = (0..n_samples)
        .into_par_iter()
        .map(|rep| {
            let draw = sampler.draw(stream, rep);
            let ok = events
                .iter()
                .all(|ev| hits(&draw, ev.set) != ev.miss);
            ok as u64
        })
        .sum();
    CapacityEstimate::from_counts(count, n_samples)
}

/// Hitting indicators of a single draw against many sets at once; the
/// workhorse behind the testers' per-index series.
pub(crate) fn count_many(
    sampler: &dyn SetSampler,
    sets: &[ClosedSet<GridSpec>],
    n_samples: u64,
    stream: u64,
) -> Vec<u64> {
    assert!(n_samples >= 1);
    (0..n_samples)
        .into_par_iter()
        .fold(
            || vec![0u64; sets.len()],
            |mut acc, rep| {
                let draw = sampler.draw(stream, rep);
                for (slot, set) in acc.iter_mut().zip(sets) {
                    *slot += hits(&draw, set) as u64;
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; sets.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        )
}

/// Union-hit probability from joint probabilities of all nonempty subsets.
///
/// `joint` maps a bitmask over `0..m` to the probability of hitting every
/// set in the masked subset; all `2^m - 1` nonempty masks must be present.
pub fn inclusion_exclusion_union(
    m: usize,
    joint: &BTreeMap<u32, f64>,
) -> Result<f64, StochasticError> {
    assert!((1..31).contains(&m));
    let mut total = 0.0;
    for mask in 1u32..(1 << m) {
        let p = *joint
            .get(&mask)
            .ok_or(StochasticError::MissingJointEntry(mask))?;
        let sign = if mask.count_ones() % 2 == 1 { 1.0 } else { -1.0 };
        total += sign * p;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::carrier::GridSpec;
    use crate::hyperspace::closed_ball;
    use crate::stochastic::substream::replicate_rng;
    use rand::Rng;

    struct FixedPoint {
        grid: GridSpec,
        at: f64,
    }

    impl SetSampler for FixedPoint {
        fn id(&self) -> &str {
            "fixed-point"
        }
        fn grid(&self) -> &GridSpec {
            &self.grid
        }
        fn draw(&self, _stream: u64, _replicate: u64) -> ClosedSet<GridSpec> {
            ClosedSet::from_points(&self.grid, [self.grid.nearest(&[self.at])]).unwrap()
        }
    }

    struct CoinPoint {
        grid: GridSpec,
    }

    impl SetSampler for CoinPoint {
        fn id(&self) -> &str {
            "coin-point"
        }
        fn grid(&self) -> &GridSpec {
            &self.grid
        }
        fn draw(&self, stream: u64, replicate: u64) -> ClosedSet<GridSpec> {
            let mut rng = replicate_rng(stream, replicate);
            let x = if rng.random::<bool>() { -1.0 } else { 1.0 };
            ClosedSet::from_points(&self.grid, [self.grid.nearest(&[x])]).unwrap()
        }
    }

    fn grid() -> GridSpec {
        GridSpec::line(-1.0, 1.0, 0.5, -1.0, 1.0, 0.5).unwrap()
    }

    #[test]
    fn deterministic_sampler_hits_exactly() {
        let g = grid();
        let s = FixedPoint { grid: g, at: 0.0 };
        let ball = closed_ball(&g, g.nearest(&[0.0]), 0.5);
        let est = estimate_capacity(&s, &ball, 500, 3);
        assert_eq!(est.value, 1.0);
        assert_eq!(est.std_error, 0.0);
        let empty = ClosedSet::empty(&g);
        assert_eq!(estimate_capacity(&s, &empty, 100, 3).value, 0.0);
    }

    #[test]
    fn joint_hit_reduces_and_disjoint_targets_vanish() {
        let g = grid();
        let s = FixedPoint { grid: g, at: 0.0 };
        let b = closed_ball(&g, g.nearest(&[0.0]), 0.5);
        let single = estimate_capacity(&s, &b, 200, 1);
        let joint = estimate_joint_hit(&s, &[&b], 200, 1);
        assert_eq!(single, joint);

        let coin = CoinPoint { grid: g };
        let left = closed_ball(&g, g.nearest(&[-1.0]), 0.25);
        let right = closed_ball(&g, g.nearest(&[1.0]), 0.25);
        let both = estimate_joint_hit(&coin, &[&left, &right], 400, 9);
        assert_eq!(both.value, 0.0, "a singleton cannot hit two disjoint balls");
    }

    #[test]
    fn joint_miss_flag_inverts() {
        let g = grid();
        let coin = CoinPoint { grid: g };
        let left = closed_ball(&g, g.nearest(&[-1.0]), 0.25);
        let hit = estimate_joint(
            &coin,
            &[JointEvent { set: &left, miss: false }],
            2000,
            4,
        );
        let miss = estimate_joint(
            &coin,
            &[JointEvent { set: &left, miss: true }],
            2000,
            4,
        );
        assert_eq!(hit.value + miss.value, 1.0, "same stream complements exactly");
    }

    #[test]
    fn estimates_are_deterministic_across_runs() {
        let g = grid();
        let coin = CoinPoint { grid: g };
        let left = closed_ball(&g, g.nearest(&[-1.0]), 0.25);
        let a = estimate_capacity(&coin, &left, 5000, 42);
        let b = estimate_capacity(&coin, &left, 5000, 42);
        assert_eq!(a, b);
    }

    #[test]
    fn monotone_capacity_on_same_stream() {
        let g = GridSpec::line(-1.0, 1.0, 0.1, -1.0, 1.0, 0.5).unwrap();
        let coin = CoinPoint { grid: g };
        let small = closed_ball(&g, g.nearest(&[-1.0]), 0.2);
        let big = closed_ball(&g, g.nearest(&[-1.0]), 0.8);
        let ps = estimate_capacity(&coin, &small, 3000, 5);
        let pb = estimate_capacity(&coin, &big, 3000, 5);
        assert!(ps.value <= pb.value);
    }

    #[test]
    fn inclusion_exclusion_small_cases() {
        let mut joint = BTreeMap::new();
        joint.insert(0b01u32, 0.5);
        joint.insert(0b10u32, 0.5);
        joint.insert(0b11u32, 0.25);
        assert_eq!(inclusion_exclusion_union(2, &joint).unwrap(), 0.75);

        let mut single = BTreeMap::new();
        single.insert(0b1u32, 0.4);
        assert_eq!(inclusion_exclusion_union(1, &single).unwrap(), 0.4);

        joint.remove(&0b10u32);
        assert_eq!(
            inclusion_exclusion_union(2, &joint).unwrap_err(),
            StochasticError::MissingJointEntry(0b10)
        );
    }
}
