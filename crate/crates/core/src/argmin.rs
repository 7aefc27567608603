//! eps-optimal solution sets of grid functions, deterministic selection
//! rules, and the sequential inclusion check for solution sets of an
//! epigraph-convergent function sequence.

use crate::carrier::{Carrier, GridSpec, Point};
use crate::hyperspace::{upper_fell_converges, ClosedSet, Excess, HyperspaceError};
use crate::lsc::{epi_converges, global_inf, LscFunction};
use crate::report::Verdict;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ArgminError {
    #[error("function sequence has length {0} but eps sequence has length {1}")]
    LengthMismatch(usize, usize),
    #[error(transparent)]
    Hyperspace(#[from] HyperspaceError),
}

/// Points whose value lies within `eps` of the global infimum.
///
/// Degenerate branches: if the infimum is `+inf` (the function is `+inf`
/// everywhere) the whole window qualifies; if it is `-inf` exactly the
/// points with value `-inf` qualify.
pub fn eps_argmin(f: &LscFunction, eps: f64) -> ClosedSet<GridSpec> {
    assert!(eps >= 0.0, "eps_argmin needs eps >= 0");
    let grid = f.grid();
    let inf = global_inf(f);
    if inf.is_pos_inf() {
        return ClosedSet::full(grid);
    }
    let keep: Vec<u32> = if inf.is_neg_inf() {
        (0..grid.len() as u32)
            .filter(|&id| f.value_id(id).is_neg_inf())
            .collect()
    } else {
        let threshold = inf.offset(eps);
        (0..grid.len() as u32)
            .filter(|&id| f.value_id(id) <= threshold)
            .collect()
    };
    ClosedSet::from_sorted_ids(grid, keep)
}

/// The set of all minimizing points, `eps_argmin(f, 0)`.
pub fn argmin(f: &LscFunction) -> ClosedSet<GridSpec> {
    eps_argmin(f, 0.0)
}

/// Deterministic rule for picking a single solution out of the solution set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionRule {
    /// Coordinate-wise smallest member.
    LexicographicMin,
    /// Uniform over members, deterministic per seed.
    RandomUniform,
}

/// A member of `eps_argmin(f, eps)` chosen by `rule`. The solution set on a
/// finite window is never empty, so this is total.
pub fn select(f: &LscFunction, eps: f64, rule: SelectionRule, seed: u64) -> Point {
    let set = eps_argmin(f, eps);
    select_from(&set, rule, seed)
}

/// Selection from an already-computed solution set.
pub fn select_from(set: &ClosedSet<GridSpec>, rule: SelectionRule, seed: u64) -> Point {
    assert!(!set.is_empty(), "selection from an empty solution set");
    let ids = set.ids();
    let id = match rule {
        SelectionRule::LexicographicMin => ids[0],
        SelectionRule::RandomUniform => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            ids[rng.random_range(0..ids.len())]
        }
    };
    set.carrier().point(id)
}

/// Hypothesis diagnostics of [`check_pk_inclusion`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PkHypothesis {
    /// max of the eps sequence over the tail window
    pub eps_tail_max: f64,
    /// the bound it is held against, `eps + tol`
    pub eps_bound: f64,
    pub eps_ok: bool,
    pub epi_checked: bool,
    pub epi_converged: bool,
    pub epi_outer_excess: Option<Excess>,
    pub epi_inner_excess: Option<Excess>,
}

/// Verdict of the solution-set inclusion check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PkInclusionReport {
    pub verdict: Verdict,
    pub tol: f64,
    /// excess of the outer limit of the solution sets over the limit
    /// solution set; absent when the hypotheses failed
    pub excess: Option<Excess>,
    /// coordinates of the worst offending point on failure
    pub witness: Option<Vec<f64>>,
    pub hypothesis: PkHypothesis,
}

impl PkInclusionReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Checks that the solution sets of an epigraph-convergent sequence stay
/// inside the limit solution set, in the outer-limit sense.
///
/// Hypotheses, both reported: the eps sequence must satisfy
/// `max over the tail <= eps + tol`, and the function sequence must pass
/// the epigraph convergence check at the same tolerance. A hypothesis
/// violation yields the distinct `HypothesisNotMet` verdict rather than a
/// failure.
pub fn check_pk_inclusion(
    f_seq: &[LscFunction],
    eps_seq: &[f64],
    f: &LscFunction,
    eps: f64,
    tail_start: usize,
    tol: f64,
) -> Result<PkInclusionReport, ArgminError> {
    if f_seq.len() != eps_seq.len() {
        return Err(ArgminError::LengthMismatch(f_seq.len(), eps_seq.len()));
    }
    if f_seq.is_empty() {
        return Err(HyperspaceError::EmptySequence.into());
    }
    if tail_start >= f_seq.len() {
        return Err(HyperspaceError::TailOutOfRange {
            tail_start,
            len: f_seq.len(),
        }
        .into());
    }
    assert!(eps >= 0.0 && eps_seq.iter().all(|&e| e >= 0.0));

    let eps_tail_max = eps_seq[tail_start..]
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let eps_bound = eps + tol;
    let eps_ok = eps_tail_max <= eps_bound;

    if !eps_ok {
        return Ok(PkInclusionReport {
            verdict: Verdict::HypothesisNotMet,
            tol,
            excess: None,
            witness: None,
            hypothesis: PkHypothesis {
                eps_tail_max,
                eps_bound,
                eps_ok,
                epi_checked: false,
                epi_converged: false,
                epi_outer_excess: None,
                epi_inner_excess: None,
            },
        });
    }

    let epi = epi_converges(f_seq, f, tail_start, tol)?;
    // The hypothesis judgment allows one lattice level of epigraph
    // mismatch on top of tol: a value sitting ulps beyond an ordinate
    // level moves an epigraph floor by a whole level, which the
    // solution-set conclusion cannot see. The half-step midpoint keeps the
    // comparison away from equal floats.
    let resolution = f.grid().spacing().max(f.grid().ordinate_spacing());
    let slack = tol + 1.5 * resolution;
    let epi_converged = epi.outer_excess.within(slack) && epi.inner_excess.within(slack);
    let hypothesis = PkHypothesis {
        eps_tail_max,
        eps_bound,
        eps_ok,
        epi_checked: true,
        epi_converged,
        epi_outer_excess: Some(epi.outer_excess),
        epi_inner_excess: Some(epi.inner_excess),
    };
    if !epi_converged {
        return Ok(PkInclusionReport {
            verdict: Verdict::HypothesisNotMet,
            tol,
            excess: None,
            witness: None,
            hypothesis,
        });
    }

    let sets: Vec<_> = f_seq
        .iter()
        .zip(eps_seq)
        .map(|(fn_, &e)| eps_argmin(fn_, e))
        .collect();
    let target = eps_argmin(f, eps);
    let upper = upper_fell_converges(&sets, &target, tail_start, tol)?;
    Ok(PkInclusionReport {
        verdict: if upper.converged {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
        tol,
        excess: Some(upper.excess),
        witness: upper.witness.map(|p| f.grid().coords_of(p)),
        hypothesis,
    })
}
