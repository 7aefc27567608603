//! Statistical convergence testers.
//!
//! Every tester estimates event probabilities per sequence index and
//! compares the tail of the series against the limit estimate. The tail
//! window is the second half of the sequence. Two-sided testers check
//! `|p_n - p| <= tol + 3 (se_n + se)` on every tail index; one-sided
//! testers check the signed overshoot the same way, matching the direction
//! of the claim they verify. Reported discrepancies are net of the
//! three-sigma allowance, so `pass iff max_tail_discrepancy <= threshold`
//! holds literally.

use rayon::prelude::*;

use crate::argmin::{eps_argmin, select_from, SelectionRule};
use crate::carrier::{Carrier, GridSpec, Point};
use crate::hyperspace::{closed_ball, hits, open_ball, ClosedSet};
use crate::lsc::{ExtReal, LscFunction};
use crate::report::{CapacityEstimate, IndexEstimate, NamedStat, PanelReport, TestReport, Verdict};
use crate::stochastic::estimate::count_many;
use crate::stochastic::ledger::DBallUnion;
use crate::stochastic::substream::{index_stream, mix};
use crate::stochastic::{IntegrandSampler, SetSampler, StochasticError};

const SALT_LIMIT: u64 = 1;
const SALT_SCREEN: u64 = 2;
const SALT_SELECT: u64 = 3;
const SALT_TIGHT: u64 = 4;

/// Tail window convention: the second half of the sequence.
pub fn tail_start(len: usize) -> usize {
    len / 2
}

/// One infimum event of the epigraph-distribution panel: the infimum of
/// the integrand over the closed ball `B(x, r)` compared against `r + alpha`.
#[derive(Clone, Debug)]
pub struct EpiEvent {
    pub x: Point,
    pub r: f64,
    pub alpha: f64,
}

/// A joint tuple of infimum events, estimated as one probability.
#[derive(Clone, Debug)]
pub struct EpiPanelTuple {
    pub events: Vec<EpiEvent>,
}

/// Direction of the infimum comparison: at-or-below the threshold, or
/// strictly above it. Complementary for single-event tuples.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EpiMode {
    Le,
    Gt,
}

struct PanelSeries {
    panel_id: String,
    limit: CapacityEstimate,
    series: Vec<CapacityEstimate>,
    stats: Vec<NamedStat>,
}

/// Assembles the shared report shape from limit estimates and per-index
/// series. `one_sided` keeps the sign of `p_n - p`, for limsup-style
/// claims; otherwise the absolute gap is used.
#[allow(clippy::too_many_arguments)]
fn assemble(
    tester: &str,
    one_sided: bool,
    panels: Vec<PanelSeries>,
    seq_len: usize,
    tol: f64,
    seed: u64,
    n_samples: u64,
    diagnostics: Vec<String>,
) -> TestReport {
    let tail = tail_start(seq_len);
    let mut reports = Vec::with_capacity(panels.len());
    let mut all_pass = true;
    for p in panels {
        let mut max_net = f64::NEG_INFINITY;
        for est in p.series.iter().skip(tail) {
            let diff = est.value - p.limit.value;
            let disc = if one_sided { diff } else { diff.abs() };
            let net = disc - 3.0 * (est.std_error + p.limit.std_error);
            if net > max_net {
                max_net = net;
            }
        }
        // panels without a series (summary panels) report a zero gap and
        // get their pass criterion overwritten by the caller
        if !max_net.is_finite() {
            max_net = 0.0;
        }
        let pass = max_net <= tol;
        all_pass &= pass;
        reports.push(PanelReport {
            panel_id: p.panel_id,
            limit: p.limit,
            series: p
                .series
                .iter()
                .enumerate()
                .map(|(index, &estimate)| IndexEstimate { index, estimate })
                .collect(),
            max_tail_discrepancy: max_net,
            threshold: tol,
            pass,
            stats: p.stats,
        });
    }
    TestReport {
        tester: tester.to_string(),
        verdict: if all_pass { Verdict::Pass } else { Verdict::Fail },
        seed,
        n_samples,
        tol,
        tail_start: tail,
        sequence_len: seq_len,
        panels: reports,
        diagnostics,
    }
}

fn check_set_sequence(
    seq: &[Box<dyn SetSampler>],
    limit: &dyn SetSampler,
) -> Result<(), StochasticError> {
    if seq.is_empty() {
        return Err(StochasticError::EmptySequence);
    }
    if seq.iter().any(|s| s.grid() != limit.grid()) {
        return Err(StochasticError::GridMismatch);
    }
    Ok(())
}

fn check_integrand_sequence(
    seq: &[Box<dyn IntegrandSampler>],
    limit: &dyn IntegrandSampler,
) -> Result<(), StochasticError> {
    if seq.is_empty() {
        return Err(StochasticError::EmptySequence);
    }
    if seq.iter().any(|s| s.grid() != limit.grid()) {
        return Err(StochasticError::GridMismatch);
    }
    Ok(())
}

/// Distributional set convergence over a hit panel of closed-ball unions:
/// the tail hitting probabilities of the sequence must match the limit's
/// on every panel element, two-sided.
///
/// Panel radii are expected to come from a ledger built against the limit
/// law, so that each realized union is a continuity set of that law.
pub fn test_rcs_convergence(
    seq: &[Box<dyn SetSampler>],
    limit: &dyn SetSampler,
    panel: &[DBallUnion],
    n_samples: u64,
    seed: u64,
    tol: f64,
) -> Result<TestReport, StochasticError> {
    check_set_sequence(seq, limit)?;
    if panel.is_empty() {
        return Err(StochasticError::BadPanel("empty hit panel".into()));
    }
    let grid = limit.grid();
    let realized: Vec<ClosedSet<GridSpec>> = panel.iter().map(|u| u.realize(grid)).collect();
    let limit_counts = count_many(limit, &realized, n_samples, mix(seed, SALT_LIMIT));
    let per_index: Vec<Vec<u64>> = (0..seq.len())
        .map(|i| count_many(seq[i].as_ref(), &realized, n_samples, index_stream(seed, i)))
        .collect();
    let panels = panel
        .iter()
        .enumerate()
        .map(|(j, u)| PanelSeries {
            panel_id: u.describe(grid),
            limit: CapacityEstimate::from_counts(limit_counts[j], n_samples),
            series: per_index
                .iter()
                .map(|c| CapacityEstimate::from_counts(c[j], n_samples))
                .collect(),
            stats: vec![],
        })
        .collect();
    Ok(assemble(
        "rcs-convergence",
        false,
        panels,
        seq.len(),
        tol,
        seed,
        n_samples,
        vec![],
    ))
}

fn inf_ids(f: &LscFunction, ids: &[u32]) -> ExtReal {
    ids.iter()
        .map(|&id| f.value_id(id))
        .min()
        .unwrap_or(ExtReal::POS_INF)
}

/// Outcome of screening one infimum event against the limit law: the
/// closed-ball and open-ball event probabilities must agree.
#[derive(Clone, Debug)]
pub struct ScreenOutcome {
    pub p_closed: f64,
    pub p_open: f64,
    pub pooled_se: f64,
    pub ok: bool,
}

/// Continuity screen for an infimum event: estimates
/// `P(inf over closed ball <= r + alpha)` and
/// `P(inf over open ball < r + alpha)` under the limit law and accepts the
/// event when they differ by at most `kappa` plus six pooled sigma.
pub fn epi_continuity_screen(
    limit: &dyn IntegrandSampler,
    event: &EpiEvent,
    kappa: f64,
    n_samples: u64,
    stream: u64,
) -> ScreenOutcome {
    let grid = limit.grid();
    let closed = closed_ball(grid, event.x, event.r);
    let open = open_ball(grid, event.x, event.r);
    let threshold = ExtReal::new(event.r + event.alpha);
    let (c_hits, o_hits) = (0..n_samples)
        .into_par_iter()
        .map(|rep| {
            let f = limit.draw(stream, rep);
            let c = inf_ids(&f, closed.ids()) <= threshold;
            let o = inf_ids(&f, open.ids()) < threshold;
            (c as u64, o as u64)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let pc = CapacityEstimate::from_counts(c_hits, n_samples);
    let po = CapacityEstimate::from_counts(o_hits, n_samples);
    let pooled = (pc.std_error * pc.std_error + po.std_error * po.std_error).sqrt();
    ScreenOutcome {
        p_closed: pc.value,
        p_open: po.value,
        pooled_se: pooled,
        ok: (pc.value - po.value).abs() <= kappa + 6.0 * pooled,
    }
}

/// Epigraph convergence in distribution over a panel of joint infimum
/// events.
///
/// Panel tuples failing the continuity screen against the limit law are
/// excluded and reported. The screen also justifies estimating both sides
/// with closed-ball events: when it passes, the closed and open variants
/// agree under the limit law up to the allowance.
#[allow(clippy::too_many_arguments)]
pub fn test_epi_convergence_dist(
    seq: &[Box<dyn IntegrandSampler>],
    limit: &dyn IntegrandSampler,
    panel: &[EpiPanelTuple],
    n_samples: u64,
    seed: u64,
    tol: f64,
    mode: EpiMode,
    screen_kappa: f64,
) -> Result<TestReport, StochasticError> {
    check_integrand_sequence(seq, limit)?;
    if panel.is_empty() || panel.iter().any(|t| t.events.is_empty()) {
        return Err(StochasticError::BadPanel("empty event tuple".into()));
    }
    let grid = limit.grid();

    let mut diagnostics = Vec::new();
    let mut keep: Vec<usize> = Vec::new();
    for (j, tuple) in panel.iter().enumerate() {
        let mut ok = true;
        for (e_idx, ev) in tuple.events.iter().enumerate() {
            let outcome = epi_continuity_screen(
                limit,
                ev,
                screen_kappa,
                n_samples,
                mix(mix(seed, SALT_SCREEN), (j * 97 + e_idx) as u64),
            );
            if !outcome.ok {
                ok = false;
                diagnostics.push(format!(
                    "panel {j} event {e_idx} excluded by continuity screen: closed={:.6} open={:.6}",
                    outcome.p_closed, outcome.p_open
                ));
            }
        }
        if ok {
            keep.push(j);
        }
    }
    if keep.is_empty() {
        return Ok(TestReport {
            tester: "epi-dist".into(),
            verdict: Verdict::HypothesisNotMet,
            seed,
            n_samples,
            tol,
            tail_start: tail_start(seq.len()),
            sequence_len: seq.len(),
            panels: vec![],
            diagnostics,
        });
    }

    // precompute ball ids and thresholds per surviving tuple
    struct Prepared {
        panel_id: String,
        events: Vec<(Vec<u32>, ExtReal)>,
    }
    let prepared: Vec<Prepared> = keep
        .iter()
        .map(|&j| {
            let tuple = &panel[j];
            let events = tuple
                .events
                .iter()
                .map(|ev| {
                    (
                        closed_ball(grid, ev.x, ev.r).ids().to_vec(),
                        ExtReal::new(ev.r + ev.alpha),
                    )
                })
                .collect();
            let descr: Vec<String> = tuple
                .events
                .iter()
                .map(|ev| {
                    format!(
                        "inf[B({:?},{})]{}{:.4}",
                        grid.coords_of(ev.x),
                        ev.r,
                        if mode == EpiMode::Le { "<=" } else { ">" },
                        ev.r + ev.alpha
                    )
                })
                .collect();
            Prepared {
                panel_id: descr.join(" & "),
                events,
            }
        })
        .collect();

    let count_events = |s: &dyn IntegrandSampler, stream: u64| -> Vec<u64> {
        (0..n_samples)
            .into_par_iter()
            .fold(
                || vec![0u64; prepared.len()],
                |mut acc, rep| {
                    let f = s.draw(stream, rep);
                    for (slot, p) in acc.iter_mut().zip(&prepared) {
                        let all = p.events.iter().all(|(ids, thr)| {
                            let inf = inf_ids(&f, ids);
                            match mode {
                                EpiMode::Le => inf <= *thr,
                                EpiMode::Gt => inf > *thr,
                            }
                        });
                        *slot += all as u64;
                    }
                    acc
                },
            )
            .reduce(
                || vec![0u64; prepared.len()],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                    a
                },
            )
    };

    let limit_counts = count_events(limit, mix(seed, SALT_LIMIT));
    let per_index: Vec<Vec<u64>> = (0..seq.len())
        .map(|i| count_events(seq[i].as_ref(), index_stream(seed, i)))
        .collect();

    let panels = prepared
        .iter()
        .enumerate()
        .map(|(j, p)| PanelSeries {
            panel_id: p.panel_id.clone(),
            limit: CapacityEstimate::from_counts(limit_counts[j], n_samples),
            series: per_index
                .iter()
                .map(|c| CapacityEstimate::from_counts(c[j], n_samples))
                .collect(),
            stats: vec![],
        })
        .collect();
    Ok(assemble(
        "epi-dist",
        false,
        panels,
        seq.len(),
        tol,
        seed,
        n_samples,
        diagnostics,
    ))
}

fn count_argmin_joint(
    s: &dyn IntegrandSampler,
    eps: f64,
    collections: &[Vec<ClosedSet<GridSpec>>],
    n_samples: u64,
    stream: u64,
) -> Vec<u64> {
    (0..n_samples)
        .into_par_iter()
        .fold(
            || vec![0u64; collections.len()],
            |mut acc, rep| {
                let a = eps_argmin(&s.draw(stream, rep), eps);
                for (slot, collection) in acc.iter_mut().zip(collections) {
                    *slot += collection.iter().all(|k| hits(&a, k)) as u64;
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; collections.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        )
}

/// One-sided solution-set convergence: for every collection of compacts,
/// the tail probability of the solution set hitting all of them must not
/// exceed the limit probability beyond `tol` plus the sampling allowance.
///
/// The epigraph-convergence hypothesis is established separately, either by
/// [`test_epi_convergence_dist`] or by scenario metadata.
#[allow(clippy::too_many_arguments)]
pub fn test_argmin_upper_fell(
    seq: &[Box<dyn IntegrandSampler>],
    eps_seq: &[f64],
    limit: &dyn IntegrandSampler,
    eps: f64,
    k_panel: &[Vec<ClosedSet<GridSpec>>],
    n_samples: u64,
    seed: u64,
    tol: f64,
) -> Result<TestReport, StochasticError> {
    check_integrand_sequence(seq, limit)?;
    if eps_seq.len() != seq.len() {
        return Err(StochasticError::BadPanel(format!(
            "eps sequence length {} does not match sequence length {}",
            eps_seq.len(),
            seq.len()
        )));
    }
    if k_panel.is_empty() || k_panel.iter().any(|c| c.is_empty()) {
        return Err(StochasticError::BadPanel("empty compact collection".into()));
    }
    let grid = limit.grid();
    if k_panel
        .iter()
        .flatten()
        .any(|k| k.carrier() != grid)
    {
        return Err(StochasticError::GridMismatch);
    }
    let limit_counts = count_argmin_joint(limit, eps, k_panel, n_samples, mix(seed, SALT_LIMIT));
    let per_index: Vec<Vec<u64>> = (0..seq.len())
        .map(|i| count_argmin_joint(seq[i].as_ref(), eps_seq[i], k_panel, n_samples, index_stream(seed, i)))
        .collect();
    let panels = k_panel
        .iter()
        .enumerate()
        .map(|(j, collection)| PanelSeries {
            panel_id: format!("compacts[{j}]x{}", collection.len()),
            limit: CapacityEstimate::from_counts(limit_counts[j], n_samples),
            series: per_index
                .iter()
                .map(|c| CapacityEstimate::from_counts(c[j], n_samples))
                .collect(),
            stats: vec![],
        })
        .collect();
    Ok(assemble(
        "argmin-upper-fell",
        true,
        panels,
        seq.len(),
        tol,
        seed,
        n_samples,
        vec![],
    ))
}

/// Tightness of the solution sets: the tail probability of
/// `{} != A subset K` must stay above `1 - eta` minus the allowance.
pub fn test_tightness(
    seq: &[Box<dyn IntegrandSampler>],
    eps_seq: &[f64],
    k: &ClosedSet<GridSpec>,
    n_samples: u64,
    seed: u64,
    eta: f64,
) -> Result<TestReport, StochasticError> {
    if seq.is_empty() {
        return Err(StochasticError::EmptySequence);
    }
    if eps_seq.len() != seq.len() {
        return Err(StochasticError::BadPanel(format!(
            "eps sequence length {} does not match sequence length {}",
            eps_seq.len(),
            seq.len()
        )));
    }
    if seq.iter().any(|s| s.grid() != k.carrier()) {
        return Err(StochasticError::GridMismatch);
    }
    let series: Vec<CapacityEstimate> = (0..seq.len())
        .map(|i| {
            let stream = mix(index_stream(seed, i), SALT_TIGHT);
            let count: u64 = (0..n_samples)
                .into_par_iter()
                .map(|rep| {
                    let a = eps_argmin(&seq[i].draw(stream, rep), eps_seq[i]);
                    (!a.is_empty() && a.is_subset_of(k)) as u64
                })
                .sum();
            CapacityEstimate::from_counts(count, n_samples)
        })
        .collect();
    let tail = tail_start(seq.len());
    // shortfall below the 1 - eta floor, net of three sigma
    let mut max_short = f64::NEG_INFINITY;
    for est in series.iter().skip(tail) {
        let short = (1.0 - eta - 3.0 * est.std_error) - est.value;
        if short > max_short {
            max_short = short;
        }
    }
    let pass = max_short <= 0.0;
    Ok(TestReport {
        tester: "tightness".into(),
        verdict: if pass { Verdict::Pass } else { Verdict::Fail },
        seed,
        n_samples,
        tol: eta,
        tail_start: tail,
        sequence_len: seq.len(),
        panels: vec![PanelReport {
            panel_id: "containment".into(),
            limit: CapacityEstimate::exact(1.0),
            series: series
                .iter()
                .enumerate()
                .map(|(index, &estimate)| IndexEstimate { index, estimate })
                .collect(),
            max_tail_discrepancy: max_short,
            threshold: 0.0,
            pass,
            stats: vec![],
        }],
        diagnostics: vec![],
    })
}

/// Two-sided solution-set convergence for limits with an almost surely
/// unique minimizer: tightness hypothesis, hit-panel convergence of the
/// solution sets, and (when the limit carries an analytic minimizer law) a
/// Kolmogorov-Smirnov comparison of the selected minimizer at the largest
/// index.
#[allow(clippy::too_many_arguments)]
pub fn test_argmin_fell(
    seq: &[Box<dyn IntegrandSampler>],
    eps_seq: &[f64],
    limit: &dyn IntegrandSampler,
    eps: f64,
    k_tight: &ClosedSet<GridSpec>,
    eta: f64,
    u_panel: &[DBallUnion],
    n_samples: u64,
    seed: u64,
    tol: f64,
) -> Result<TestReport, StochasticError> {
    check_integrand_sequence(seq, limit)?;
    if eps_seq.len() != seq.len() {
        return Err(StochasticError::BadPanel(format!(
            "eps sequence length {} does not match sequence length {}",
            eps_seq.len(),
            seq.len()
        )));
    }
    if u_panel.is_empty() {
        return Err(StochasticError::BadPanel("empty hit panel".into()));
    }
    let mut diagnostics = Vec::new();

    if !limit.unique_argmin() {
        diagnostics.push("limit law does not declare an a.s.-unique minimizer".into());
        return Ok(TestReport {
            tester: "argmin-fell".into(),
            verdict: Verdict::HypothesisNotMet,
            seed,
            n_samples,
            tol,
            tail_start: tail_start(seq.len()),
            sequence_len: seq.len(),
            panels: vec![],
            diagnostics,
        });
    }
    let tightness = test_tightness(seq, eps_seq, k_tight, n_samples, seed, eta)?;
    if tightness.verdict != Verdict::Pass {
        diagnostics.push(format!(
            "tightness hypothesis failed: shortfall {:.6}",
            tightness.panels[0].max_tail_discrepancy
        ));
        return Ok(TestReport {
            tester: "argmin-fell".into(),
            verdict: Verdict::HypothesisNotMet,
            seed,
            n_samples,
            tol,
            tail_start: tail_start(seq.len()),
            sequence_len: seq.len(),
            panels: tightness.panels,
            diagnostics,
        });
    }
    diagnostics.push("tightness hypothesis passed".into());

    // two-sided hit-panel convergence of the solution sets
    let grid = limit.grid();
    let realized: Vec<ClosedSet<GridSpec>> = u_panel.iter().map(|u| u.realize(grid)).collect();
    let collections: Vec<Vec<ClosedSet<GridSpec>>> =
        realized.iter().map(|s| vec![s.clone()]).collect();
    let limit_counts =
        count_argmin_joint(limit, eps, &collections, n_samples, mix(seed, SALT_LIMIT));
    let per_index: Vec<Vec<u64>> = (0..seq.len())
        .map(|i| {
            count_argmin_joint(
                seq[i].as_ref(),
                eps_seq[i],
                &collections,
                n_samples,
                index_stream(seed, i),
            )
        })
        .collect();
    let panels: Vec<PanelSeries> = u_panel
        .iter()
        .enumerate()
        .map(|(j, u)| PanelSeries {
            panel_id: u.describe(grid),
            limit: CapacityEstimate::from_counts(limit_counts[j], n_samples),
            series: per_index
                .iter()
                .map(|c| CapacityEstimate::from_counts(c[j], n_samples))
                .collect(),
            stats: vec![],
        })
        .collect();

    // law of the selected minimizer at the deepest index
    let mut ks_panel: Option<PanelReport> = None;
    if let Some(pmf) = limit.argmin_pmf() {
        let last = seq.len() - 1;
        let stream = mix(index_stream(seed, last), SALT_SELECT);
        let counts: Vec<u64> = (0..n_samples)
            .into_par_iter()
            .fold(
                || vec![0u64; grid.len()],
                |mut acc, rep| {
                    let a = eps_argmin(&seq[last].draw(stream, rep), eps_seq[last]);
                    let p = select_from(&a, SelectionRule::LexicographicMin, 0);
                    acc[grid.id_of(p) as usize] += 1;
                    acc
                },
            )
            .reduce(
                || vec![0u64; grid.len()],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                    a
                },
            );
        let mut ks: f64 = 0.0;
        let mut emp = 0.0;
        let mut theo = 0.0;
        for (c, p) in counts.iter().zip(&pmf) {
            emp += *c as f64 / n_samples as f64;
            theo += p;
            ks = ks.max((emp - theo).abs());
        }
        let pass = ks <= tol;
        ks_panel = Some(PanelReport {
            panel_id: "selected-minimizer-law".into(),
            limit: CapacityEstimate::exact(1.0),
            series: vec![],
            max_tail_discrepancy: ks,
            threshold: tol,
            pass,
            stats: vec![NamedStat {
                name: "ks_distance".into(),
                value: ks,
            }],
        });
    } else {
        diagnostics.push("limit law carries no analytic minimizer law; KS check skipped".into());
    }

    let mut report = assemble(
        "argmin-fell",
        false,
        panels,
        seq.len(),
        tol,
        seed,
        n_samples,
        diagnostics,
    );
    if let Some(ksp) = ks_panel {
        if !ksp.pass {
            report.verdict = Verdict::Fail;
        }
        report.panels.push(ksp);
    }
    Ok(report)
}

/// One-sided convergence of selected solutions against the limit capacity:
/// tail probabilities of the selection landing in each closed set must not
/// exceed the limit solution set's hitting probability of that set, beyond
/// `tol` plus the allowance. Also reports the full-window capacity, which
/// equals one exactly on a finite window.
#[allow(clippy::too_many_arguments)]
pub fn test_selection_portmanteau(
    seq: &[Box<dyn IntegrandSampler>],
    eps_seq: &[f64],
    rule: SelectionRule,
    limit: &dyn IntegrandSampler,
    eps: f64,
    f_panel: &[ClosedSet<GridSpec>],
    k_tight: &ClosedSet<GridSpec>,
    eta: f64,
    n_samples: u64,
    seed: u64,
    tol: f64,
) -> Result<TestReport, StochasticError> {
    check_integrand_sequence(seq, limit)?;
    if eps_seq.len() != seq.len() {
        return Err(StochasticError::BadPanel(format!(
            "eps sequence length {} does not match sequence length {}",
            eps_seq.len(),
            seq.len()
        )));
    }
    if f_panel.is_empty() {
        return Err(StochasticError::BadPanel("empty closed-set panel".into()));
    }
    let grid = limit.grid();
    if f_panel.iter().any(|f| f.carrier() != grid) || k_tight.carrier() != grid {
        return Err(StochasticError::GridMismatch);
    }
    let mut diagnostics = Vec::new();

    // selections per index: membership counts for each panel set plus the
    // tightness indicator of the selection itself
    let eval_index = |s: &dyn IntegrandSampler, e: f64, stream: u64| -> (Vec<u64>, u64) {
        (0..n_samples)
            .into_par_iter()
            .fold(
                || (vec![0u64; f_panel.len()], 0u64),
                |(mut acc, mut tight), rep| {
                    let a = eps_argmin(&s.draw(stream, rep), e);
                    let xi = select_from(&a, rule, mix(mix(stream, SALT_SELECT), rep));
                    for (slot, f) in acc.iter_mut().zip(f_panel) {
                        *slot += f.contains(xi) as u64;
                    }
                    tight += k_tight.contains(xi) as u64;
                    (acc, tight)
                },
            )
            .reduce(
                || (vec![0u64; f_panel.len()], 0u64),
                |(mut a, at), (b, bt)| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                    (a, at + bt)
                },
            )
    };

    let mut per_index = Vec::with_capacity(seq.len());
    let mut tight_series = Vec::with_capacity(seq.len());
    for i in 0..seq.len() {
        let (counts, tight) = eval_index(seq[i].as_ref(), eps_seq[i], index_stream(seed, i));
        per_index.push(counts);
        tight_series.push(CapacityEstimate::from_counts(tight, n_samples));
    }

    // tightness hypothesis on the selections
    let tail = tail_start(seq.len());
    let mut max_short = f64::NEG_INFINITY;
    for est in tight_series.iter().skip(tail) {
        let short = (1.0 - eta - 3.0 * est.std_error) - est.value;
        max_short = max_short.max(short);
    }
    if max_short > 0.0 {
        diagnostics.push(format!(
            "selection tightness hypothesis failed: shortfall {max_short:.6}"
        ));
        return Ok(TestReport {
            tester: "selection".into(),
            verdict: Verdict::HypothesisNotMet,
            seed,
            n_samples,
            tol,
            tail_start: tail,
            sequence_len: seq.len(),
            panels: vec![],
            diagnostics,
        });
    }

    // limit capacity of the solution set per panel element
    let collections: Vec<Vec<ClosedSet<GridSpec>>> =
        f_panel.iter().map(|f| vec![f.clone()]).collect();
    let limit_counts =
        count_argmin_joint(limit, eps, &collections, n_samples, mix(seed, SALT_LIMIT));

    // full-window capacity: exact on a finite window, reported for the
    // record
    let full = ClosedSet::full(grid);
    let full_count: u64 = (0..n_samples)
        .into_par_iter()
        .map(|rep| {
            let a = eps_argmin(&limit.draw(mix(seed, SALT_LIMIT), rep), eps);
            hits(&a, &full) as u64
        })
        .sum();
    let t_window = CapacityEstimate::from_counts(full_count, n_samples);
    diagnostics.push(format!("full-window capacity of the limit solution set: {}", t_window.value));

    let mut panels: Vec<PanelSeries> = f_panel
        .iter()
        .enumerate()
        .map(|(j, f)| PanelSeries {
            panel_id: format!("closed-set[{j}]len{}", f.len()),
            limit: CapacityEstimate::from_counts(limit_counts[j], n_samples),
            series: per_index
                .iter()
                .map(|c| CapacityEstimate::from_counts(c[j], n_samples))
                .collect(),
            stats: vec![],
        })
        .collect();
    panels.push(PanelSeries {
        panel_id: "full-window-capacity".into(),
        limit: t_window,
        series: vec![],
        stats: vec![NamedStat {
            name: "t_full_window".into(),
            value: t_window.value,
        }],
    });

    let mut report = assemble(
        "selection",
        true,
        panels,
        seq.len(),
        tol,
        seed,
        n_samples,
        diagnostics,
    );
    // the full-window panel has no series; its pass criterion is exact
    if let Some(p) = report
        .panels
        .iter_mut()
        .find(|p| p.panel_id == "full-window-capacity")
    {
        p.pass = p.limit.value == 1.0;
        p.max_tail_discrepancy = 1.0 - p.limit.value;
        p.threshold = 0.0;
        if !p.pass {
            report.verdict = Verdict::Fail;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastic::scenarios::{
        build_integrand_scenario, build_set_scenario, ScenarioParams,
    };
    use crate::stochastic::RadiusLedger;

    fn grid() -> GridSpec {
        GridSpec::line(-2.0, 2.0, 0.01, -2.0, 2.0, 0.01).unwrap()
    }

    fn panel_of(grid: &GridSpec, balls: &[(f64, f64)]) -> Vec<DBallUnion> {
        balls
            .iter()
            .map(|&(c, r)| DBallUnion::from_balls(vec![(grid.nearest(&[c]), r)]).unwrap())
            .collect()
    }

    #[test]
    fn rcs_shrinking_singletons_pass_exactly() {
        let g = grid();
        let params = ScenarioParams {
            seq_len: 120,
            ..ScenarioParams::default()
        };
        let (seq, limit) = build_set_scenario("s1-shrinking-singleton", &g, &params).unwrap();
        let panel = panel_of(&g, &[(0.0, 0.35), (0.5, 0.2), (-1.0, 0.45), (0.25, 0.4)]);
        let report = test_rcs_convergence(&seq, limit.as_ref(), &panel, 400, 7, 0.01).unwrap();
        assert_eq!(report.verdict, Verdict::Pass);
        for p in &report.panels {
            assert!(p.max_tail_discrepancy <= 0.0, "indicators are exact");
        }
    }

    #[test]
    fn rcs_alternating_fails_hard() {
        let g = grid();
        let params = ScenarioParams {
            seq_len: 40,
            ..ScenarioParams::default()
        };
        let (seq, limit) = build_set_scenario("alternating-singletons", &g, &params).unwrap();
        let panel = panel_of(&g, &[(-1.0, 0.1)]);
        let report = test_rcs_convergence(&seq, limit.as_ref(), &panel, 200, 7, 0.01).unwrap();
        assert_eq!(report.verdict, Verdict::Fail);
        assert!(report.panels[0].max_tail_discrepancy >= 0.9);
    }

    #[test]
    fn rcs_constant_sequence_passes() {
        let g = grid();
        let params = ScenarioParams {
            seq_len: 10,
            ..ScenarioParams::default()
        };
        let (seq, limit) = build_set_scenario("deterministic-atom", &g, &params).unwrap();
        let panel = panel_of(&g, &[(0.5, 0.2), (0.0, 0.3)]);
        let report = test_rcs_convergence(&seq, limit.as_ref(), &panel, 100, 3, 0.01).unwrap();
        assert_eq!(report.verdict, Verdict::Pass);
    }

    #[test]
    fn rcs_validates_inputs() {
        let g = grid();
        let params = ScenarioParams::default();
        let (seq, limit) = build_set_scenario("s1-shrinking-singleton", &g, &params).unwrap();
        assert_eq!(
            test_rcs_convergence(&seq, limit.as_ref(), &[], 10, 0, 0.01).unwrap_err(),
            StochasticError::BadPanel("empty hit panel".into())
        );
        assert_eq!(
            test_rcs_convergence(&[], limit.as_ref(), &panel_of(&g, &[(0.0, 0.1)]), 10, 0, 0.01)
                .unwrap_err(),
            StochasticError::EmptySequence
        );
    }

    #[test]
    fn epi_dist_iid_sequence_passes_and_modes_complement() {
        let g = grid();
        let params = ScenarioParams {
            seq_len: 8,
            ..ScenarioParams::default()
        };
        let (seq, limit, _) = build_integrand_scenario("s3-random-quadratic", &g, &params).unwrap();
        let tuple = EpiPanelTuple {
            events: vec![EpiEvent {
                x: g.nearest(&[0.0]),
                r: 0.5,
                alpha: -0.8,
            }],
        };
        let le = test_epi_convergence_dist(
            &seq,
            limit.as_ref(),
            std::slice::from_ref(&tuple),
            4000,
            11,
            0.05,
            EpiMode::Le,
            0.05,
        )
        .unwrap();
        assert_eq!(le.verdict, Verdict::Pass);
        let gt = test_epi_convergence_dist(
            &seq,
            limit.as_ref(),
            &[tuple],
            4000,
            11,
            0.05,
            EpiMode::Gt,
            0.05,
        )
        .unwrap();
        assert_eq!(gt.verdict, Verdict::Pass);
        // same streams, complementary events: estimates sum to one exactly
        for (a, b) in le.panels[0].series.iter().zip(&gt.panels[0].series) {
            assert_eq!(a.estimate.value + b.estimate.value, 1.0);
        }
    }

    #[test]
    fn epi_dist_oscillation_distinguishes_envelopes() {
        let g = grid();
        let params = ScenarioParams {
            seq_len: 16,
            index_offset: 12,
            ..ScenarioParams::default()
        };
        let (seq, limit, _) = build_integrand_scenario("s6-oscillation", &g, &params).unwrap();
        let tuple = EpiPanelTuple {
            events: vec![EpiEvent {
                x: g.nearest(&[0.0]),
                r: 0.5,
                alpha: -1.45,
            }],
        };
        let good = test_epi_convergence_dist(
            &seq,
            limit.as_ref(),
            std::slice::from_ref(&tuple),
            200,
            5,
            0.02,
            EpiMode::Le,
            0.02,
        )
        .unwrap();
        assert_eq!(good.verdict, Verdict::Pass);

        let flat = crate::stochastic::scenarios::DeterministicIntegrand::new(
            "flat-zero",
            LscFunction::constant(&g, ExtReal::finite(0.0)),
            false,
        );
        let bad = test_epi_convergence_dist(
            &seq,
            &flat,
            &[tuple],
            200,
            5,
            0.02,
            EpiMode::Le,
            0.02,
        )
        .unwrap();
        assert_eq!(bad.verdict, Verdict::Fail);
    }

    #[test]
    fn argmin_upper_fell_double_well() {
        let g = grid();
        let params = ScenarioParams {
            seq_len: 12,
            ..ScenarioParams::default()
        };
        let (seq, limit, eps_seq) = build_integrand_scenario("s4-double-well", &g, &params).unwrap();
        let k_panel = vec![
            vec![ClosedSet::full(&g)],
            vec![closed_ball(&g, g.nearest(&[1.0]), 0.1)],
            vec![closed_ball(&g, g.nearest(&[1.9]), 0.05)],
        ];
        let report = test_argmin_upper_fell(
            &seq,
            &eps_seq,
            limit.as_ref(),
            0.0,
            &k_panel,
            2000,
            13,
            0.02,
        )
        .unwrap();
        assert_eq!(report.verdict, Verdict::Pass);
        // the one-sided slack is what lets the 0.5-probability panel pass
        // against the limit's certain hit
        let near_one = &report.panels[1];
        assert!(near_one.limit.value == 1.0);
        let tail_vals: Vec<f64> = near_one
            .series
            .iter()
            .skip(report.tail_start)
            .map(|e| e.estimate.value)
            .collect();
        for v in tail_vals {
            assert!((v - 0.5).abs() < 0.1, "tilt sign symmetry gives about one half, got {v}");
        }
    }

    #[test]
    fn tightness_pass_and_fail() {
        let g = grid();
        let params = ScenarioParams {
            seq_len: 6,
            ..ScenarioParams::default()
        };
        let (seq, _, eps_seq) = build_integrand_scenario("s3-random-quadratic", &g, &params).unwrap();
        let window = ClosedSet::full(&g);
        let pass = test_tightness(&seq, &eps_seq, &window, 500, 3, 0.01).unwrap();
        assert_eq!(pass.verdict, Verdict::Pass);
        let tiny = closed_ball(&g, g.nearest(&[0.0]), 0.001);
        let fail = test_tightness(&seq, &eps_seq, &tiny, 500, 3, 0.01).unwrap();
        assert_eq!(fail.verdict, Verdict::Fail);
    }

    #[test]
    fn argmin_fell_unique_limit_passes_with_ks() {
        let g = grid();
        let params = ScenarioParams {
            seq_len: 6,
            noise_sd: 0.5,
            ..ScenarioParams::default()
        };
        let (seq, limit, eps_seq) = build_integrand_scenario("s3-random-quadratic", &g, &params).unwrap();
        let ledger = RadiusLedger {
            base_radii: vec![0.5],
            offsets: vec![0.005],
            accepted: vec![0.3, 0.55, 1.0],
        };
        let u_panel = vec![
            DBallUnion::new(vec![(g.nearest(&[0.0]), 0.55)], &ledger).unwrap(),
            DBallUnion::new(vec![(g.nearest(&[-0.5]), 0.3), (g.nearest(&[0.75]), 0.3)], &ledger)
                .unwrap(),
        ];
        let report = test_argmin_fell(
            &seq,
            &eps_seq,
            limit.as_ref(),
            0.0,
            &ClosedSet::full(&g),
            0.01,
            &u_panel,
            4000,
            17,
            0.05,
        )
        .unwrap();
        assert_eq!(report.verdict, Verdict::Pass);
        let ks = report
            .panels
            .iter()
            .find(|p| p.panel_id == "selected-minimizer-law")
            .unwrap();
        assert!(ks.stats[0].value <= 0.05);
    }

    #[test]
    fn argmin_fell_double_well_hypothesis_not_met() {
        let g = grid();
        let params = ScenarioParams {
            seq_len: 6,
            ..ScenarioParams::default()
        };
        let (seq, limit, eps_seq) = build_integrand_scenario("s4-double-well", &g, &params).unwrap();
        let ledger = RadiusLedger {
            base_radii: vec![0.5],
            offsets: vec![0.005],
            accepted: vec![0.5],
        };
        let u_panel = vec![DBallUnion::new(vec![(g.nearest(&[0.0]), 0.5)], &ledger).unwrap()];
        let report = test_argmin_fell(
            &seq,
            &eps_seq,
            limit.as_ref(),
            0.0,
            &ClosedSet::full(&g),
            0.01,
            &u_panel,
            500,
            1,
            0.05,
        )
        .unwrap();
        assert_eq!(report.verdict, Verdict::HypothesisNotMet);
    }

    #[test]
    fn selection_portmanteau_double_well() {
        let g = grid();
        let params = ScenarioParams {
            seq_len: 10,
            ..ScenarioParams::default()
        };
        let (seq, limit, eps_seq) = build_integrand_scenario("s4-double-well", &g, &params).unwrap();
        let f_panel = vec![
            closed_ball(&g, g.nearest(&[1.0]), 0.05),
            closed_ball(&g, g.nearest(&[-1.0]), 0.05),
            closed_ball(&g, g.nearest(&[0.0]), 0.05),
            ClosedSet::full(&g),
        ];
        let report = test_selection_portmanteau(
            &seq,
            &eps_seq,
            SelectionRule::LexicographicMin,
            limit.as_ref(),
            0.0,
            &f_panel,
            &ClosedSet::full(&g),
            0.01,
            4000,
            23,
            0.02,
        )
        .unwrap();
        assert_eq!(report.verdict, Verdict::Pass);
        let full = report
            .panels
            .iter()
            .find(|p| p.panel_id == "full-window-capacity")
            .unwrap();
        assert_eq!(full.limit.value, 1.0);
    }

    #[test]
    fn reports_are_bit_identical_across_runs() {
        let g = grid();
        let params = ScenarioParams {
            seq_len: 8,
            ..ScenarioParams::default()
        };
        let (seq, limit, eps_seq) = build_integrand_scenario("s4-double-well", &g, &params).unwrap();
        let k_panel = vec![vec![closed_ball(&g, g.nearest(&[1.0]), 0.1)]];
        let a = test_argmin_upper_fell(&seq, &eps_seq, limit.as_ref(), 0.0, &k_panel, 1500, 9, 0.02)
            .unwrap();
        let b = test_argmin_upper_fell(&seq, &eps_seq, limit.as_ref(), 0.0, &k_panel, 1500, 9, 0.02)
            .unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }
}
