//! Executes one experiment config: builds the scenario and panels,
//! dispatches the tester, and writes `report.json`, `series.csv`, and a
//! human-readable `summary.txt` into the output directory.
//!
//! Everything written is a pure function of the config bytes, so repeated
//! runs produce identical artifacts.

use std::path::{Path, PathBuf};

use epilab_core::argmin::SelectionRule;
use epilab_core::carrier::GridSpec;
use epilab_core::hyperspace::ClosedSet;
use epilab_core::report::{CapacityEstimate, PanelReport, TestReport, Verdict};
use epilab_core::stochastic::scenarios::scenario_info;
use epilab_core::stochastic::substream::mix;
use epilab_core::stochastic::testers::{EpiEvent, EpiMode, EpiPanelTuple};
use epilab_core::stochastic::{
    build_d, build_integrand_scenario, build_set_scenario, screen_radii, test_argmin_fell,
    test_argmin_upper_fell, test_epi_convergence_dist, test_rcs_convergence,
    test_selection_portmanteau, test_tightness, ArgminSetSampler, DBallUnion, ScenarioKind,
    ScreenConfig, SetSampler, StochasticError,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig, SetSpec, UnionPanelSpec};

const SALT_LEDGER: u64 = 101;
const SALT_PANEL: u64 = 102;
const SALT_SCREEN: u64 = 103;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("tester rejected its inputs: {0}")]
    Tester(#[from] StochasticError),
    #[error("cannot write artifacts: {0}")]
    Io(#[from] std::io::Error),
}

impl RunnerError {
    fn invalid(msg: impl Into<String>) -> Self {
        RunnerError::Config(ConfigError::Invalid(msg.into()))
    }
}

fn scenario_build_error(cfg: &ExperimentConfig) -> RunnerError {
    RunnerError::invalid(format!(
        "scenario {:?} cannot be built on this grid with these parameters          (library scenarios need a one-dimensional window, seq_len >= 1,          and positive scale parameters)",
        cfg.scenario.id
    ))
}

pub struct RunOutcome {
    pub report: TestReport,
    pub report_path: PathBuf,
    pub series_path: PathBuf,
    pub summary_path: PathBuf,
}

/// Exit-code contract: pass 0, fail 1, hypothesis-not-met 2 (config and
/// environment errors map to 3 at the binary boundary).
pub fn exit_code(verdict: Verdict) -> i32 {
    match verdict {
        Verdict::Pass => 0,
        Verdict::Fail => 1,
        Verdict::HypothesisNotMet => 2,
    }
}

/// Output directory precedence: config `out_dir`, then the environment
/// default, then `./epilab-out`.
pub fn resolve_out_dir(cfg: &ExperimentConfig, cli_override: Option<&Path>) -> PathBuf {
    if let Some(dir) = cli_override {
        return dir.to_path_buf();
    }
    if let Some(dir) = &cfg.out_dir {
        return PathBuf::from(dir);
    }
    if let Ok(dir) = std::env::var("EPILAB_OUT_DIR") {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    PathBuf::from("epilab-out")
}

fn selection_rule(cfg: &ExperimentConfig) -> SelectionRule {
    match cfg.selection_rule.as_str() {
        "random-uniform" => SelectionRule::RandomUniform,
        _ => SelectionRule::LexicographicMin,
    }
}

fn eps_sequence(cfg: &ExperimentConfig, scenario_default: Vec<f64>) -> Vec<f64> {
    cfg.eps_seq.clone().unwrap_or(scenario_default)
}

fn tightness_set(cfg: &ExperimentConfig, grid: &GridSpec) -> Result<ClosedSet<GridSpec>, RunnerError> {
    match &cfg.tightness_k {
        Some(spec) => Ok(spec.realize(grid)?),
        None => Ok(ClosedSet::full(grid)),
    }
}

/// Builds the hit panel: explicit unions, or an automatic panel drawn from
/// a ledger screened against the given limit law.
fn union_panel(
    cfg: &ExperimentConfig,
    grid: &GridSpec,
    limit: &dyn SetSampler,
) -> Result<Vec<DBallUnion>, RunnerError> {
    let spec = cfg
        .panel
        .as_ref()
        .ok_or_else(|| RunnerError::invalid("this tester needs a [panel] section"))?;
    match spec {
        UnionPanelSpec::Unions { unions } => unions
            .iter()
            .map(|u| {
                let balls = u
                    .balls
                    .iter()
                    .map(|b| {
                        grid.point_at(&b.center)
                            .map(|p| (p, b.r))
                            .map_err(|e| RunnerError::invalid(format!("panel ball: {e}")))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                DBallUnion::from_balls(balls).map_err(RunnerError::from)
            })
            .collect(),
        UnionPanelSpec::AutoUnions { n_unions, max_balls } => {
            let ledger_spec = cfg
                .ledger
                .as_ref()
                .ok_or_else(|| RunnerError::invalid("auto panel needs a [ledger] section"))?;
            let centers = ledger_spec
                .centers
                .iter()
                .map(|&c| {
                    grid.point_at(&[c])
                        .map_err(|e| RunnerError::invalid(format!("ledger center: {e}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let screen = ScreenConfig {
                centers: centers.clone(),
                delta: ledger_spec.delta,
                kappa: ledger_spec.kappa,
                n_samples: ledger_spec.screen_n,
                use_analytic: ledger_spec.use_analytic,
            };
            let ledger = build_d(
                limit,
                &ledger_spec.base_radii,
                &ledger_spec.offsets,
                &screen,
                mix(cfg.seed, SALT_LEDGER),
            )?;
            if *n_unions == 0 || *max_balls == 0 {
                return Err(RunnerError::invalid("auto panel needs n_unions and max_balls >= 1"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, SALT_PANEL));
            (0..*n_unions)
                .map(|_| {
                    let k = rng.random_range(1..=*max_balls);
                    let balls: Vec<_> = (0..k)
                        .map(|_| {
                            let c = centers[rng.random_range(0..centers.len())];
                            let r = ledger.accepted[rng.random_range(0..ledger.accepted.len())];
                            (c, r)
                        })
                        .collect();
                    DBallUnion::new(balls, &ledger).map_err(RunnerError::from)
                })
                .collect()
        }
    }
}

fn realize_sets(
    specs: &[SetSpec],
    grid: &GridSpec,
) -> Result<Vec<ClosedSet<GridSpec>>, RunnerError> {
    specs
        .iter()
        .map(|s| s.realize(grid).map_err(RunnerError::from))
        .collect()
}

/// Runs the configured tester and returns its report without touching the
/// filesystem.
pub fn execute(cfg: &ExperimentConfig) -> Result<TestReport, RunnerError> {
    let grid = cfg.grid;
    let info = scenario_info(&cfg.scenario.id)
        .ok_or_else(|| RunnerError::invalid(format!("unknown scenario {:?}", cfg.scenario.id)))?;

    let need_sets = matches!(cfg.tester.as_str(), "rcs-convergence" | "continuity-screen");
    if need_sets && info.kind != ScenarioKind::SetValued {
        return Err(RunnerError::invalid(format!(
            "tester {} needs a set-valued scenario, {} is integrand-valued",
            cfg.tester, cfg.scenario.id
        )));
    }
    if !need_sets && info.kind != ScenarioKind::IntegrandValued {
        return Err(RunnerError::invalid(format!(
            "tester {} needs an integrand-valued scenario, {} is set-valued",
            cfg.tester, cfg.scenario.id
        )));
    }

    match cfg.tester.as_str() {
        "rcs-convergence" => {
            let (seq, limit) = build_set_scenario(&cfg.scenario.id, &grid, &cfg.scenario.params)
                .ok_or_else(|| scenario_build_error(cfg))?;
            let panel = union_panel(cfg, &grid, limit.as_ref())?;
            Ok(test_rcs_convergence(
                &seq,
                limit.as_ref(),
                &panel,
                cfg.n_samples,
                cfg.seed,
                cfg.tol,
            )?)
        }
        "continuity-screen" => {
            let (_, limit) = build_set_scenario(&cfg.scenario.id, &grid, &cfg.scenario.params)
                .ok_or_else(|| scenario_build_error(cfg))?;
            let spec = cfg
                .continuity
                .as_ref()
                .ok_or_else(|| RunnerError::invalid("continuity-screen needs a [continuity] section"))?;
            let center = grid
                .point_at(&spec.center)
                .map_err(|e| RunnerError::invalid(format!("screen center: {e}")))?;
            let outcomes = screen_radii(
                limit.as_ref(),
                center,
                &spec.radii,
                spec.delta,
                cfg.n_samples,
                mix(cfg.seed, SALT_SCREEN),
                spec.kappa,
                spec.use_analytic,
            );
            let accepted: Vec<f64> = outcomes
                .iter()
                .filter(|o| o.accepted)
                .map(|o| o.radius)
                .collect();
            let expectations_given =
                !spec.expect_accepted.is_empty() || !spec.expect_rejected.is_empty();
            let expectations_met = spec.expect_accepted.iter().all(|r| accepted.contains(r))
                && spec.expect_rejected.iter().all(|r| !accepted.contains(r));
            let panels = outcomes
                .iter()
                .map(|o| PanelReport {
                    panel_id: format!("radius {}", o.radius),
                    limit: CapacityEstimate::exact(o.gap),
                    series: vec![],
                    max_tail_discrepancy: o.gap,
                    threshold: spec.kappa + 6.0 * o.pooled_se,
                    pass: o.accepted,
                    stats: vec![],
                })
                .collect();
            Ok(TestReport {
                tester: "continuity-screen".into(),
                verdict: if !expectations_given || expectations_met {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                },
                seed: cfg.seed,
                n_samples: cfg.n_samples,
                tol: spec.kappa,
                tail_start: 0,
                sequence_len: spec.radii.len(),
                panels,
                diagnostics: vec![format!("accepted radii: {accepted:?}")],
            })
        }
        "epi-dist" => {
            let (seq, limit, _) =
                build_integrand_scenario(&cfg.scenario.id, &grid, &cfg.scenario.params)
                    .ok_or_else(|| scenario_build_error(cfg))?;
            let tuples = cfg
                .epi_panel
                .as_ref()
                .ok_or_else(|| RunnerError::invalid("epi-dist needs an epi_panel"))?;
            let panel = tuples
                .iter()
                .map(|t| {
                    let events = t
                        .events
                        .iter()
                        .map(|e| {
                            grid.point_at(&e.x)
                                .map(|x| EpiEvent {
                                    x,
                                    r: e.r,
                                    alpha: e.alpha,
                                })
                                .map_err(|err| RunnerError::invalid(format!("epi event: {err}")))
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    Ok(EpiPanelTuple { events })
                })
                .collect::<Result<Vec<_>, RunnerError>>()?;
            let mode = if cfg.epi_mode == "gt" { EpiMode::Gt } else { EpiMode::Le };
            Ok(test_epi_convergence_dist(
                &seq,
                limit.as_ref(),
                &panel,
                cfg.n_samples,
                cfg.seed,
                cfg.tol,
                mode,
                cfg.screen_kappa,
            )?)
        }
        "argmin-upper-fell" => {
            let (seq, limit, default_eps) =
                build_integrand_scenario(&cfg.scenario.id, &grid, &cfg.scenario.params)
                    .ok_or_else(|| scenario_build_error(cfg))?;
            let collections = cfg
                .compact_panel
                .as_ref()
                .ok_or_else(|| RunnerError::invalid("argmin-upper-fell needs a compact_panel"))?
                .iter()
                .map(|c| realize_sets(&c.sets, &grid))
                .collect::<Result<Vec<_>, _>>()?;
            let eps_seq = eps_sequence(cfg, default_eps);
            Ok(test_argmin_upper_fell(
                &seq,
                &eps_seq,
                limit.as_ref(),
                cfg.eps,
                &collections,
                cfg.n_samples,
                cfg.seed,
                cfg.tol,
            )?)
        }
        "tightness" => {
            let (seq, _, default_eps) =
                build_integrand_scenario(&cfg.scenario.id, &grid, &cfg.scenario.params)
                    .ok_or_else(|| scenario_build_error(cfg))?;
            let k = tightness_set(cfg, &grid)?;
            let eps_seq = eps_sequence(cfg, default_eps);
            Ok(test_tightness(
                &seq,
                &eps_seq,
                &k,
                cfg.n_samples,
                cfg.seed,
                cfg.eta,
            )?)
        }
        "argmin-fell" => {
            let (seq, limit, default_eps) =
                build_integrand_scenario(&cfg.scenario.id, &grid, &cfg.scenario.params)
                    .ok_or_else(|| scenario_build_error(cfg))?;
            let k = tightness_set(cfg, &grid)?;
            let eps_seq = eps_sequence(cfg, default_eps);
            // the hit panel is screened against the law of the limit's
            // solution set, not the integrand itself
            let argmin_limit = ArgminSetSampler::new(limit.as_ref(), cfg.eps);
            let panel = union_panel(cfg, &grid, &argmin_limit)?;
            Ok(test_argmin_fell(
                &seq,
                &eps_seq,
                limit.as_ref(),
                cfg.eps,
                &k,
                cfg.eta,
                &panel,
                cfg.n_samples,
                cfg.seed,
                cfg.tol,
            )?)
        }
        "selection" => {
            let (seq, limit, default_eps) =
                build_integrand_scenario(&cfg.scenario.id, &grid, &cfg.scenario.params)
                    .ok_or_else(|| scenario_build_error(cfg))?;
            let f_panel = realize_sets(
                cfg.set_panel
                    .as_ref()
                    .ok_or_else(|| RunnerError::invalid("selection needs a set_panel"))?,
                &grid,
            )?;
            let k = tightness_set(cfg, &grid)?;
            let eps_seq = eps_sequence(cfg, default_eps);
            Ok(test_selection_portmanteau(
                &seq,
                &eps_seq,
                selection_rule(cfg),
                limit.as_ref(),
                cfg.eps,
                &f_panel,
                &k,
                cfg.eta,
                cfg.n_samples,
                cfg.seed,
                cfg.tol,
            )?)
        }
        other => Err(RunnerError::invalid(format!("unknown tester {other:?}"))),
    }
}

/// Executes the config and writes the three artifacts into `out_dir`.
pub fn run_config(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome, RunnerError> {
    let report = execute(cfg)?;
    std::fs::create_dir_all(out_dir)?;
    let report_path = out_dir.join("report.json");
    let series_path = out_dir.join("series.csv");
    let summary_path = out_dir.join("summary.txt");
    std::fs::write(&report_path, report.to_json())?;
    std::fs::write(&series_path, report.series_csv())?;
    std::fs::write(&summary_path, report.summary_text())?;
    Ok(RunOutcome {
        report,
        report_path,
        series_path,
        summary_path,
    })
}

/// Listing of the scenario library for the `list` subcommand: sorted,
/// deterministic, one block per scenario.
pub fn list_scenarios() -> String {
    let mut out = String::new();
    for info in epilab_core::stochastic::scenario_library() {
        out.push_str(&format!(
            "{}\n  {}\n  kind: {}\n  parameters: {}\n  exercises: {}\n  oracles: {}\n",
            info.id,
            info.summary,
            match info.kind {
                ScenarioKind::SetValued => "set-valued",
                ScenarioKind::IntegrandValued => "integrand-valued",
            },
            info.params.join(", "),
            info.exercises.join(", "),
            if info.oracles.is_empty() {
                "none".to_string()
            } else {
                info.oracles.join(", ")
            },
        ));
    }
    out
}
