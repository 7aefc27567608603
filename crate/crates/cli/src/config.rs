//! Flat TOML experiment configuration: grid, scenario, tester, panel, and
//! the sampling/verdict parameters. No embedded scripting; a config plus a
//! seed fully determines every artifact byte.

use epilab_core::carrier::{GridSpec, Point};
use epilab_core::hyperspace::{closed_ball, ClosedSet};
use epilab_core::stochastic::ScenarioParams;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

pub const TESTER_IDS: &[&str] = &[
    "argmin-fell",
    "argmin-upper-fell",
    "continuity-screen",
    "epi-dist",
    "rcs-convergence",
    "selection",
    "tightness",
];

/// A closed set described in a config file.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SetSpec {
    /// The whole lattice window.
    Window,
    /// Closed ball at `center` with radius `r`.
    Ball { center: Vec<f64>, r: f64 },
    /// Union of closed balls.
    Union { balls: Vec<BallSpec> },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BallSpec {
    pub center: Vec<f64>,
    pub r: f64,
}

impl SetSpec {
    pub fn realize(&self, grid: &GridSpec) -> Result<ClosedSet<GridSpec>, ConfigError> {
        let center_point = |c: &
        [f64]| -> Result<Point, ConfigError> {
            grid.point_at(c)
                .map_err(|e| ConfigError::Invalid(format!("ball center off grid: {e}")))
        };
        Ok(match self {
            SetSpec::Window => ClosedSet::full(grid),
            SetSpec::Ball { center, r } => closed_ball(grid, center_point(center)?, *r),
            SetSpec::Union { balls } => {
                let mut acc = ClosedSet::empty(grid);
                for b in balls {
                    acc = acc.union(&closed_ball(grid, center_point(&b.center)?, b.r));
                }
                acc
            }
        })
    }
}

/// Ledger construction parameters: base radii, offsets, and the screening
/// panel run against the limit law.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct LedgerSpec {
    pub base_radii: Vec<f64>,
    pub offsets: Vec<f64>,
    pub centers: Vec<f64>,
    pub delta: f64,
    pub kappa: f64,
    #[serde(default = "default_screen_n")]
    pub screen_n: u64,
    #[serde(default)]
    pub use_analytic: bool,
}

fn default_screen_n() -> u64 {
    20_000
}

/// Panel of the hit-or-miss testers: either explicit ball unions or an
/// automatic panel drawn from the ledger.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum UnionPanelSpec {
    Unions { unions: Vec<UnionSpec> },
    AutoUnions { n_unions: usize, max_balls: usize },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct UnionSpec {
    pub balls: Vec<BallSpec>,
}

/// One infimum event of the epigraph-distribution panel.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EpiEventSpec {
    pub x: Vec<f64>,
    pub r: f64,
    pub alpha: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EpiTupleSpec {
    pub events: Vec<EpiEventSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CompactCollectionSpec {
    pub sets: Vec<SetSpec>,
}

/// Scenario reference: the library id plus its tunable parameters.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ScenarioRef {
    pub id: String,
    #[serde(flatten)]
    pub params: ScenarioParams,
}

/// Parameters of the continuity-radius screen run.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ContinuitySpec {
    pub center: Vec<f64>,
    pub radii: Vec<f64>,
    pub delta: f64,
    pub kappa: f64,
    #[serde(default)]
    pub use_analytic: bool,
    /// Optional verdict expectations; without them the run always passes.
    #[serde(default)]
    pub expect_accepted: Vec<f64>,
    #[serde(default)]
    pub expect_rejected: Vec<f64>,
}

/// The full experiment file.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ExperimentConfig {
    pub tester: String,
    pub seed: u64,
    pub n_samples: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// eps for the limit law; sequence eps values default to the scenario's
    /// own compliant sequence unless `eps_seq` overrides them.
    #[serde(default)]
    pub eps: f64,
    #[serde(default)]
    pub eps_seq: Option<Vec<f64>>,
    #[serde(default)]
    pub out_dir: Option<String>,
    pub grid: GridSpec,
    pub scenario: ScenarioRef,
    #[serde(default)]
    pub ledger: Option<LedgerSpec>,
    #[serde(default)]
    pub panel: Option<UnionPanelSpec>,
    #[serde(default)]
    pub epi_panel: Option<Vec<EpiTupleSpec>>,
    #[serde(default = "default_epi_mode")]
    pub epi_mode: String,
    #[serde(default = "default_screen_kappa")]
    pub screen_kappa: f64,
    #[serde(default)]
    pub compact_panel: Option<Vec<CompactCollectionSpec>>,
    #[serde(default)]
    pub set_panel: Option<Vec<SetSpec>>,
    #[serde(default)]
    pub tightness_k: Option<SetSpec>,
    #[serde(default = "default_rule")]
    pub selection_rule: String,
    #[serde(default)]
    pub continuity: Option<ContinuitySpec>,
}

fn default_tol() -> f64 {
    0.01
}

fn default_eta() -> f64 {
    0.01
}

fn default_epi_mode() -> String {
    "le".into()
}

fn default_screen_kappa() -> f64 {
    0.02
}

fn default_rule() -> String {
    "lexicographic-min".into()
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, ConfigError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if !TESTER_IDS.contains(&self.tester.as_str()) {
            return Err(ConfigError::Invalid(format!(
                "unknown tester {:?}; known testers: {}",
                self.tester,
                TESTER_IDS.join(", ")
            )));
        }
        if epilab_core::stochastic::scenarios::scenario_info(&self.scenario.id).is_none() {
            return Err(ConfigError::Invalid(format!(
                "unknown scenario {:?}",
                self.scenario.id
            )));
        }
        if self.n_samples < 1 {
            return Err(ConfigError::Invalid("n_samples must be at least 1".into()));
        }
        if self.scenario.params.seq_len < 1 {
            return Err(ConfigError::Invalid("seq_len must be at least 1".into()));
        }
        if let Some(eps_seq) = &self.eps_seq {
            if eps_seq.len() != self.scenario.params.seq_len {
                return Err(ConfigError::Invalid(format!(
                    "eps_seq has {} entries but seq_len is {}",
                    eps_seq.len(),
                    self.scenario.params.seq_len
                )));
            }
        }
        match self.selection_rule.as_str() {
            "lexicographic-min" | "random-uniform" => {}
            other => {
                return Err(ConfigError::Invalid(format!(
                    "unknown selection rule {other:?}"
                )))
            }
        }
        match self.epi_mode.as_str() {
            "le" | "gt" => {}
            other => return Err(ConfigError::Invalid(format!("unknown epi mode {other:?}"))),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
tester = "rcs-convergence"
seed = 7
n_samples = 100

[grid]
dim = 1
lo = -1.0
hi = 1.0
h = 0.5
value_lo = -1.0
value_hi = 1.0
h_v = 0.5

[scenario]
id = "s1-shrinking-singleton"
seq_len = 10
"#;

    #[test]
    fn minimal_config_parses() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.tester, "rcs-convergence");
        assert_eq!(cfg.scenario.params.seq_len, 10);
        assert_eq!(cfg.tol, 0.01);
    }

    #[test]
    fn unknown_tester_and_scenario_rejected() {
        let bad = MINIMAL.replace("rcs-convergence", "nope");
        assert!(matches!(
            ExperimentConfig::from_toml(&bad),
            Err(ConfigError::Invalid(_))
        ));
        let bad = MINIMAL.replace("s1-shrinking-singleton", "nope");
        assert!(matches!(
            ExperimentConfig::from_toml(&bad),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            ExperimentConfig::from_toml("tester = ["),
            Err(ConfigError::Parse(_))
        ));
    }

    #[test]
    fn set_specs_realize() {
        let grid = GridSpec::line(-1.0, 1.0, 0.5, -1.0, 1.0, 0.5).unwrap();
        assert_eq!(SetSpec::Window.realize(&grid).unwrap().len(), 5);
        let ball = SetSpec::Ball {
            center: vec![0.0],
            r: 0.5,
        };
        assert_eq!(ball.realize(&grid).unwrap().len(), 3);
        let off = SetSpec::Ball {
            center: vec![0.3],
            r: 0.5,
        };
        assert!(off.realize(&grid).is_err());
        let union = SetSpec::Union {
            balls: vec![
                BallSpec {
                    center: vec![-1.0],
                    r: 0.0,
                },
                BallSpec {
                    center: vec![1.0],
                    r: 0.0,
                },
            ],
        };
        assert_eq!(union.realize(&grid).unwrap().len(), 2);
    }
}
