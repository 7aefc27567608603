//! Shared report vocabulary: three-way verdicts, capacity estimates, and the
//! structured test report emitted by every statistical tester.
//!
//! Reports are plain data with stable serde field order. Nothing in here
//! carries timestamps or other run-dependent state, so identical inputs
//! produce byte-identical JSON.

use serde::{Deserialize, Serialize};

use crate::hyperspace::Excess;

/// Outcome of a tester. `HypothesisNotMet` is distinct from `Fail`: the
/// check did not run because its stated preconditions do not hold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    HypothesisNotMet,
}

impl Verdict {
    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::HypothesisNotMet => "hypothesis-not-met",
        };
        f.write_str(s)
    }
}

/// Monte Carlo estimate of a hitting probability: a replicate-count ratio
/// with its binomial standard error `sqrt(p (1-p) / n)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityEstimate {
    pub value: f64,
    pub n_samples: u64,
    pub std_error: f64,
}

impl CapacityEstimate {
    pub fn from_counts(hits: u64, n_samples: u64) -> Self {
        assert!(n_samples >= 1, "estimate needs at least one replicate");
        assert!(hits <= n_samples);
        let value = hits as f64 / n_samples as f64;
        CapacityEstimate {
            value,
            n_samples,
            std_error: (value * (1.0 - value) / n_samples as f64).sqrt(),
        }
    }

    /// Estimate backed by an analytic oracle: exact value, zero error.
    pub fn exact(value: f64) -> Self {
        CapacityEstimate {
            value,
            n_samples: 0,
            std_error: 0.0,
        }
    }
}

/// One estimate in a per-index series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexEstimate {
    pub index: usize,
    #[serde(flatten)]
    pub estimate: CapacityEstimate,
}

/// Per-panel-element slice of a test report: the limit estimate, the series
/// across sequence indices, and the tail comparison that decides the verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanelReport {
    pub panel_id: String,
    pub limit: CapacityEstimate,
    pub series: Vec<IndexEstimate>,
    pub max_tail_discrepancy: f64,
    pub threshold: f64,
    pub pass: bool,
    /// Auxiliary named statistics (KS distance, excess values, ...)
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stats: Vec<NamedStat>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedStat {
    pub name: String,
    pub value: f64,
}

/// Structured verdict of one tester run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub tester: String,
    pub verdict: Verdict,
    pub seed: u64,
    pub n_samples: u64,
    pub tol: f64,
    pub tail_start: usize,
    pub sequence_len: usize,
    pub panels: Vec<PanelReport>,
    /// Hypothesis notes, screen exclusions, and similar diagnostics.
    pub diagnostics: Vec<String>,
}

impl TestReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plot-ready per-index series: `index,panel_id,estimate,std_error`,
    /// UTF-8 with LF line endings.
    pub fn series_csv(&self) -> String {
        let mut out = String::from("index,panel_id,estimate,std_error\n");
        for panel in &self.panels {
            for ie in &panel.series {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    ie.index, panel.panel_id, ie.estimate.value, ie.estimate.std_error
                ));
            }
        }
        out
    }

    /// Short human-readable summary, one panel per line.
    pub fn summary_text(&self) -> String {
        let mut out = format!("tester: {}\nverdict: {}\n", self.tester, self.verdict);
        out.push_str(&format!(
            "seed: {}  n_samples: {}  tol: {}  tail_start: {}  sequence_len: {}\n",
            self.seed, self.n_samples, self.tol, self.tail_start, self.sequence_len
        ));
        for p in &self.panels {
            out.push_str(&format!(
                "  [{}] {}  limit={:.6}  max_tail_discrepancy={:.6}  threshold={:.6}\n",
                if p.pass { "pass" } else { "FAIL" },
                p.panel_id,
                p.limit.value,
                p.max_tail_discrepancy,
                p.threshold
            ));
            for s in &p.stats {
                out.push_str(&format!("        {} = {:.6}\n", s.name, s.value));
            }
        }
        for d in &self.diagnostics {
            out.push_str(&format!("  note: {d}\n"));
        }
        out
    }
}

/// Serializable excess value with optional witness coordinates, used by the
/// deterministic inclusion checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcessReport {
    pub excess: Excess,
    pub witness: Option<Vec<f64>>,
}
