//! Machine-readable reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "<=")]
    AtMost,
}

/// A measured quantity, the bound it must respect and whether it does.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub bound: f64,
    pub pass: bool,
}

impl Certificate {
    pub fn at_least(name: &str, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, relation: Relation::AtLeast, bound, pass: value >= bound }
    }

    pub fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, relation: Relation::AtMost, bound, pass: value <= bound }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub parse_ms: f64,
    pub relax_ms: f64,
    pub round_ms: f64,
    pub total_ms: f64,
}

/// Outcome of a `solve-nsw` or `solve-sched` run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub instance_digest: String,
    pub eps: f64,
    pub seed: u64,
    /// `best` or `sample`.
    pub round: String,
    /// `nsw`, `l2`, `lk:K` or `completion`.
    pub objective: String,
    /// Optimal value of the discretized relaxation.
    pub cp_value: f64,
    /// Objective of the reported allocation: NSW for `nsw`, cost otherwise.
    pub rounded_value: f64,
    /// Best objective over the decomposition's allocations.
    pub best_value: f64,
    /// Expectation over the decomposition: of `Σ_i w_i ln v_i` for `nsw`, of the cost otherwise.
    pub expected_value: f64,
    /// Player id to the ids of the objects it receives.
    pub allocation: BTreeMap<String, Vec<String>>,
    pub decomposition_size: usize,
    pub certificates: Vec<Certificate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fsr_gap: Option<f64>,
    pub timings: Timings,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.certificates.iter().all(|c| c.pass)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} ({}) eps={} digest {}", self.command, self.objective, self.eps, &self.instance_digest[..12]);
        let _ = writeln!(s, "  relaxation value  {:.6}", self.cp_value);
        let expected = if self.objective == "nsw" { "expected log-NSW" } else { "expected" };
        let _ = writeln!(
            s,
            "  rounded ({})   {:.6}  (best {:.6}, {expected} {:.6})",
            self.round, self.rounded_value, self.best_value, self.expected_value
        );
        for (player, objects) in &self.allocation {
            let _ = writeln!(s, "  {player}: {}", objects.join(" "));
        }
        if let Some(g) = self.fsr_gap {
            let _ = writeln!(s, "  f-SR gap          {g:.3e}");
        }
        summarise_certificates(&mut s, &self.certificates);
        let _ = write!(s, "  time {:.1} ms", self.timings.total_ms);
        s
    }
}

/// Outcome of `verify`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suite: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance_digest: Option<String>,
    pub eps: f64,
    pub certificates: Vec<Certificate>,
    pub pass: bool,
    pub total_ms: f64,
}

impl VerifyReport {
    pub fn summary(&self) -> String {
        let mut s = format!("verify {}: {}\n", self.suite, if self.pass { "PASS" } else { "FAIL" });
        summarise_certificates(&mut s, &self.certificates);
        let _ = write!(s, "  time {:.1} ms", self.total_ms);
        s
    }
}

fn summarise_certificates(s: &mut String, certificates: &[Certificate]) {
    for c in certificates {
        let rel = match c.relation {
            Relation::AtLeast => ">=",
            Relation::AtMost => "<=",
        };
        let _ = writeln!(
            s,
            "  [{}] {} = {:.6} {rel} {:.6}",
            if c.pass { "pass" } else { "FAIL" },
            c.name,
            c.value,
            c.bound
        );
    }
}
