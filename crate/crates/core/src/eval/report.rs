use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::latency::LatencyStats;
use super::policy::Policy;
use crate::error::{Error, Result};
use crate::model::FORMAT_VERSION;
use crate::numerics::fnv1a64;
use crate::simenv::{SimQuery, SimWorld, Split};
use crate::supervision::GenerationOutcome;

/// Order-insensitive fingerprint of a set of query ids.
pub fn split_digest<'a>(ids: impl IntoIterator<Item = &'a str>) -> String {
    let mut hashes: Vec<u64> = ids.into_iter().map(|id| fnv1a64(id.as_bytes())).collect();
    hashes.sort_unstable();
    let bytes: Vec<u8> = hashes.iter().flat_map(|h| h.to_le_bytes()).collect();
    format!("{:016x}:{}", fnv1a64(&bytes), hashes.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalReport {
    pub format_version: u64,
    pub policy_name: String,
    pub split: String,
    pub n: usize,
    pub em_mean: f64,
    pub f1_mean: f64,
    pub selection_histogram: BTreeMap<usize, usize>,
    pub r0_rate: f64,
    /// Absent when the policy never abstains.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub em_at_r0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<LatencyStats>,
}

impl EvalReport {
    /// Aggregates `(choice, outcome)` pairs over a split identified by
    /// `split`. The histogram lists every id in `0..num_choices`.
    pub fn from_outcomes(
        policy_name: &str,
        split: String,
        num_choices: usize,
        rows: &[(usize, GenerationOutcome)],
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Empty("evaluation split".into()));
        }
        let n = rows.len();
        let mut hist: BTreeMap<usize, usize> = (0..num_choices).map(|i| (i, 0)).collect();
        let (mut em, mut f1, mut em_r0) = (0u64, 0.0, 0u64);
        for (choice, out) in rows {
            if *choice >= num_choices {
                return Err(Error::OutOfRange { what: "chosen retriever", id: *choice, max: num_choices - 1 });
            }
            *hist.entry(*choice).or_default() += 1;
            em += u64::from(out.em);
            f1 += out.f1;
            if *choice == 0 {
                em_r0 += u64::from(out.em);
            }
        }
        let n_r0 = hist[&0];
        let report = Self {
            format_version: FORMAT_VERSION,
            policy_name: policy_name.to_string(),
            split,
            n,
            em_mean: em as f64 / n as f64,
            f1_mean: f1 / n as f64,
            r0_rate: n_r0 as f64 / n as f64,
            em_at_r0: (n_r0 > 0).then(|| em_r0 as f64 / n_r0 as f64),
            selection_histogram: hist,
            latency_ms: None,
        };
        report.validate()?;
        Ok(report)
    }

    /// Internal consistency: histogram totals, abstention rate, ranges.
    pub fn validate(&self) -> Result<()> {
        let total: usize = self.selection_histogram.values().sum();
        if total != self.n || self.n == 0 {
            return Err(Error::schema(format!("histogram sums to {total}, n = {}", self.n)));
        }
        let n_r0 = self.selection_histogram.get(&0).copied().unwrap_or(0);
        if self.r0_rate != n_r0 as f64 / self.n as f64 {
            return Err(Error::schema(format!("r0_rate {} disagrees with histogram", self.r0_rate)));
        }
        if (n_r0 == 0) != self.em_at_r0.is_none() {
            return Err(Error::schema("em_at_r0 must be present exactly when R0 is selected"));
        }
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.em_mean) || !unit(self.f1_mean) || !self.em_at_r0.is_none_or(unit) {
            return Err(Error::schema("EM/F1 means must lie in [0,1]"));
        }
        if let Some(l) = &self.latency_ms {
            l.validate()?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        self.validate()?;
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(raw: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(raw).map_err(|e| Error::schema(format!("report: {e}")))?;
        if r.format_version != FORMAT_VERSION {
            return Err(Error::Version { found: r.format_version, expected: FORMAT_VERSION });
        }
        r.validate()?;
        Ok(r)
    }
}

/// Runs `policy` over `queries`, generating each outcome with the world's
/// mock generator.
pub fn evaluate_queries(policy: &dyn Policy, world: &SimWorld, queries: &[SimQuery]) -> Result<EvalReport> {
    let rows = queries
        .iter()
        .map(|q| {
            let choice = policy.choose(q)?;
            Ok((choice, world.mock_generate(q, choice)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let digest = split_digest(queries.iter().map(|q| q.id.as_str()));
    EvalReport::from_outcomes(policy.name(), digest, world.config.num_retrievers + 1, &rows)
}

pub fn evaluate_policy(policy: &dyn Policy, world: &SimWorld, split: Split) -> Result<EvalReport> {
    evaluate_queries(policy, world, world.split(split))
}

/// Abstention analysis: EM on the router-chosen R0 subset against the
/// always-R0 baseline on the full split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct R0Analysis {
    pub r0_rate: f64,
    pub em_at_r0: Option<f64>,
    pub no_retrieval_em: f64,
    pub delta: Option<f64>,
}

pub fn r0_analysis(report: &EvalReport, no_retrieval: &EvalReport) -> Result<R0Analysis> {
    if report.split != no_retrieval.split {
        return Err(Error::SplitMismatch(format!("{} vs {}", report.split, no_retrieval.split)));
    }
    Ok(R0Analysis {
        r0_rate: report.r0_rate,
        em_at_r0: report.em_at_r0,
        no_retrieval_em: no_retrieval.em_mean,
        delta: report.em_at_r0.map(|em| em - no_retrieval.em_mean),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonDelta {
    pub policy_name: String,
    pub em_delta: f64,
    pub f1_delta: f64,
}

/// Reports on one split with EM/F1 differences against a baseline row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub baseline: String,
    pub rows: Vec<EvalReport>,
    pub deltas: Vec<ComparisonDelta>,
}

impl ComparisonTable {
    pub fn new(rows: Vec<EvalReport>, baseline: &str) -> Result<Self> {
        let first = rows.first().ok_or_else(|| Error::Empty("comparison rows".into()))?;
        if let Some(r) = rows.iter().find(|r| r.split != first.split) {
            return Err(Error::SplitMismatch(format!("{} was evaluated on {}", r.policy_name, r.split)));
        }
        let base = rows
            .iter()
            .find(|r| r.policy_name == baseline)
            .ok_or_else(|| Error::config(format!("baseline {baseline} is not a row")))?;
        let deltas = rows
            .iter()
            .map(|r| ComparisonDelta {
                policy_name: r.policy_name.clone(),
                em_delta: r.em_mean - base.em_mean,
                f1_delta: r.f1_mean - base.f1_mean,
            })
            .collect();
        Ok(Self { baseline: baseline.to_string(), rows, deltas })
    }

    pub fn row(&self, policy_name: &str) -> Option<&EvalReport> {
        self.rows.iter().find(|r| r.policy_name == policy_name)
    }

    /// Fixed-width text rendering.
    pub fn render(&self) -> String {
        let mut s = format!("{:<18} {:>6} {:>7} {:>7} {:>8} {:>8} {:>8}\n", "policy", "n", "EM", "F1", "dEM", "R0 rate", "EM@R0");
        for (r, d) in self.rows.iter().zip(&self.deltas) {
            let em_r0 = r.em_at_r0.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
            let _ = writeln!(
                s,
                "{:<18} {:>6} {:>7.4} {:>7.4} {:>+8.4} {:>8.4} {:>8}",
                r.policy_name, r.n, r.em_mean, r.f1_mean, d.em_delta, r.r0_rate, em_r0
            );
        }
        s
    }
}
