//! Ingestion of judge replies in the fixed six-key JSON shape.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance within which a judge-supplied `overall_score` is trusted.
pub const OVERALL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityAssessment {
    pub relevance: u8,
    pub coverage: u8,
    pub accuracy: u8,
    pub ranking: u8,
    pub redundancy: u8,
    pub overall: f64,
}

/// Wire form, key names exactly as the judge emits them.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct JudgeJson {
    relevance_score: i64,
    coverage_score: i64,
    accuracy_score: i64,
    ranking_score: i64,
    redundancy_score: i64,
    overall_score: f64,
}

/// Outcome of parsing a judge reply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParsedJudge {
    pub assessment: QualityAssessment,
    /// Set when the judge's `overall_score` disagreed with the mean of the
    /// five dimensions and was replaced by it.
    pub overall_replaced: bool,
}

impl QualityAssessment {
    /// Builds an assessment with `overall` set to the mean of the dimensions.
    pub fn from_dimensions(dims: [u8; 5]) -> Result<Self> {
        for (name, v) in DIMENSION_KEYS.iter().zip(dims) {
            check_dimension(name, i64::from(v))?;
        }
        let [relevance, coverage, accuracy, ranking, redundancy] = dims;
        Ok(Self { relevance, coverage, accuracy, ranking, redundancy, overall: mean_of(dims) })
    }

    pub fn dimensions(&self) -> [u8; 5] {
        [self.relevance, self.coverage, self.accuracy, self.ranking, self.redundancy]
    }

    pub fn recomputed_overall(&self) -> f64 {
        mean_of(self.dimensions())
    }

    /// Serializes in the judge reply shape.
    pub fn to_judge_json(&self) -> String {
        serde_json::to_string(&JudgeJson::from(self)).expect("plain struct serializes")
    }

    pub(crate) fn from_wire(w: &JudgeJson) -> Result<ParsedJudge> {
        let raw = [
            w.relevance_score,
            w.coverage_score,
            w.accuracy_score,
            w.ranking_score,
            w.redundancy_score,
        ];
        let mut dims = [0u8; 5];
        for ((name, v), slot) in DIMENSION_KEYS.iter().zip(raw).zip(dims.iter_mut()) {
            *slot = check_dimension(name, v)?;
        }
        let mut a = Self::from_dimensions(dims)?;
        let overall_replaced = !(w.overall_score.is_finite()
            && (w.overall_score - a.overall).abs() <= OVERALL_TOLERANCE);
        if !overall_replaced {
            a.overall = w.overall_score;
        }
        Ok(ParsedJudge { assessment: a, overall_replaced })
    }
}

impl From<&QualityAssessment> for JudgeJson {
    fn from(a: &QualityAssessment) -> Self {
        Self {
            relevance_score: a.relevance.into(),
            coverage_score: a.coverage.into(),
            accuracy_score: a.accuracy.into(),
            ranking_score: a.ranking.into(),
            redundancy_score: a.redundancy.into(),
            overall_score: a.overall,
        }
    }
}

const DIMENSION_KEYS: [&str; 5] =
    ["relevance_score", "coverage_score", "accuracy_score", "ranking_score", "redundancy_score"];

fn check_dimension(name: &str, v: i64) -> Result<u8> {
    if (1..=5).contains(&v) {
        Ok(v as u8)
    } else {
        Err(Error::schema(format!("{name} = {v} outside 1..=5")))
    }
}

fn mean_of(dims: [u8; 5]) -> f64 {
    f64::from(dims.iter().map(|&d| u32::from(d)).sum::<u32>()) / 5.0
}

/// Parses one complete judge reply: exactly one JSON object with the six
/// score keys and nothing else (surrounding whitespace allowed).
pub fn parse_judge_json(raw: &str) -> Result<ParsedJudge> {
    let wire: JudgeJson =
        serde_json::from_str(raw).map_err(|e| Error::schema(format!("judge reply: {e}")))?;
    QualityAssessment::from_wire(&wire)
}
