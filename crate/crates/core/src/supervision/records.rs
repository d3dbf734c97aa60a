//! Supervision records, utility scores and top-k contrast sets.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::judge::{JudgeJson, QualityAssessment};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationOutcome {
    pub answer: String,
    pub em: u8,
    pub f1: f64,
}

impl GenerationOutcome {
    pub fn validate(&self) -> Result<()> {
        if self.em > 1 {
            return Err(Error::schema(format!("em = {} not in {{0,1}}", self.em)));
        }
        if !(0.0..=1.0).contains(&self.f1) {
            return Err(Error::schema(format!("f1 = {} outside [0,1]", self.f1)));
        }
        if self.em == 1 && self.f1 != 1.0 {
            return Err(Error::schema("em = 1 requires f1 = 1"));
        }
        Ok(())
    }
}

/// One observation of retriever `retriever_id` on query `query_id`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisionRecord {
    pub query_id: String,
    pub retriever_id: usize,
    /// Judge assessment; always absent for the null retriever.
    pub quality: Option<QualityAssessment>,
    pub outcome: GenerationOutcome,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordWire {
    query_id: String,
    retriever_id: usize,
    quality: Option<JudgeJson>,
    outcome: GenerationOutcome,
}

impl SupervisionRecord {
    pub fn validate(&self) -> Result<()> {
        if self.retriever_id == 0 && self.quality.is_some() {
            return Err(Error::schema(format!(
                "query {}: retriever 0 must not carry a quality assessment",
                self.query_id
            )));
        }
        if let Some(q) = &self.quality {
            if (q.overall - q.recomputed_overall()).abs() > super::judge::OVERALL_TOLERANCE {
                return Err(Error::schema("overall_score disagrees with dimension mean"));
            }
        }
        self.outcome.validate()
    }

    pub fn to_line(&self) -> Result<String> {
        self.validate()?;
        let wire = RecordWire {
            query_id: self.query_id.clone(),
            retriever_id: self.retriever_id,
            quality: self.quality.as_ref().map(JudgeJson::from),
            outcome: self.outcome.clone(),
        };
        Ok(serde_json::to_string(&wire)?)
    }

    pub fn parse_line(line: &str) -> Result<Self> {
        let wire: RecordWire =
            serde_json::from_str(line).map_err(|e| Error::schema(format!("supervision record: {e}")))?;
        let quality = match &wire.quality {
            Some(q) => {
                let parsed = QualityAssessment::from_wire(q)?;
                if parsed.overall_replaced {
                    return Err(Error::schema("overall_score disagrees with dimension mean"));
                }
                Some(parsed.assessment)
            }
            None => None,
        };
        let rec = Self {
            query_id: wire.query_id,
            retriever_id: wire.retriever_id,
            quality,
            outcome: wire.outcome,
        };
        rec.validate()?;
        Ok(rec)
    }
}

pub fn write_supervision_jsonl<W: Write>(records: &[SupervisionRecord], mut out: W) -> Result<()> {
    for r in records {
        writeln!(out, "{}", r.to_line()?)?;
    }
    Ok(())
}

/// Reads records, skipping blank lines. Errors name the 1-based line.
pub fn read_supervision_jsonl<R: BufRead>(input: R) -> Result<Vec<SupervisionRecord>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = SupervisionRecord::parse_line(&line)
            .map_err(|e| Error::schema(format!("line {}: {e}", i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

/// Coefficients of `u = EM + β·F1 + γ·σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityConfig {
    pub beta: f64,
    pub gamma: f64,
}

impl Default for UtilityConfig {
    fn default() -> Self {
        Self { beta: 0.2, gamma: 0.2 }
    }
}

impl UtilityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.gamma >= 0.0) {
            return Err(Error::config("beta and gamma must be >= 0"));
        }
        Ok(())
    }
}

pub fn utility_score(outcome: &GenerationOutcome, sigma: f64, cfg: UtilityConfig) -> f64 {
    f64::from(outcome.em) + cfg.beta * outcome.f1 + cfg.gamma * sigma
}

/// Mean EM over the given records. Order-independent: the sum is an integer.
pub fn global_correctness<'a>(records: impl IntoIterator<Item = &'a SupervisionRecord>) -> Result<f64> {
    let (hits, n) = records
        .into_iter()
        .fold((0u64, 0u64), |(h, n), r| (h + u64::from(r.outcome.em), n + 1));
    if n == 0 {
        return Err(Error::Empty("records for global correctness".into()));
    }
    Ok(hits as f64 / n as f64)
}

/// σ for every retriever id in `0..num_retrievers`.
pub fn correctness_by_retriever(records: &[SupervisionRecord], num_retrievers: usize) -> Result<Vec<f64>> {
    (0..num_retrievers)
        .map(|i| {
            global_correctness(records.iter().filter(|r| r.retriever_id == i))
                .map_err(|_| Error::Empty(format!("no supervision records for retriever {i}")))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContrastSets {
    /// Sorted ascending.
    pub positives: Vec<usize>,
    /// Sorted ascending.
    pub negatives: Vec<usize>,
    pub k: usize,
}

impl ContrastSets {
    pub fn candidates(&self) -> impl Iterator<Item = usize> + '_ {
        self.positives.iter().chain(&self.negatives).copied()
    }

    pub fn is_positive(&self, id: usize) -> bool {
        self.positives.binary_search(&id).is_ok()
    }
}

/// Top-k of `eligible` by score (ties to the lower id) versus the rest.
pub fn build_contrast_sets(
    scores: &BTreeMap<usize, f64>,
    eligible: &BTreeSet<usize>,
    k: usize,
) -> Result<ContrastSets> {
    if k == 0 {
        return Err(Error::config("k must be >= 1"));
    }
    if eligible.len() <= k {
        return Err(Error::config(format!(
            "{} eligible retrievers leave no negatives for k = {k}",
            eligible.len()
        )));
    }
    let mut ranked = Vec::with_capacity(eligible.len());
    for &id in eligible {
        let s = *scores
            .get(&id)
            .ok_or_else(|| Error::schema(format!("no score for retriever {id}")))?;
        if !s.is_finite() {
            return Err(Error::NonFinite(format!("score of retriever {id}")));
        }
        ranked.push((id, s));
    }
    // descending score, ascending id
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut positives: Vec<usize> = ranked[..k].iter().map(|e| e.0).collect();
    let mut negatives: Vec<usize> = ranked[k..].iter().map(|e| e.0).collect();
    positives.sort_unstable();
    negatives.sort_unstable();
    Ok(ContrastSets { positives, negatives, k })
}

/// Both contrast-set kinds for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct QuerySupervision {
    pub query_id: String,
    pub quality: ContrastSets,
    pub utility: ContrastSets,
}

/// Groups records by query (first-appearance order) and builds quality sets
/// over real retrievers `1..K` and utility sets over `0..K`.
///
/// σ is computed once per retriever over all given records.
pub fn build_query_supervision(
    records: &[SupervisionRecord],
    num_retrievers: usize,
    k: usize,
    util: UtilityConfig,
) -> Result<Vec<QuerySupervision>> {
    util.validate()?;
    if let Some(r) = records.iter().find(|r| r.retriever_id >= num_retrievers) {
        return Err(Error::OutOfRange { what: "retriever id", id: r.retriever_id, max: num_retrievers - 1 });
    }
    let sigma = correctness_by_retriever(records, num_retrievers)?;

    let mut order: Vec<&str> = Vec::new();
    let mut by_query: BTreeMap<&str, Vec<&SupervisionRecord>> = BTreeMap::new();
    for r in records {
        let entry = by_query.entry(r.query_id.as_str()).or_default();
        if entry.is_empty() {
            order.push(r.query_id.as_str());
        }
        entry.push(r);
    }

    let quality_eligible: BTreeSet<usize> = (1..num_retrievers).collect();
    let utility_eligible: BTreeSet<usize> = (0..num_retrievers).collect();
    order
        .into_iter()
        .map(|qid| {
            let fail = |reason: String| Error::ContrastSet { query_id: qid.to_string(), reason };
            let mut quality = BTreeMap::new();
            let mut utility = BTreeMap::new();
            for r in &by_query[qid] {
                if utility
                    .insert(r.retriever_id, utility_score(&r.outcome, sigma[r.retriever_id], util))
                    .is_some()
                {
                    return Err(fail(format!("duplicate record for retriever {}", r.retriever_id)));
                }
                if let Some(q) = &r.quality {
                    quality.insert(r.retriever_id, q.overall);
                }
            }
            let quality = build_contrast_sets(&quality, &quality_eligible, k)
                .map_err(|e| fail(format!("quality sets: {e}")))?;
            let utility = build_contrast_sets(&utility, &utility_eligible, k)
                .map_err(|e| fail(format!("utility sets: {e}")))?;
            Ok(QuerySupervision { query_id: qid.to_string(), quality, utility })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(em: u8, f1: f64) -> GenerationOutcome {
        GenerationOutcome { answer: "x".into(), em, f1 }
    }

    fn rec(q: &str, i: usize, em: u8, quality: Option<[u8; 5]>) -> SupervisionRecord {
        SupervisionRecord {
            query_id: q.into(),
            retriever_id: i,
            quality: quality.map(|d| QualityAssessment::from_dimensions(d).unwrap()),
            outcome: outcome(em, f64::from(em)),
        }
    }

    #[test]
    fn utility_examples() {
        let c = UtilityConfig { beta: 0.2, gamma: 0.2 };
        assert!((utility_score(&outcome(1, 1.0), 0.5, c) - 1.3).abs() < 1e-15);
        assert_eq!(utility_score(&outcome(0, 0.0), 0.0, c), 0.0);
        assert!((utility_score(&outcome(0, 0.5), 0.4, c) - 0.18).abs() < 1e-15);
    }

    #[test]
    fn sigma_examples() {
        let rs: Vec<_> = [1, 0, 1, 0].iter().map(|&e| rec("q", 1, e, None)).collect();
        assert_eq!(global_correctness(&rs).unwrap(), 0.5);
        let all: Vec<_> = (0..3).map(|_| rec("q", 1, 1, None)).collect();
        assert_eq!(global_correctness(&all).unwrap(), 1.0);
        let mut rev = rs.clone();
        rev.reverse();
        assert_eq!(global_correctness(&rev).unwrap(), global_correctness(&rs).unwrap());
        assert!(global_correctness(&[]).is_err());
    }

    #[test]
    fn contrast_set_examples() {
        let scores: BTreeMap<usize, f64> = [(1, 4.2), (2, 3.9), (3, 3.9), (4, 1.0)].into();
        let elig: BTreeSet<usize> = (1..=4).collect();
        let s = build_contrast_sets(&scores, &elig, 2).unwrap();
        assert_eq!(s.positives, vec![1, 2]);
        assert_eq!(s.negatives, vec![3, 4]);

        let scores: BTreeMap<usize, f64> = [(0, 1.3), (1, 0.2), (2, 0.18)].into();
        let elig: BTreeSet<usize> = (0..=2).collect();
        assert_eq!(build_contrast_sets(&scores, &elig, 2).unwrap().positives, vec![0, 1]);

        let elig: BTreeSet<usize> = [1, 2].into();
        assert!(build_contrast_sets(&scores, &elig, 2).is_err());
        assert!(build_contrast_sets(&scores, &(0..=2).collect(), 0).is_err());
    }

    #[test]
    fn record_line_round_trip_and_validation() {
        let r = rec("q1", 2, 1, Some([5, 4, 4, 3, 4]));
        let line = r.to_line().unwrap();
        assert!(line.contains("\"relevance_score\":5"));
        assert_eq!(SupervisionRecord::parse_line(&line).unwrap(), r);

        let r0 = rec("q1", 0, 0, None);
        assert!(r0.to_line().unwrap().contains("\"quality\":null"));
        let bad = rec("q1", 0, 0, Some([1, 1, 1, 1, 1]));
        assert!(bad.to_line().is_err());
        let mut bad = rec("q1", 1, 1, None);
        bad.outcome.f1 = 0.5;
        assert!(bad.validate().is_err());
        let line = r#"{"query_id":"q","retriever_id":1,"quality":null,"outcome":{"answer":"a","em":2,"f1":0}}"#;
        assert!(SupervisionRecord::parse_line(line).is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let rs = vec![rec("a", 0, 1, None), rec("a", 1, 0, Some([2, 2, 3, 3, 1]))];
        let mut buf = Vec::new();
        write_supervision_jsonl(&rs, &mut buf).unwrap();
        let back = read_supervision_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back, rs);
        let err = read_supervision_jsonl("{}\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 1"));
    }

    #[test]
    fn query_supervision_builds_both_kinds() {
        let mut rs = Vec::new();
        for (q, ems) in [("qa", [1, 0, 0, 1]), ("qb", [0, 1, 0, 0])] {
            for (i, &em) in ems.iter().enumerate() {
                let quality = (i > 0).then(|| [i as u8 + 1; 5]);
                rs.push(rec(q, i, em, quality));
            }
        }
        let sup = build_query_supervision(&rs, 4, 2, UtilityConfig::default()).unwrap();
        assert_eq!(sup.len(), 2);
        assert_eq!(sup[0].query_id, "qa");
        // quality: overall 2,3,4 for retrievers 1,2,3
        assert_eq!(sup[0].quality.positives, vec![2, 3]);
        assert_eq!(sup[0].quality.negatives, vec![1]);
        // utility for qa: R0 and R3 correct
        assert_eq!(sup[0].utility.positives, vec![0, 3]);
        assert!(!sup[0].utility.candidates().any(|c| c > 3));
    }

    #[test]
    fn missing_quality_is_reported_with_query_id() {
        let rs = vec![
            rec("qa", 0, 1, None),
            rec("qa", 1, 0, Some([3; 5])),
            rec("qa", 2, 0, None),
            rec("qa", 3, 0, Some([3; 5])),
        ];
        let err = build_query_supervision(&rs, 4, 2, UtilityConfig::default()).unwrap_err();
        match err {
            Error::ContrastSet { query_id, .. } => assert_eq!(query_id, "qa"),
            other => panic!("{other}"),
        }
    }
}
