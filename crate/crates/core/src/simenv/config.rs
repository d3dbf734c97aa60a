use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper tail of the popularity distribution, sampled with its own mass so
/// that questions answerable without retrieval are common enough to learn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopularTail {
    pub cut: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub seed: u64,
    /// Number of real retrievers, not counting the null retriever.
    pub num_retrievers: usize,
    pub num_query_types: usize,
    /// `skill[t][i-1]`: latent quality of retriever `i` on query type `t`.
    pub skill: Vec<Vec<f64>>,
    pub popularity_range: (f64, f64),
    /// `None` draws popularity uniformly over the whole range.
    pub popular_tail: Option<PopularTail>,
    pub noise_sd: f64,
    pub correctness_slope: f64,
    pub correctness_threshold: f64,
    pub n_train: usize,
    pub n_test: usize,
}

impl Default for SimConfig {
    /// The smoke world: every retriever, and the null retriever, is the best
    /// choice for some slice of the queries.
    fn default() -> Self {
        Self {
            seed: 7,
            num_retrievers: 3,
            num_query_types: 3,
            skill: vec![vec![0.9, 0.2, 0.3], vec![0.2, 0.9, 0.3], vec![0.3, 0.2, 0.5]],
            popularity_range: (0.0, 1.0),
            popular_tail: Some(PopularTail { cut: 0.8, fraction: 1.0 / 3.0 }),
            noise_sd: 0.05,
            correctness_slope: 10.0,
            correctness_threshold: 0.5,
            n_train: 2000,
            n_test: 500,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::config(m));
        if self.num_retrievers < 2 {
            return bad(format!("num_retrievers must be >= 2, got {}", self.num_retrievers));
        }
        if self.num_query_types < 2 {
            return bad(format!("num_query_types must be >= 2, got {}", self.num_query_types));
        }
        if self.skill.len() != self.num_query_types {
            return bad(format!("skill has {} rows, expected {}", self.skill.len(), self.num_query_types));
        }
        for (t, row) in self.skill.iter().enumerate() {
            if row.len() != self.num_retrievers {
                return bad(format!("skill row {t} has {} entries, expected {}", row.len(), self.num_retrievers));
            }
            if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return bad(format!("skill row {t} has entry {v} outside [0,1]"));
            }
        }
        let (lo, hi) = self.popularity_range;
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return bad(format!("popularity_range ({lo}, {hi}) must satisfy 0 <= lo <= hi <= 1"));
        }
        if let Some(tail) = self.popular_tail {
            if !(lo..=hi).contains(&tail.cut) || !(0.0..=1.0).contains(&tail.fraction) {
                return bad(format!("popular_tail {tail:?} must have cut in range and fraction in [0,1]"));
            }
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad(format!("noise_sd must be >= 0, got {}", self.noise_sd));
        }
        if !(self.correctness_slope > 0.0 && self.correctness_slope.is_finite()) {
            return bad(format!("correctness_slope must be > 0, got {}", self.correctness_slope));
        }
        if !self.correctness_threshold.is_finite() {
            return bad("correctness_threshold must be finite".into());
        }
        if self.n_train == 0 || self.n_test == 0 {
            return bad("n_train and n_test must be positive".into());
        }
        Ok(())
    }
}
