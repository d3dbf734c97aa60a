use std::hint::black_box;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::RouterModel;

/// Per-decision routing latency in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyStats {
    pub min: f64,
    pub avg: f64,
    pub max: f64,
}

impl LatencyStats {
    pub fn from_samples(samples_ms: &[f64]) -> Result<Self> {
        if samples_ms.is_empty() {
            return Err(Error::Empty("latency samples".into()));
        }
        let min = samples_ms.iter().copied().fold(f64::INFINITY, f64::min);
        let max = samples_ms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // clamp guards against the mean rounding just outside [min, max]
        let avg = (samples_ms.iter().sum::<f64>() / samples_ms.len() as f64).clamp(min, max);
        Ok(Self { min, avg, max })
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.min && self.min <= self.avg && self.avg <= self.max && self.max.is_finite()) {
            return Err(Error::schema(format!("latency stats out of order: {self:?}")));
        }
        Ok(())
    }
}

/// Times each routing decision (featurize, encode, fuse, argmax) after
/// `warmup` untimed passes over the queries. Retriever embeddings are
/// cached once up front, as a deployed router would.
pub fn latency_bench(model: &RouterModel, queries: &[impl AsRef<str>], warmup: usize, reps: usize) -> Result<LatencyStats> {
    if queries.is_empty() {
        return Err(Error::Empty("latency query list".into()));
    }
    if reps == 0 {
        return Err(Error::config("reps must be >= 1"));
    }
    let router = model.compile()?;
    for _ in 0..warmup {
        for q in queries {
            black_box(router.route(black_box(q.as_ref()))?);
        }
    }
    let mut samples = Vec::with_capacity(reps * queries.len());
    for _ in 0..reps {
        for q in queries {
            let start = Instant::now();
            black_box(router.route(black_box(q.as_ref()))?);
            samples.push(start.elapsed().as_secs_f64() * 1e3);
        }
    }
    LatencyStats::from_samples(&samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    fn model() -> RouterModel {
        let cfg = ModelConfig { d: 16, heads: 2, ..ModelConfig::default() };
        RouterModel::random(&cfg, RouterModel::default_names(3), 1).unwrap()
    }

    #[test]
    fn single_sample_is_flat() {
        let s = LatencyStats::from_samples(&[0.25]).unwrap();
        assert_eq!((s.min, s.avg, s.max), (0.25, 0.25, 0.25));
    }

    #[test]
    fn single_query_single_rep() {
        let s = latency_bench(&model(), &["who wrote it"], 0, 1).unwrap();
        assert_eq!(s.min, s.avg);
        assert_eq!(s.avg, s.max);
    }

    #[test]
    fn stats_are_ordered() {
        let s = latency_bench(&model(), &["a b c", "longer query text here", "x"], 2, 5).unwrap();
        s.validate().unwrap();
    }

    #[test]
    fn bad_inputs() {
        let none: [&str; 0] = [];
        assert!(latency_bench(&model(), &none, 0, 1).is_err());
        assert!(latency_bench(&model(), &["q"], 0, 0).is_err());
    }
}
