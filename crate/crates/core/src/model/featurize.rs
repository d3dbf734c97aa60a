//! Hashed character n-gram features.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::fnv1a64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeaturizerConfig {
    pub d_feat: usize,
    pub ngram_n: usize,
    pub boundary_char: char,
}

impl Default for FeaturizerConfig {
    fn default() -> Self {
        Self { d_feat: 2048, ngram_n: 3, boundary_char: '#' }
    }
}

impl FeaturizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_feat < 64 {
            return Err(Error::config(format!("d_feat must be >= 64, got {}", self.d_feat)));
        }
        if self.ngram_n < 2 {
            return Err(Error::config(format!("ngram_n must be >= 2, got {}", self.ngram_n)));
        }
        Ok(())
    }
}

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVec {
    dim: usize,
    entries: Vec<(usize, f64)>,
}

impl SparseVec {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(i, v) in &self.entries {
            out[i] = v;
        }
        out
    }
}

/// Slot of every n-gram of `text`, in order of occurrence (with repeats).
pub fn ngram_slots(cfg: &FeaturizerConfig, text: &str) -> Result<Vec<usize>> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(Error::Empty("text to featurize".into()));
    }
    let mut chars = Vec::with_capacity(trimmed.len() + 2);
    chars.push(cfg.boundary_char);
    chars.extend(trimmed.to_lowercase().chars());
    chars.push(cfg.boundary_char);

    let n = cfg.ngram_n.min(chars.len());
    let mut buf = String::new();
    let slots = chars
        .windows(n)
        .map(|w| {
            buf.clear();
            buf.extend(w);
            (fnv1a64(buf.as_bytes()) % cfg.d_feat as u64) as usize
        })
        .collect();
    Ok(slots)
}

/// L2-normalized hashed n-gram counts of `text`.
pub fn featurize(cfg: &FeaturizerConfig, text: &str) -> Result<SparseVec> {
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for slot in ngram_slots(cfg, text)? {
        *counts.entry(slot).or_insert(0.0) += 1.0;
    }
    let norm = counts.values().map(|c| c * c).sum::<f64>().sqrt();
    let entries = counts.into_iter().map(|(i, c)| (i, c / norm)).collect();
    Ok(SparseVec { dim: cfg.d_feat, entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent FNV-1a: byte-at-a-time over u128 with an explicit modulus.
    fn fnv_oracle(s: &str) -> u64 {
        let mut h: u128 = 14695981039346656037;
        for b in s.bytes() {
            h ^= u128::from(b);
            h = (h * 1099511628211) % (1u128 << 64);
        }
        h as u64
    }

    #[test]
    fn trigram_slots_match_oracle() {
        let cfg = FeaturizerConfig::default();
        let slots = ngram_slots(&cfg, "abc").unwrap();
        let expected: Vec<usize> =
            ["#ab", "abc", "bc#"].iter().map(|g| (fnv_oracle(g) % 2048) as usize).collect();
        assert_eq!(slots, expected);
        // frozen oracle values
        assert_eq!(slots, vec![2001, 1867, 675]);
    }

    #[test]
    fn abc_has_three_equal_entries() {
        let v = featurize(&FeaturizerConfig::default(), "abc").unwrap();
        assert_eq!(v.nnz(), 3);
        for &(_, x) in v.entries() {
            assert!((x - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn case_insensitive_and_trimmed() {
        let cfg = FeaturizerConfig::default();
        assert_eq!(featurize(&cfg, "ABC").unwrap(), featurize(&cfg, "abc").unwrap());
        assert_eq!(featurize(&cfg, "  abc\n").unwrap(), featurize(&cfg, "abc").unwrap());
    }

    #[test]
    fn empty_text_is_rejected() {
        let cfg = FeaturizerConfig::default();
        assert!(featurize(&cfg, "").is_err());
        assert!(featurize(&cfg, "   \t").is_err());
    }

    #[test]
    fn short_text_with_long_ngrams_uses_whole_string() {
        let cfg = FeaturizerConfig { d_feat: 64, ngram_n: 5, boundary_char: '#' };
        let slots = ngram_slots(&cfg, "a").unwrap();
        assert_eq!(slots, vec![(fnv_oracle("#a#") % 64) as usize]);
    }

    #[test]
    fn repeated_grams_accumulate() {
        let cfg = FeaturizerConfig::default();
        // "#aa","aaa","aaa","aa#": counts 1,2,1 → norm √6
        let v = featurize(&cfg, "aaaa").unwrap();
        let mut vals: Vec<f64> = v.entries().iter().map(|e| e.1).collect();
        vals.sort_by(f64::total_cmp);
        let s6 = 6f64.sqrt();
        assert_eq!(vals.len(), 3);
        assert!((vals[2] - 2.0 / s6).abs() < 1e-15);
        assert!((vals[0] - 1.0 / s6).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(FeaturizerConfig { d_feat: 32, ..Default::default() }.validate().is_err());
        assert!(FeaturizerConfig { ngram_n: 1, ..Default::default() }.validate().is_err());
        assert!(FeaturizerConfig::default().validate().is_ok());
    }
}
