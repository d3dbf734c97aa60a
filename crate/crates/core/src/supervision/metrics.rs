//! Answer normalization, exact match and token F1.

use std::collections::HashMap;

use crate::error::{Error, Result};

const ARTICLES: [&str; 3] = ["a", "an", "the"];

/// Lowercases, strips ASCII punctuation, drops whole-token articles and
/// collapses whitespace.
pub fn normalize_answer(s: &str) -> String {
    let lowered = s.to_lowercase();
    let no_punct: String = lowered.chars().filter(|c| !c.is_ascii_punctuation()).collect();
    no_punct
        .split_whitespace()
        .filter(|tok| !ARTICLES.contains(tok))
        .collect::<Vec<_>>()
        .join(" ")
}

fn check_golds(golds: &[impl AsRef<str>]) -> Result<()> {
    if golds.is_empty() {
        return Err(Error::Empty("gold answer list".into()));
    }
    Ok(())
}

pub fn exact_match(pred: &str, golds: &[impl AsRef<str>]) -> Result<u8> {
    check_golds(golds)?;
    let p = normalize_answer(pred);
    Ok(u8::from(golds.iter().any(|g| normalize_answer(g.as_ref()) == p)))
}

fn token_f1(pred: &str, gold: &str) -> f64 {
    let p: Vec<&str> = pred.split_whitespace().collect();
    let g: Vec<&str> = gold.split_whitespace().collect();
    if p.is_empty() || g.is_empty() {
        return if p == g { 1.0 } else { 0.0 };
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &g {
        *counts.entry(t).or_insert(0) += 1;
    }
    let mut same = 0usize;
    for t in &p {
        if let Some(c) = counts.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                same += 1;
            }
        }
    }
    if same == 0 {
        return 0.0;
    }
    let precision = same as f64 / p.len() as f64;
    let recall = same as f64 / g.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Max over golds of the token-multiset F1 between normalized strings.
pub fn f1_score(pred: &str, golds: &[impl AsRef<str>]) -> Result<f64> {
    check_golds(golds)?;
    let p = normalize_answer(pred);
    Ok(golds
        .iter()
        .map(|g| token_f1(&p, &normalize_answer(g.as_ref())))
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_examples() {
        assert_eq!(normalize_answer("The Thrift Plant!"), "thrift plant");
        assert_eq!(normalize_answer("Vinegar"), "vinegar");
        assert_eq!(normalize_answer("a  an the"), "");
        assert_eq!(normalize_answer("  Theory of   the Leisure-Class "), "theory of leisureclass");
    }

    #[test]
    fn exact_match_examples() {
        assert_eq!(exact_match("Vinegar", &["Vinegar"]).unwrap(), 1);
        assert_eq!(exact_match("Thistle", &["Thrift"]).unwrap(), 0);
        assert_eq!(exact_match("vinegar.", &["Vinegar"]).unwrap(), 1);
        assert_eq!(exact_match("x", &["y", "X!"]).unwrap(), 1);
        assert!(exact_match("x", &[] as &[&str]).is_err());
    }

    #[test]
    fn f1_examples() {
        let f = f1_score("thrift plant", &["thrift"]).unwrap();
        assert!((f - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(f1_score("the same words", &["The same words"]).unwrap(), 1.0);
        assert_eq!(f1_score("alpha beta", &["gamma delta"]).unwrap(), 0.0);
        assert_eq!(f1_score("the", &["an"]).unwrap(), 1.0);
        assert_eq!(f1_score("the", &["word"]).unwrap(), 0.0);
        assert!(f1_score("x", &[] as &[&str]).is_err());
    }

    #[test]
    fn f1_counts_multiset_overlap() {
        // pred tokens a a b, gold a b b: overlap 2 → P=R=2/3
        let f = f1_score("a1 a1 b1", &["a1 b1 b1"]).unwrap();
        assert!((f - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn f1_takes_max_over_golds() {
        let f = f1_score("red fox", &["blue whale", "red fox"]).unwrap();
        assert_eq!(f, 1.0);
    }
}
