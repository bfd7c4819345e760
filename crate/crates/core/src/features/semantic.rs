use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hash::stable_hash;

/// Number of trigram hash buckets.
pub const SEMANTIC_DIM: usize = 4096;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("vector dimension mismatch: {left} vs {right}")]
pub struct DimensionMismatch {
    pub left: usize,
    pub right: usize,
}

/// Sparse L2-normalized bag of hashed letter trigrams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticVector {
    dim: usize,
    /// (bucket, weight) sorted by bucket, no zero weights.
    entries: Vec<(u32, f64)>,
}

impl SemanticVector {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    /// Builds a vector from raw bucket weights, normalizing to unit length.
    pub fn from_weights(dim: usize, weights: &BTreeMap<u32, f64>) -> Self {
        let norm = libm::sqrt(weights.values().map(|w| w * w).sum::<f64>());
        if norm == 0.0 {
            return Self::zero(dim);
        }
        Self {
            dim,
            entries: weights
                .iter()
                .filter(|(_, &w)| w != 0.0)
                .map(|(&k, &w)| (k, w / norm))
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn dot(&self, other: &Self) -> f64 {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j, mut s) = (0, 0, 0.0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                core::cmp::Ordering::Less => i += 1,
                core::cmp::Ordering::Greater => j += 1,
                core::cmp::Ordering::Equal => {
                    s += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        s
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.entries.iter().map(|(_, w)| w * w).sum())
    }
}

/// Lowercased alphanumeric tokens of `text`.
pub fn semantic_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
        .collect()
}

/// Letter trigrams of `#token#`.
pub fn trigrams(token: &str) -> Vec<String> {
    let padded: Vec<char> = core::iter::once('#')
        .chain(token.chars())
        .chain(core::iter::once('#'))
        .collect();
    padded.windows(3).map(|w| w.iter().collect()).collect()
}

pub fn trigram_bucket(trigram: &str) -> u32 {
    (stable_hash(trigram.as_bytes()) % SEMANTIC_DIM as u64) as u32
}

/// Letter-trigram hashing encoder; the empty text maps to the zero vector.
pub fn semantic_vector(text: &str) -> SemanticVector {
    let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
    for tok in semantic_tokens(text) {
        for tri in trigrams(&tok) {
            *counts.entry(trigram_bucket(&tri)).or_insert(0.0) += 1.0;
        }
    }
    SemanticVector::from_weights(SEMANTIC_DIM, &counts)
}

/// Cosine similarity, 0 when either side is the zero vector.
pub fn semantic_similarity(
    v1: &SemanticVector,
    v2: &SemanticVector,
) -> Result<f64, DimensionMismatch> {
    if v1.dim != v2.dim {
        return Err(DimensionMismatch {
            left: v1.dim,
            right: v2.dim,
        });
    }
    if v1.is_zero() || v2.is_zero() {
        return Ok(0.0);
    }
    let c = v1.dot(v2) / (v1.norm() * v2.norm());
    Ok(c.clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;
    use alloc::vec;

    fn sim(a: &str, b: &str) -> f64 {
        semantic_similarity(&semantic_vector(a), &semantic_vector(b)).unwrap()
    }

    #[test]
    fn identical_text_is_one() {
        assert!((sim("refund policy", "refund policy") - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_trigrams_near_zero() {
        let a: BTreeSet<String> = trigrams("abc").into_iter().collect();
        let b: BTreeSet<String> = trigrams("xyz").into_iter().collect();
        assert!(a.is_disjoint(&b));
        assert!(sim("abc", "xyz") < 0.05);
    }

    #[test]
    fn empty_is_zero_vector() {
        let v = semantic_vector("");
        assert!(v.is_zero());
        assert_eq!(semantic_similarity(&v, &semantic_vector("table")).unwrap(), 0.0);
    }

    #[test]
    fn plural_variant_is_close() {
        // Trigram oracle: 12 vs 13 trigrams with 11 shared -> 11 / sqrt(156).
        let expected = 11.0 / libm::sqrt(12.0 * 13.0);
        let s = sim("price of table", "price of tables");
        assert!(s > 0.8 && s < 1.0);
        assert!((s - expected).abs() < 1e-9, "{s} vs {expected}");
    }

    #[test]
    fn orthogonal_basis_and_dimension_check() {
        let mut w1 = BTreeMap::new();
        w1.insert(3u32, 1.0);
        let mut w2 = BTreeMap::new();
        w2.insert(7u32, 1.0);
        let (a, b) = (
            SemanticVector::from_weights(SEMANTIC_DIM, &w1),
            SemanticVector::from_weights(SEMANTIC_DIM, &w2),
        );
        assert_eq!(semantic_similarity(&a, &b).unwrap(), 0.0);
        assert_eq!(semantic_similarity(&a, &a).unwrap(), 1.0);
        let short = SemanticVector::from_weights(16, &w1);
        assert_eq!(
            semantic_similarity(&a, &short),
            Err(DimensionMismatch { left: SEMANTIC_DIM, right: 16 })
        );
    }

    #[test]
    fn trigram_padding() {
        assert_eq!(trigrams("ab"), vec!["#ab", "ab#"]);
        assert_eq!(trigrams("a"), vec!["#a#"]);
    }
}
