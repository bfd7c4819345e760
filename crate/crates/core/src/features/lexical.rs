use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use super::Taxonomy;
use crate::text::TokenStream;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("malformed IDF table line {line}: {content:?}")]
pub struct IdfParseError {
    pub line: usize,
    pub content: String,
}

/// Token weights with a fallback for unseen tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct IdfTable {
    values: BTreeMap<String, f64>,
    default: f64,
}

impl IdfTable {
    pub fn new(values: BTreeMap<String, f64>, default: f64) -> Self {
        Self { values, default }
    }

    /// All tokens weigh 1.
    pub fn unit() -> Self {
        Self::new(BTreeMap::new(), 1.0)
    }

    /// KB-local IDFs; tokens outside the KB weigh 1.
    pub fn local(idf: &BTreeMap<String, f64>) -> Self {
        Self::new(idf.clone(), 1.0)
    }

    /// Parses `word TAB idf`; unseen words get the table median.
    pub fn parse_global(src: &str) -> Result<Self, IdfParseError> {
        let mut values = BTreeMap::new();
        for (no, raw) in src.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || IdfParseError {
                line: no + 1,
                content: line.to_string(),
            };
            let (w, v) = line.split_once('\t').ok_or_else(bad)?;
            let v: f64 = v.trim().parse().map_err(|_| bad())?;
            if !v.is_finite() || v < 0.0 || w.trim().is_empty() {
                return Err(bad());
            }
            values.insert(w.trim().to_lowercase(), v);
        }
        let mut sorted: Vec<f64> = values.values().copied().collect();
        sorted.sort_by(f64::total_cmp);
        let default = match sorted.len() {
            0 => 1.0,
            n if n % 2 == 1 => sorted[n / 2],
            n => (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0,
        };
        Ok(Self::new(values, default))
    }

    pub fn get(&self, token: &str) -> f64 {
        self.values.get(token).copied().unwrap_or(self.default)
    }

    pub fn default_value(&self) -> f64 {
        self.default
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn weight(token: &str, local: &IdfTable, global: &IdfTable) -> f64 {
    local.get(token) * global.get(token)
}

/// IDF-weighted mean over query lemmas of the best taxonomy match in `target`.
pub fn wordnet_feature(
    query: &TokenStream,
    target: &TokenStream,
    tax: &Taxonomy,
    local: &IdfTable,
    global: &IdfTable,
) -> f64 {
    if query.is_empty() || target.is_empty() {
        return 0.0;
    }
    let (mut num, mut den) = (0.0, 0.0);
    for q in query.lemmas() {
        let w = weight(q, local, global);
        let best = target
            .lemmas()
            .map(|t| tax.word_sim(q, t))
            .fold(0.0f64, f64::max);
        num += w * best;
        den += w;
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

fn weighted_bag(ts: &TokenStream, local: &IdfTable, global: &IdfTable) -> BTreeMap<String, f64> {
    let mut tf: BTreeMap<String, f64> = BTreeMap::new();
    for l in ts.lemmas() {
        *tf.entry(l.to_string()).or_insert(0.0) += 1.0;
    }
    for (t, v) in tf.iter_mut() {
        *v *= weight(t, local, global);
    }
    tf
}

/// Cosine between TF x local IDF x global IDF bags of lemmas.
pub fn tfidf_feature(
    query: &TokenStream,
    target: &TokenStream,
    local: &IdfTable,
    global: &IdfTable,
) -> f64 {
    if query.is_empty() || target.is_empty() {
        return 0.0;
    }
    let a = weighted_bag(query, local, global);
    let b = weighted_bag(target, local, global);
    let dot: f64 = a
        .iter()
        .filter_map(|(t, x)| b.get(t).map(|y| x * y))
        .sum();
    let na = libm::sqrt(a.values().map(|x| x * x).sum::<f64>());
    let nb = libm::sqrt(b.values().map(|x| x * x).sum::<f64>());
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(0.0, 1.0)
}
