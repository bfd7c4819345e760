//! Inverted index with field-weighted TF-IDF scoring and query-side fuzzy
//! expansion.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::{KnowledgeBase, QaId};
use crate::text::{damerau_levenshtein, distance_bound, Analyzer, TokenStream, Vocabulary};

/// Hard cap on candidates handed to the re-ranker.
pub const MAX_RETRIEVE: usize = 100;

/// Score multiplier for terms reached through fuzzy expansion.
pub const FUZZY_DISCOUNT: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IndexError {
    #[error("cannot index an empty knowledge base")]
    EmptyKb,
    #[error("k must be within 1..={MAX_RETRIEVE}, got {0}")]
    KOutOfRange(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Question,
    Alternate,
    Answer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldWeights {
    pub question: f64,
    pub alternate: f64,
    pub answer: f64,
}

impl Default for FieldWeights {
    fn default() -> Self {
        Self {
            question: 2.0,
            alternate: 2.0,
            answer: 1.0,
        }
    }
}

impl FieldWeights {
    pub fn get(&self, field: Field) -> f64 {
        match field {
            Field::Question => self.question,
            Field::Alternate => self.alternate,
            Field::Answer => self.answer,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Posting {
    pub qa_id: QaId,
    pub field: Field,
    pub term_frequency: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub qa_id: QaId,
    pub score: f64,
}

/// Immutable once built; rebuilt from the KB snapshot rather than persisted.
#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    postings: BTreeMap<String, Vec<Posting>>,
    doc_lengths: BTreeMap<QaId, u32>,
    vocabulary: Vocabulary,
    idf: BTreeMap<String, f64>,
    weights: FieldWeights,
}

impl InvertedIndex {
    pub fn build(kb: &KnowledgeBase, analyzer: &Analyzer) -> Result<Self, IndexError> {
        if kb.is_empty() {
            return Err(IndexError::EmptyKb);
        }
        let syn = kb.synonym_map(analyzer);
        let mut tf: BTreeMap<(String, QaId, Field), u32> = BTreeMap::new();
        let mut doc_lengths = BTreeMap::new();
        for qa in kb.qa_pairs() {
            let mut len = 0u32;
            let fields = core::iter::once((Field::Question, qa.question.as_str()))
                .chain(qa.alternate_questions.iter().map(|a| (Field::Alternate, a.as_str())))
                .chain(core::iter::once((Field::Answer, qa.answer.as_str())));
            for (field, text) in fields {
                for lemma in analyzer.analyze(text, &syn).lemmas() {
                    *tf.entry((lemma.into(), qa.id, field)).or_insert(0) += 1;
                    len += 1;
                }
            }
            doc_lengths.insert(qa.id, len);
        }
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut vocabulary = Vocabulary::new();
        // BTreeMap key order gives postings sorted by (qaId, field).
        for ((lemma, qa_id, field), term_frequency) in tf {
            vocabulary.insert(&lemma, term_frequency);
            postings.entry(lemma).or_default().push(Posting {
                qa_id,
                field,
                term_frequency,
            });
        }
        Ok(Self {
            postings,
            doc_lengths,
            vocabulary,
            idf: kb.local_idf().clone(),
            weights: FieldWeights::default(),
        })
    }

    pub fn postings(&self, lemma: &str) -> &[Posting] {
        self.postings.get(lemma).map_or(&[], Vec::as_slice)
    }

    pub fn all_postings(&self) -> &BTreeMap<String, Vec<Posting>> {
        &self.postings
    }

    pub fn doc_lengths(&self) -> &BTreeMap<QaId, u32> {
        &self.doc_lengths
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn weights(&self) -> FieldWeights {
        self.weights
    }

    pub fn idf(&self, lemma: &str) -> f64 {
        self.idf.get(lemma).copied().unwrap_or(0.0)
    }

    /// Index terms a query lemma contributes through, with their multiplier.
    pub fn expand(&self, lemma: &str) -> Vec<(&str, f64)> {
        if let Some((k, _)) = self.postings.get_key_value(lemma) {
            return alloc::vec![(k.as_str(), 1.0)];
        }
        let bound = distance_bound(lemma);
        let len = lemma.chars().count();
        self.postings
            .keys()
            .filter(|w| w.chars().count().abs_diff(len) <= bound)
            .filter(|w| damerau_levenshtein(lemma, w) <= bound)
            .map(|w| (w.as_str(), FUZZY_DISCOUNT))
            .collect()
    }

    /// Score of every QA with a non-zero match.
    pub fn score_all(&self, query: &TokenStream) -> BTreeMap<QaId, f64> {
        let mut acc: BTreeMap<QaId, f64> = BTreeMap::new();
        for lemma in query.lemmas() {
            for (term, scale) in self.expand(lemma) {
                let idf = self.idf(term);
                for p in self.postings(term) {
                    let w = self.weights.get(p.field);
                    *acc.entry(p.qa_id).or_insert(0.0) += w * p.term_frequency as f64 * idf * scale;
                }
            }
        }
        acc.retain(|_, s| *s > 0.0);
        acc
    }

    /// Top-`k` QAs by score, ties broken by lower id; zero scores omitted.
    pub fn retrieve(&self, query: &TokenStream, k: usize) -> Result<Vec<Hit>, IndexError> {
        if !(1..=MAX_RETRIEVE).contains(&k) {
            return Err(IndexError::KOutOfRange(k));
        }
        let mut hits: Vec<Hit> = self
            .score_all(query)
            .into_iter()
            .map(|(qa_id, score)| Hit { qa_id, score })
            .collect();
        hits.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.qa_id.cmp(&b.qa_id)));
        hits.truncate(k);
        Ok(hits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{Persona, QaPair};
    use alloc::vec;

    fn one_qa() -> (KnowledgeBase, Analyzer) {
        let a = Analyzer::bundled();
        let kb = KnowledgeBase::new(
            "kb",
            "t",
            Persona::None,
            vec![],
            vec![QaPair::new(1, "price of table", "ten dollars")],
            &a,
        );
        (kb, a)
    }

    fn query(a: &Analyzer, text: &str) -> TokenStream {
        a.analyze(text, &Default::default())
    }

    #[test]
    fn postings_of_single_pair() {
        let (kb, a) = one_qa();
        let idx = InvertedIndex::build(&kb, &a).unwrap();
        let p = |qa_id, field| vec![Posting { qa_id, field, term_frequency: 1 }];
        assert_eq!(idx.postings("price"), p(1, Field::Question).as_slice());
        assert_eq!(idx.postings("table"), p(1, Field::Question).as_slice());
        assert_eq!(idx.postings("dollar"), p(1, Field::Answer).as_slice());
        assert_eq!(idx.doc_lengths()[&1], 4);
    }

    #[test]
    fn price_query_score() {
        let (kb, a) = one_qa();
        let idx = InvertedIndex::build(&kb, &a).unwrap();
        let hits = idx.retrieve(&query(&a, "price"), 10).unwrap();
        assert_eq!(hits, [Hit { qa_id: 1, score: 2.0 * 1.0 * kb.local_idf()["price"] }]);
    }

    #[test]
    fn no_overlap_is_empty_and_k_checked() {
        let (kb, a) = one_qa();
        let idx = InvertedIndex::build(&kb, &a).unwrap();
        assert!(idx.retrieve(&query(&a, "refund"), 10).unwrap().is_empty());
        assert_eq!(idx.retrieve(&query(&a, "price"), 0), Err(IndexError::KOutOfRange(0)));
        assert_eq!(idx.retrieve(&query(&a, "price"), 101), Err(IndexError::KOutOfRange(101)));
    }

    #[test]
    fn fuzzy_expansion_halves_contribution() {
        let (kb, a) = one_qa();
        let idx = InvertedIndex::build(&kb, &a).unwrap();
        let exact = idx.retrieve(&query(&a, "table"), 10).unwrap();
        let fuzzy = idx.retrieve(&query(&a, "tabel"), 10).unwrap();
        assert_eq!(exact.len(), fuzzy.len());
        assert_eq!(exact[0].qa_id, fuzzy[0].qa_id);
        assert_eq!(fuzzy[0].score, exact[0].score * 0.5);
    }

    #[test]
    fn empty_kb_rejected() {
        let a = Analyzer::bundled();
        let kb = KnowledgeBase::new("kb", "t", Persona::None, vec![], vec![], &a);
        assert_eq!(InvertedIndex::build(&kb, &a), Err(IndexError::EmptyKb));
    }
}
