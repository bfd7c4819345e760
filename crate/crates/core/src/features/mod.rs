//! Ranking features: taxonomy similarity, trigram-hash semantic cosine and
//! TF-IDF cosine against questions and answers, plus contextual copies
//! computed on the context-expanded query and candidate.

mod lexical;
mod semantic;
mod taxonomy;

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::kb::{KbError, KnowledgeBase, QaPair, QueryContext};
use crate::text::{Analyzer, Lexicon, SynonymMap, TokenStream};

pub use lexical::{tfidf_feature, wordnet_feature, IdfParseError, IdfTable};
pub use semantic::{
    semantic_similarity, semantic_tokens, semantic_vector, trigram_bucket, trigrams,
    DimensionMismatch, SemanticVector, SEMANTIC_DIM,
};
pub use taxonomy::{Taxonomy, TaxonomyError};

pub const FEATURE_COUNT: usize = 13;

/// Fixed-order named features fed to the ranker.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FeatureVector {
    pub wn_q: f64,
    pub wn_a: f64,
    pub sem_q: f64,
    pub sem_a: f64,
    pub tfidf_q: f64,
    pub tfidf_a: f64,
    pub retrieval_score: f64,
    pub wn_qc: f64,
    pub wn_ac: f64,
    pub sem_qc: f64,
    pub sem_ac: f64,
    pub tfidf_qc: f64,
    pub tfidf_ac: f64,
}

impl FeatureVector {
    pub const NAMES: [&'static str; FEATURE_COUNT] = [
        "wnQ",
        "wnA",
        "semQ",
        "semA",
        "tfidfQ",
        "tfidfA",
        "retrievalScore",
        "wnQc",
        "wnAc",
        "semQc",
        "semAc",
        "tfidfQc",
        "tfidfAc",
    ];

    pub fn to_array(&self) -> [f64; FEATURE_COUNT] {
        [
            self.wn_q,
            self.wn_a,
            self.sem_q,
            self.sem_a,
            self.tfidf_q,
            self.tfidf_a,
            self.retrieval_score,
            self.wn_qc,
            self.wn_ac,
            self.sem_qc,
            self.sem_ac,
            self.tfidf_qc,
            self.tfidf_ac,
        ]
    }

    pub fn from_array(v: [f64; FEATURE_COUNT]) -> Self {
        Self {
            wn_q: v[0],
            wn_a: v[1],
            sem_q: v[2],
            sem_a: v[3],
            tfidf_q: v[4],
            tfidf_a: v[5],
            retrieval_score: v[6],
            wn_qc: v[7],
            wn_ac: v[8],
            sem_qc: v[9],
            sem_ac: v[10],
            tfidf_qc: v[11],
            tfidf_ac: v[12],
        }
    }

    pub fn names() -> Vec<String> {
        Self::NAMES.iter().map(|s| String::from(*s)).collect()
    }
}

/// A text analyzed both ways: lemmas for lexical features, trigram vector
/// for the semantic one.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedText {
    pub tokens: TokenStream,
    pub vector: SemanticVector,
}

impl PreparedText {
    pub fn query(text: &str, analyzer: &Analyzer, lexicon: &Lexicon) -> Self {
        Self {
            tokens: analyzer.normalize(text, lexicon),
            vector: semantic_vector(text),
        }
    }

    pub fn document(text: &str, analyzer: &Analyzer, synonyms: &SynonymMap) -> Self {
        Self {
            tokens: analyzer.analyze(text, synonyms),
            vector: semantic_vector(text),
        }
    }
}

/// Candidate QA analyzed once per KB snapshot: plain and parent-augmented.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedQa {
    pub questions: Vec<PreparedText>,
    pub answer: PreparedText,
    pub ctx_questions: Vec<PreparedText>,
    pub ctx_answer: PreparedText,
}

impl PreparedQa {
    pub fn new(
        qa: &QaPair,
        kb: &KnowledgeBase,
        analyzer: &Analyzer,
        synonyms: &SynonymMap,
    ) -> Result<Self, KbError> {
        let doc = |t: &str| PreparedText::document(t, analyzer, synonyms);
        let modified = expand_candidate(qa, kb)?;
        Ok(Self {
            questions: qa.questions().map(doc).collect(),
            answer: doc(&qa.answer),
            ctx_questions: modified.questions().map(doc).collect(),
            ctx_answer: doc(&modified.answer),
        })
    }
}

/// Shared, read-only inputs of every feature computation.
#[derive(Debug, Clone, Copy)]
pub struct FeatureResources<'a> {
    pub taxonomy: &'a Taxonomy,
    pub local_idf: &'a IdfTable,
    pub global_idf: &'a IdfTable,
}

#[derive(Debug, Clone, Copy, Default)]
struct Triple {
    wn: f64,
    sem: f64,
    tfidf: f64,
}

fn compare(query: &PreparedText, target: &PreparedText, res: &FeatureResources<'_>) -> Triple {
    Triple {
        wn: wordnet_feature(
            &query.tokens,
            &target.tokens,
            res.taxonomy,
            res.local_idf,
            res.global_idf,
        ),
        // Both vectors come from semantic_vector, so dimensions always agree.
        sem: semantic_similarity(&query.vector, &target.vector).unwrap_or(0.0),
        tfidf: tfidf_feature(&query.tokens, &target.tokens, res.local_idf, res.global_idf),
    }
}

/// Each feature maximized independently over the question variants.
fn best_question(query: &PreparedText, questions: &[PreparedText], res: &FeatureResources<'_>) -> Triple {
    let mut best = Triple {
        wn: 0.0,
        sem: -1.0,
        tfidf: 0.0,
    };
    for q in questions {
        let t = compare(query, q, res);
        best.wn = best.wn.max(t.wn);
        best.sem = best.sem.max(t.sem);
        best.tfidf = best.tfidf.max(t.tfidf);
    }
    if questions.is_empty() {
        best.sem = 0.0;
    }
    best
}

/// Features of one candidate from prepared inputs.
pub fn featurize_prepared(
    query: &PreparedText,
    ctx_query: &PreparedText,
    candidate: &PreparedQa,
    retrieval_score: f64,
    res: &FeatureResources<'_>,
) -> FeatureVector {
    let q = best_question(query, &candidate.questions, res);
    let a = compare(query, &candidate.answer, res);
    let qc = best_question(ctx_query, &candidate.ctx_questions, res);
    let ac = compare(ctx_query, &candidate.ctx_answer, res);
    FeatureVector {
        wn_q: q.wn,
        wn_a: a.wn,
        sem_q: q.sem,
        sem_a: a.sem,
        tfidf_q: q.tfidf,
        tfidf_a: a.tfidf,
        retrieval_score,
        wn_qc: qc.wn,
        wn_ac: ac.wn,
        sem_qc: qc.sem,
        sem_ac: ac.sem,
        tfidf_qc: qc.tfidf,
        tfidf_ac: ac.tfidf,
    }
}

/// Everything `featurize` needs about the KB and the analyzer.
pub struct FeatureInputs<'a> {
    pub kb: &'a KnowledgeBase,
    pub analyzer: &'a Analyzer,
    pub lexicon: &'a Lexicon,
    pub taxonomy: &'a Taxonomy,
    pub global_idf: &'a IdfTable,
}

/// Full feature vector for one (query, candidate) pair.
pub fn featurize(
    query: &str,
    ctx: &QueryContext,
    candidate: &QaPair,
    retrieval_score: f64,
    inputs: &FeatureInputs<'_>,
) -> Result<FeatureVector, KbError> {
    let local = IdfTable::local(inputs.kb.local_idf());
    let res = FeatureResources {
        taxonomy: inputs.taxonomy,
        local_idf: &local,
        global_idf: inputs.global_idf,
    };
    let syn = inputs.lexicon.synonyms();
    let prepared_qa = PreparedQa::new(candidate, inputs.kb, inputs.analyzer, syn)?;
    let q = PreparedText::query(query, inputs.analyzer, inputs.lexicon);
    let cq_text = expand_query(query, ctx);
    let cq = PreparedText::query(&cq_text, inputs.analyzer, inputs.lexicon);
    Ok(featurize_prepared(&q, &cq, &prepared_qa, retrieval_score, &res))
}

/// `previous answer + " " + query` when the context carries an answer.
pub fn expand_query(query: &str, ctx: &QueryContext) -> String {
    match &ctx.previous_answer {
        Some(prev) if !prev.is_empty() => {
            let mut s = String::with_capacity(prev.len() + 1 + query.len());
            s.push_str(prev);
            s.push(' ');
            s.push_str(query);
            s
        }
        _ => String::from(query),
    }
}

/// Candidate with its immediate parent's question and answer prepended.
pub fn expand_candidate(candidate: &QaPair, kb: &KnowledgeBase) -> Result<QaPair, KbError> {
    let mut out = candidate.clone();
    if let Some(parent) = kb.parent_of(candidate)? {
        out.question = join(&parent.question, &candidate.question);
        out.answer = join(&parent.answer, &candidate.answer);
    }
    Ok(out)
}

fn join(a: &str, b: &str) -> String {
    let mut s = String::from(a);
    s.push(' ');
    s.push_str(b);
    s
}

/// Context expansion of both sides of a (query, candidate) pair.
pub fn contextual_expand(
    query: &str,
    ctx: &QueryContext,
    candidate: &QaPair,
    kb: &KnowledgeBase,
) -> Result<(String, QaPair), KbError> {
    Ok((expand_query(query, ctx), expand_candidate(candidate, kb)?))
}
