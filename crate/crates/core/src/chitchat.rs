//! Persona small talk and its arbitration against KB answers.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{semantic_similarity, semantic_vector, tfidf_feature, IdfTable, SemanticVector};
use crate::kb::Persona;
use crate::text::{strip_junk, word_break, Analyzer, Token, TokenStream, Vocabulary};

pub const DEFAULT_MARGIN: f64 = 0.1;
/// Best intent score below which small talk does not answer.
pub const ANSWER_FLOOR: f64 = 0.3;
pub const MIN_BUNDLED_INTENTS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChitChatError {
    #[error("invalid chit-chat corpus: {}", .0.join("; "))]
    InvalidCorpus(Vec<String>),
    #[error("persona {0:?} has no chit-chat responses")]
    UnknownPersona(String),
    #[error("no chit-chat intent matches the query")]
    NoMatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ChitChatIntent {
    pub intent_id: String,
    pub queries: Vec<String>,
    pub responses: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChitChatCorpus {
    pub intents: Vec<ChitChatIntent>,
}

impl ChitChatCorpus {
    /// Violations of the corpus invariants; empty when valid.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        for intent in &self.intents {
            let id = &intent.intent_id;
            if id.trim().is_empty() {
                out.push("intent with empty intentId".to_string());
            }
            if !seen.insert(id.as_str()) {
                out.push(format!("intent {id}: duplicate intentId"));
            }
            if intent.queries.iter().all(|q| q.trim().is_empty()) {
                out.push(format!("intent {id}: no queries"));
            }
            for p in Persona::ALL.iter() {
                if intent.responses.get(p.as_str()).map_or(true, |r| r.trim().is_empty()) {
                    out.push(format!("intent {id}: missing {p} response"));
                }
            }
            for k in intent.responses.keys() {
                if !matches!(k.parse::<Persona>(), Ok(p) if p != Persona::None) {
                    out.push(format!("intent {id}: unknown persona {k:?}"));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), ChitChatError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(ChitChatError::InvalidCorpus(v))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Chitchat,
    Kb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DomainDecision {
    pub label: Domain,
    pub confidence: f64,
    pub chit_top_score: f64,
    pub intent_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ChitChatAnswer {
    pub intent_id: String,
    pub response: String,
    pub score: f64,
}

#[derive(Debug, Clone)]
struct PreparedQuery {
    intent: usize,
    tokens: TokenStream,
    vector: SemanticVector,
}

/// Validated corpus with every intent query analyzed once.
#[derive(Debug, Clone)]
pub struct ChitChatIndex {
    corpus: ChitChatCorpus,
    queries: Vec<PreparedQuery>,
    global_idf: IdfTable,
}

/// Small talk is mostly stop words, so matching lemmatizes but keeps them.
fn chat_tokens(text: &str, analyzer: &Analyzer) -> TokenStream {
    let cleaned = strip_junk(text);
    let tokens = word_break(&cleaned)
        .into_iter()
        .enumerate()
        .map(|(position, w)| {
            let surface = w.to_lowercase();
            Token {
                lemma: analyzer.lemma(&surface),
                surface,
                position,
            }
        })
        .collect();
    TokenStream {
        original: text.to_string(),
        tokens,
    }
}

impl ChitChatIndex {
    /// Intents are kept sorted by id so that score ties resolve to the
    /// smallest id.
    pub fn new(
        mut corpus: ChitChatCorpus,
        analyzer: &Analyzer,
        global_idf: IdfTable,
    ) -> Result<Self, ChitChatError> {
        corpus.validate()?;
        corpus.intents.sort_by(|a, b| a.intent_id.cmp(&b.intent_id));
        let queries = corpus
            .intents
            .iter()
            .enumerate()
            .flat_map(|(i, intent)| {
                intent.queries.iter().filter(|q| !q.trim().is_empty()).map(move |q| (i, q))
            })
            .map(|(intent, q)| PreparedQuery {
                intent,
                tokens: chat_tokens(q, analyzer),
                vector: semantic_vector(q),
            })
            .collect();
        Ok(Self {
            corpus,
            queries,
            global_idf,
        })
    }

    pub fn empty() -> Self {
        Self {
            corpus: ChitChatCorpus::default(),
            queries: Vec::new(),
            global_idf: IdfTable::unit(),
        }
    }

    pub fn corpus(&self) -> &ChitChatCorpus {
        &self.corpus
    }

    pub fn is_empty(&self) -> bool {
        self.corpus.intents.is_empty()
    }

    /// Lemmas of every intent query, with zero counts.
    pub fn vocabulary(&self) -> Vocabulary {
        let mut v = Vocabulary::new();
        for q in &self.queries {
            for t in &q.tokens.tokens {
                v.insert(&t.lemma, 0);
            }
        }
        v
    }

    /// Best `0.5 * semantic + 0.5 * tfidf` over all intent queries, with
    /// the winning intent index.
    pub fn best_intent(&self, query: &str, analyzer: &Analyzer) -> Option<(usize, f64)> {
        let tokens = chat_tokens(query, analyzer);
        let vector = semantic_vector(query);
        let unit = IdfTable::unit();
        let mut best: Option<(usize, f64)> = None;
        for q in &self.queries {
            let sem = semantic_similarity(&vector, &q.vector).unwrap_or(0.0);
            let lex = tfidf_feature(&tokens, &q.tokens, &unit, &self.global_idf);
            let s = 0.5 * sem + 0.5 * lex;
            let better = match best {
                None => true,
                Some((i, b)) => s > b || (s == b && q.intent < i),
            };
            if better {
                best = Some((q.intent, s));
            }
        }
        best
    }

    /// Chit-chat wins only when it beats the KB by more than `margin`.
    pub fn classify_domain(
        &self,
        query: &str,
        kb_top_score: f64,
        margin: f64,
        analyzer: &Analyzer,
    ) -> DomainDecision {
        let best = self.best_intent(query, analyzer);
        let chit = best.map_or(0.0, |b| b.1);
        let label = if best.is_some() && chit > kb_top_score + margin {
            Domain::Chitchat
        } else {
            Domain::Kb
        };
        DomainDecision {
            label,
            confidence: libm::fabs(chit - kb_top_score).clamp(0.0, 1.0),
            chit_top_score: chit,
            intent_id: best.map(|(i, _)| self.corpus.intents[i].intent_id.clone()),
        }
    }

    /// Persona response of the best intent. Selection ignores the persona.
    pub fn chitchat_answer(
        &self,
        query: &str,
        persona: Persona,
        analyzer: &Analyzer,
    ) -> Result<ChitChatAnswer, ChitChatError> {
        if persona == Persona::None {
            return Err(ChitChatError::UnknownPersona(persona.to_string()));
        }
        let (i, score) = self
            .best_intent(query, analyzer)
            .filter(|(_, s)| *s >= ANSWER_FLOOR)
            .ok_or(ChitChatError::NoMatch)?;
        let intent = &self.corpus.intents[i];
        let response = intent
            .responses
            .get(persona.as_str())
            .ok_or_else(|| ChitChatError::UnknownPersona(persona.to_string()))?;
        Ok(ChitChatAnswer {
            intent_id: intent.intent_id.clone(),
            response: response.clone(),
            score,
        })
    }
}
