//! The runtime answer pipeline over one KB snapshot.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::active::{detect_disagreement, ActiveConfig, Disagreement};
use crate::bundled;
use crate::chitchat::{ChitChatIndex, Domain, DomainDecision, DEFAULT_MARGIN};
use crate::features::{
    expand_query, featurize_prepared, FeatureResources, FeatureVector, IdfTable, PreparedQa, PreparedText, Taxonomy,
};
use crate::index::{Hit, IndexError, InvertedIndex, MAX_RETRIEVE};
use crate::kb::{KbError, KnowledgeBase, Persona, QaId, QueryContext};
use crate::ranker::{apply_threshold, rank_candidates, Candidate, GbdtModel, RankedAnswer, RankerError, DEFAULT_NO_ANSWER_THRESHOLD};
use crate::text::{detect_language, Analyzer, Lexicon, TextError};

pub const DEFAULT_MAX_TOP: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Ranker(#[from] RankerError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error("malformed context: {0}")]
    BadContext(String),
    #[error("top must be within 1..={max}, got {top}")]
    BadTop { top: usize, max: usize },
    #[error("score threshold must be within [0, 1], got {0}")]
    BadThreshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EngineConfig {
    pub no_answer_threshold: f64,
    pub chitchat_margin: f64,
    pub max_top: usize,
    pub active: ActiveConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            no_answer_threshold: DEFAULT_NO_ANSWER_THRESHOLD,
            chitchat_margin: DEFAULT_MARGIN,
            max_top: DEFAULT_MAX_TOP,
            active: ActiveConfig::default(),
        }
    }
}

/// A KB together with everything derived from it for querying. Built once
/// per KB revision and shared read-only afterwards.
#[derive(Debug, Clone)]
pub struct KbSnapshot {
    kb: KnowledgeBase,
    index: InvertedIndex,
    lexicon: Lexicon,
    local_idf: IdfTable,
    prepared: BTreeMap<QaId, PreparedQa>,
}

impl KbSnapshot {
    pub fn build(kb: KnowledgeBase, analyzer: &Analyzer) -> Result<Self, EngineError> {
        let index = InvertedIndex::build(&kb, analyzer)?;
        let synonyms = kb.synonym_map(analyzer);
        let mut prepared = BTreeMap::new();
        for qa in kb.qa_pairs() {
            prepared.insert(qa.id, PreparedQa::new(qa, &kb, analyzer, &synonyms)?);
        }
        let lexicon = analyzer.lexicon(kb.vocabulary(), synonyms);
        let local_idf = IdfTable::local(kb.local_idf());
        Ok(Self {
            kb,
            index,
            lexicon,
            local_idf,
            prepared,
        })
    }

    pub fn kb(&self) -> &KnowledgeBase {
        &self.kb
    }

    pub fn index(&self) -> &InvertedIndex {
        &self.index
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum AnswerKind {
    Kb,
    Chitchat,
    NoAnswer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Answer {
    pub kind: AnswerKind,
    pub answers: Vec<RankedAnswer>,
    /// Arbitration outcome; absent when the KB has no persona.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainDecision>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disagreement: Option<Disagreement>,
}

impl Answer {
    pub fn top(&self) -> &RankedAnswer {
        &self.answers[0]
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnswerOptions {
    pub top: Option<usize>,
    pub score_threshold: Option<f64>,
}

/// Shared language resources plus the ranking model.
#[derive(Debug, Clone)]
pub struct Engine {
    pub analyzer: Analyzer,
    pub taxonomy: Taxonomy,
    pub global_idf: IdfTable,
    pub chitchat: ChitChatIndex,
    pub model: GbdtModel,
    pub config: EngineConfig,
}

impl Engine {
    /// Engine over the bundled analyzer, taxonomy and global IDF table.
    pub fn bundled(model: GbdtModel, chitchat: ChitChatIndex, config: EngineConfig) -> Self {
        Self {
            analyzer: Analyzer::bundled(),
            taxonomy: bundled_taxonomy(),
            global_idf: bundled_global_idf(),
            chitchat,
            model,
            config,
        }
    }

    /// With a persona set, small-talk words join the spelling dictionary so
    /// that they are not corrected into KB terms.
    pub fn snapshot(&self, kb: KnowledgeBase) -> Result<KbSnapshot, EngineError> {
        let chat = kb.persona != Persona::None && !self.chitchat.is_empty();
        let mut snap = KbSnapshot::build(kb, &self.analyzer)?;
        if chat {
            snap.lexicon.extend_spelling(&self.chitchat.vocabulary());
        }
        Ok(snap)
    }

    /// Fills `previous_answer` from `previous_qa_id` and rejects contexts
    /// that contradict the KB.
    pub fn resolve_context(&self, snap: &KbSnapshot, ctx: &QueryContext) -> Result<QueryContext, EngineError> {
        let mut out = ctx.clone();
        if let Some(id) = ctx.previous_qa_id {
            let qa = snap
                .kb
                .get(id)
                .ok_or_else(|| EngineError::BadContext(alloc::format!("previousQaId {id} is not in the KB")))?;
            match &ctx.previous_answer {
                Some(a) if a != &qa.answer => {
                    return Err(EngineError::BadContext(alloc::format!(
                        "previousAnswer does not match QAPair {id}"
                    )))
                }
                _ => out.previous_answer = Some(qa.answer.clone()),
            }
        }
        Ok(out)
    }

    /// Candidate hits for a query: retrieval on the query and on its
    /// context expansion, plus the children of the previous QA. The previous
    /// QA itself is never offered again in the same thread.
    pub fn candidate_hits(&self, snap: &KbSnapshot, query: &PreparedText, ctx_query: &PreparedText, ctx: &QueryContext) -> Result<Vec<Hit>, EngineError> {
        let k = snap.kb.len().clamp(1, MAX_RETRIEVE);
        let mut merged: BTreeMap<QaId, f64> = BTreeMap::new();
        let mut add = |hits: Vec<Hit>| {
            for h in hits {
                let e = merged.entry(h.qa_id).or_insert(0.0);
                *e = e.max(h.score);
            }
        };
        add(snap.index.retrieve(&query.tokens, k)?);
        if !ctx.is_empty() {
            add(snap.index.retrieve(&ctx_query.tokens, k)?);
        }
        if let Some(prev) = ctx.previous_qa_id {
            for c in snap.kb.children_of(prev) {
                merged.entry(c.id).or_insert(0.0);
            }
            merged.remove(&prev);
        }
        let mut hits: Vec<Hit> = merged.into_iter().map(|(qa_id, score)| Hit { qa_id, score }).collect();
        hits.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.qa_id.cmp(&b.qa_id)));
        hits.truncate(MAX_RETRIEVE);
        Ok(hits)
    }

    fn prepare(&self, snap: &KbSnapshot, question: &str, ctx: &QueryContext) -> (PreparedText, PreparedText) {
        let q = PreparedText::query(question, &self.analyzer, &snap.lexicon);
        let cq = PreparedText::query(&expand_query(question, ctx), &self.analyzer, &snap.lexicon);
        (q, cq)
    }

    fn features(&self, snap: &KbSnapshot, q: &PreparedText, cq: &PreparedText, qa: QaId, retrieval: f64) -> Result<FeatureVector, EngineError> {
        let res = FeatureResources {
            taxonomy: &self.taxonomy,
            local_idf: &snap.local_idf,
            global_idf: &self.global_idf,
        };
        let p = snap.prepared.get(&qa).ok_or(KbError::MissingQa(qa))?;
        Ok(featurize_prepared(q, cq, p, retrieval, &res))
    }

    /// Featurized candidates for a query, in hit order.
    pub fn candidates(&self, snap: &KbSnapshot, question: &str, ctx: &QueryContext) -> Result<Vec<Candidate>, EngineError> {
        let ctx = self.resolve_context(snap, ctx)?;
        let (q, cq) = self.prepare(snap, question, &ctx);
        let hits = self.candidate_hits(snap, &q, &cq, &ctx)?;
        let top = hits.first().map_or(0.0, |h| h.score);
        hits.iter()
            .map(|h| {
                let r = if top > 0.0 { h.score / top } else { 0.0 };
                let answer_text = snap.kb.get(h.qa_id).ok_or(KbError::MissingQa(h.qa_id))?.answer.clone();
                Ok(Candidate {
                    qa_id: h.qa_id,
                    features: self.features(snap, &q, &cq, h.qa_id, r)?,
                    answer_text,
                })
            })
            .collect()
    }

    /// Features of chosen QAs whether or not retrieval reached them; a QA
    /// outside the candidate set gets a zero retrieval score.
    pub fn featurize_pairs(&self, snap: &KbSnapshot, question: &str, ctx: &QueryContext, qa_ids: &[QaId]) -> Result<Vec<FeatureVector>, EngineError> {
        let ctx = self.resolve_context(snap, ctx)?;
        let (q, cq) = self.prepare(snap, question, &ctx);
        let hits = self.candidate_hits(snap, &q, &cq, &ctx)?;
        let top = hits.first().map_or(0.0, |h| h.score);
        qa_ids
            .iter()
            .map(|&id| {
                let r = hits
                    .iter()
                    .find(|h| h.qa_id == id)
                    .map_or(0.0, |h| if top > 0.0 { h.score / top } else { 0.0 });
                self.features(snap, &q, &cq, id, r)
            })
            .collect()
    }

    /// Full answer pipeline: normalize, retrieve, featurize, rank, arbitrate
    /// against small talk, then threshold.
    pub fn answer(&self, snap: &KbSnapshot, question: &str, ctx: &QueryContext, opts: &AnswerOptions) -> Result<Answer, EngineError> {
        let max = self.config.max_top;
        let top = opts.top.unwrap_or(1);
        if top == 0 || top > max {
            return Err(EngineError::BadTop { top, max });
        }
        let threshold = opts.score_threshold.unwrap_or(self.config.no_answer_threshold);
        if !(0.0..=1.0).contains(&threshold) {
            return Err(EngineError::BadThreshold(threshold));
        }
        detect_language(question)?;
        let resolved = self.resolve_context(snap, ctx)?;

        let ranked = rank_candidates(&self.model, self.candidates(snap, question, &resolved)?)?;
        let kb_top = ranked.first().map_or(0.0, |r| r.score);
        let disagreement = detect_disagreement(&ranked, &self.config.active);

        // A pending follow-up turn belongs to the KB.
        let follow_up = resolved
            .previous_qa_id
            .is_some_and(|p| snap.kb.children_of(p).next().is_some());
        let persona = snap.kb.persona;
        let domain = (persona != Persona::None && !self.chitchat.is_empty() && !follow_up)
            .then(|| self.chitchat.classify_domain(question, kb_top, self.config.chitchat_margin, &self.analyzer));
        if let Some(d) = domain.as_ref().filter(|d| d.label == Domain::Chitchat) {
            if let Ok(chat) = self.chitchat.chitchat_answer(question, persona, &self.analyzer) {
                let reply = RankedAnswer {
                    qa_id: None,
                    score: chat.score.clamp(0.0, 1.0),
                    features: FeatureVector::default(),
                    answer_text: chat.response,
                };
                return Ok(Answer {
                    kind: AnswerKind::Chitchat,
                    answers: alloc::vec![reply],
                    domain: Some(d.clone()),
                    disagreement: None,
                });
            }
        }

        let mut answers = apply_threshold(ranked, threshold);
        answers.truncate(top);
        let kind = if answers[0].is_no_answer() {
            AnswerKind::NoAnswer
        } else {
            AnswerKind::Kb
        };
        Ok(Answer {
            kind,
            answers,
            domain,
            disagreement,
        })
    }
}

pub fn bundled_taxonomy() -> Taxonomy {
    Taxonomy::parse(bundled::TAXONOMY).expect("bundled taxonomy is valid")
}

pub fn bundled_global_idf() -> IdfTable {
    IdfTable::parse_global(bundled::GLOBAL_IDF).expect("bundled global IDF is valid")
}
