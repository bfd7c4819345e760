//! Knowledge-base domain types and invariants.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{Analyzer, SynonymMap, Vocabulary};

/// Maximum parent -> child -> grandchild depth of multi-turn chains.
pub const MAX_TURN_DEPTH: usize = 3;

pub type QaId = u64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KbError {
    #[error("empty knowledge base")]
    Empty,
    #[error("invalid knowledge base: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("unknown persona {0:?}")]
    UnknownPersona(String),
    #[error("QAPair {0} not found")]
    MissingQa(QaId),
    #[error("QAPair {qa}: dangling parentId {parent}")]
    DanglingParent { qa: QaId, parent: QaId },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct QaPair {
    pub id: QaId,
    pub question: String,
    #[serde(default)]
    pub alternate_questions: Vec<String>,
    pub answer: String,
    #[serde(default)]
    pub parent_id: Option<QaId>,
    #[serde(default)]
    pub source: String,
    #[serde(default)]
    pub metadata: Vec<(String, String)>,
}

impl QaPair {
    pub fn new(id: QaId, question: impl Into<String>, answer: impl Into<String>) -> Self {
        Self {
            id,
            question: question.into(),
            alternate_questions: Vec::new(),
            answer: answer.into(),
            parent_id: None,
            source: "editorial".into(),
            metadata: Vec::new(),
        }
    }

    pub fn with_parent(mut self, parent: QaId) -> Self {
        self.parent_id = Some(parent);
        self
    }

    pub fn with_alternates<I, S>(mut self, alts: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.alternate_questions = alts.into_iter().map(Into::into).collect();
        self
    }

    /// Canonical question followed by alternates.
    pub fn questions(&self) -> impl Iterator<Item = &str> {
        core::iter::once(self.question.as_str())
            .chain(self.alternate_questions.iter().map(String::as_str))
    }

    /// Adds an alternate unless it duplicates the canonical question or an
    /// existing alternate (case-insensitive). Returns whether it was added.
    pub fn add_alternate(&mut self, text: &str) -> bool {
        let text = text.trim();
        if text.is_empty() {
            return false;
        }
        let key = text.to_lowercase();
        if self.questions().any(|q| q.trim().to_lowercase() == key) {
            return false;
        }
        self.alternate_questions.push(text.to_string());
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Persona {
    #[default]
    None,
    Professional,
    Witty,
    Friendly,
    Caring,
    Enthusiastic,
}

impl Persona {
    pub const ALL: [Persona; 5] = [
        Persona::Professional,
        Persona::Witty,
        Persona::Friendly,
        Persona::Caring,
        Persona::Enthusiastic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Persona::None => "none",
            Persona::Professional => "professional",
            Persona::Witty => "witty",
            Persona::Friendly => "friendly",
            Persona::Caring => "caring",
            Persona::Enthusiastic => "enthusiastic",
        }
    }
}

impl fmt::Display for Persona {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Persona {
    type Err = KbError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let p = match s.trim().to_lowercase().as_str() {
            "none" | "" => Persona::None,
            "professional" => Persona::Professional,
            "witty" => Persona::Witty,
            "friendly" => Persona::Friendly,
            "caring" => Persona::Caring,
            "enthusiastic" => Persona::Enthusiastic,
            _ => return Err(KbError::UnknownPersona(s.into())),
        };
        Ok(p)
    }
}

/// Conversation state carried from the previous turn.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QueryContext {
    #[serde(default)]
    pub previous_qa_id: Option<QaId>,
    #[serde(default)]
    pub previous_user_query: Option<String>,
    #[serde(default)]
    pub previous_answer: Option<String>,
}

impl QueryContext {
    /// Context that follows the answer of `qa`.
    pub fn after(qa: &QaPair) -> Self {
        Self {
            previous_qa_id: Some(qa.id),
            previous_user_query: None,
            previous_answer: Some(qa.answer.clone()),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.previous_qa_id.is_none() && self.previous_answer.is_none()
    }
}

/// Immutable KB snapshot. Derived statistics (`local_idf`, `vocabulary`) are
/// recomputed by every constructor and mutation.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBase {
    pub kb_id: String,
    pub name: String,
    pub persona: Persona,
    pub synonyms: Vec<Vec<String>>,
    qa_pairs: Vec<QaPair>,
    local_idf: BTreeMap<String, f64>,
    vocabulary: Vocabulary,
}

impl KnowledgeBase {
    /// Builds a snapshot. Invariants are not enforced here; see [`validate_kb`].
    pub fn new(
        kb_id: impl Into<String>,
        name: impl Into<String>,
        persona: Persona,
        synonyms: Vec<Vec<String>>,
        qa_pairs: Vec<QaPair>,
        analyzer: &Analyzer,
    ) -> Self {
        let mut kb = Self {
            kb_id: kb_id.into(),
            name: name.into(),
            persona,
            synonyms,
            qa_pairs,
            local_idf: BTreeMap::new(),
            vocabulary: Vocabulary::new(),
        };
        kb.refresh(analyzer);
        kb
    }

    fn refresh(&mut self, analyzer: &Analyzer) {
        let syn = analyzer.synonym_map(&self.synonyms);
        let mut vocab = Vocabulary::new();
        for qa in &self.qa_pairs {
            for text in qa_texts(qa) {
                for l in analyzer.analyze(text, &syn).lemmas() {
                    vocab.insert(l, 1);
                }
            }
        }
        self.vocabulary = vocab;
        self.local_idf = idf_of(&self.qa_pairs, analyzer, &syn);
    }

    pub fn qa_pairs(&self) -> &[QaPair] {
        &self.qa_pairs
    }

    pub fn local_idf(&self) -> &BTreeMap<String, f64> {
        &self.local_idf
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn synonym_map(&self, analyzer: &Analyzer) -> SynonymMap {
        analyzer.synonym_map(&self.synonyms)
    }

    pub fn get(&self, id: QaId) -> Option<&QaPair> {
        self.qa_pairs.iter().find(|q| q.id == id)
    }

    pub fn parent_of(&self, qa: &QaPair) -> Result<Option<&QaPair>, KbError> {
        match qa.parent_id {
            None => Ok(None),
            Some(p) => self
                .get(p)
                .map(Some)
                .ok_or(KbError::DanglingParent { qa: qa.id, parent: p }),
        }
    }

    pub fn children_of(&self, id: QaId) -> impl Iterator<Item = &QaPair> {
        self.qa_pairs.iter().filter(move |q| q.parent_id == Some(id))
    }

    pub fn len(&self) -> usize {
        self.qa_pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qa_pairs.is_empty()
    }

    pub fn max_id(&self) -> QaId {
        self.qa_pairs.iter().map(|q| q.id).max().unwrap_or(0)
    }

    /// New snapshot with the given QA list (statistics recomputed).
    pub fn with_qa_pairs(&self, qa_pairs: Vec<QaPair>, analyzer: &Analyzer) -> Self {
        let mut kb = Self {
            qa_pairs,
            ..self.clone()
        };
        kb.refresh(analyzer);
        kb
    }

    pub fn with_settings(
        &self,
        persona: Persona,
        synonyms: Vec<Vec<String>>,
        analyzer: &Analyzer,
    ) -> Self {
        let mut kb = Self {
            persona,
            synonyms,
            ..self.clone()
        };
        kb.refresh(analyzer);
        kb
    }
}

fn qa_texts(qa: &QaPair) -> impl Iterator<Item = &str> {
    qa.questions().chain(core::iter::once(qa.answer.as_str()))
}

fn idf_of(qa_pairs: &[QaPair], analyzer: &Analyzer, syn: &SynonymMap) -> BTreeMap<String, f64> {
    let n = qa_pairs.len() as f64;
    let mut df: BTreeMap<String, u32> = BTreeMap::new();
    for qa in qa_pairs {
        let mut seen = BTreeSet::new();
        for text in qa_texts(qa) {
            for l in analyzer.analyze(text, syn).lemmas() {
                seen.insert(l.to_string());
            }
        }
        for l in seen {
            *df.entry(l).or_insert(0) += 1;
        }
    }
    df.into_iter()
        .map(|(t, d)| (t, libm::log((n + 1.0) / (d as f64 + 1.0)) + 1.0))
        .collect()
}

/// Smoothed local IDF: `ln((N+1)/(df+1)) + 1` over questions, alternates and answers.
pub fn recompute_local_idf(
    kb: &KnowledgeBase,
    analyzer: &Analyzer,
) -> Result<BTreeMap<String, f64>, KbError> {
    if kb.is_empty() {
        return Err(KbError::Empty);
    }
    Ok(idf_of(kb.qa_pairs(), analyzer, &kb.synonym_map(analyzer)))
}

/// Reports every invariant violation; never fails.
pub fn validate_kb(kb: &KnowledgeBase) -> Vec<String> {
    let mut out = Vec::new();
    let mut ids = BTreeSet::new();
    for qa in kb.qa_pairs() {
        if !ids.insert(qa.id) {
            out.push(format!("QAPair {}: duplicate id", qa.id));
        }
        if qa.id == 0 {
            out.push(format!("QAPair {}: id must be positive", qa.id));
        }
        if qa.question.trim().is_empty() {
            out.push(format!("QAPair {}: empty question", qa.id));
        }
        if qa.answer.trim().is_empty() {
            out.push(format!("QAPair {}: empty answer", qa.id));
        }
        let canon = qa.question.trim().to_lowercase();
        let mut alts = BTreeSet::new();
        for alt in &qa.alternate_questions {
            let key = alt.trim().to_lowercase();
            if key == canon {
                out.push(format!("QAPair {}: alternate duplicates canonical question", qa.id));
            } else if !alts.insert(key) {
                out.push(format!("QAPair {}: duplicate alternate {:?}", qa.id, alt));
            }
        }
    }
    let parents: BTreeMap<QaId, Option<QaId>> =
        kb.qa_pairs().iter().map(|q| (q.id, q.parent_id)).collect();
    for qa in kb.qa_pairs() {
        if let Some(p) = qa.parent_id {
            if !parents.contains_key(&p) {
                out.push(format!("QAPair {}: dangling parentId {}", qa.id, p));
            }
        }
    }
    for qa in kb.qa_pairs() {
        // Walk up; a walk longer than the node count must revisit a node.
        let mut seen = BTreeSet::new();
        seen.insert(qa.id);
        let mut cur = qa.parent_id;
        while let Some(p) = cur {
            if p == qa.id {
                out.push(format!("QAPair {}: parentId cycle", qa.id));
                break;
            }
            if !seen.insert(p) {
                break;
            }
            cur = parents.get(&p).copied().flatten();
        }
    }
    out
}

/// Depth of `qa` in its parent chain (a root is depth 1); `None` on cycles or
/// dangling links.
pub fn turn_depth(kb: &KnowledgeBase, qa: &QaPair) -> Option<usize> {
    let mut depth = 1;
    let mut cur = qa.parent_id;
    while let Some(p) = cur {
        depth += 1;
        if depth > kb.len() + 1 {
            return None;
        }
        cur = kb.get(p)?.parent_id;
    }
    Some(depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn kb(qas: Vec<QaPair>) -> KnowledgeBase {
        KnowledgeBase::new("kb", "test", Persona::None, vec![], qas, &Analyzer::bundled())
    }

    #[test]
    fn minimal_kb_is_valid() {
        assert!(validate_kb(&kb(vec![QaPair::new(1, "hi", "hello")])).is_empty());
    }

    #[test]
    fn dangling_parent_reported() {
        let k = kb(vec![
            QaPair::new(1, "a", "b"),
            QaPair::new(2, "c", "d").with_parent(99),
        ]);
        assert_eq!(validate_kb(&k), ["QAPair 2: dangling parentId 99"]);
    }

    /// Oracle: DFS colouring over the parent graph finds exactly the nodes on cycles.
    fn dfs_cycle_nodes(k: &KnowledgeBase) -> BTreeSet<QaId> {
        let mut on_cycle = BTreeSet::new();
        for start in k.qa_pairs() {
            let mut path: Vec<QaId> = vec![start.id];
            let mut cur = start.parent_id;
            while let Some(p) = cur {
                if let Some(pos) = path.iter().position(|&x| x == p) {
                    on_cycle.extend(path[pos..].iter().copied());
                    break;
                }
                path.push(p);
                cur = k.get(p).and_then(|q| q.parent_id);
            }
        }
        on_cycle
    }

    #[test]
    fn two_cycle_gives_two_violations() {
        let k = kb(vec![
            QaPair::new(1, "a", "b").with_parent(2),
            QaPair::new(2, "c", "d").with_parent(1),
        ]);
        let v = validate_kb(&k);
        assert_eq!(dfs_cycle_nodes(&k).len(), 2);
        assert_eq!(v, ["QAPair 1: parentId cycle", "QAPair 2: parentId cycle"]);
    }

    #[test]
    fn idf_single_and_three_pairs() {
        let a = Analyzer::bundled();
        let k = kb(vec![QaPair::new(1, "price", "ten")]);
        let idf = recompute_local_idf(&k, &a).unwrap();
        assert_eq!(idf["price"], 1.0);
        assert!(!idf.contains_key("table"));

        let k = kb(vec![
            QaPair::new(1, "table price", "ten"),
            QaPair::new(2, "chair price", "five"),
            QaPair::new(3, "sofa price", "nine"),
        ]);
        let idf = recompute_local_idf(&k, &a).unwrap();
        assert!((idf["table"] - 1.6931).abs() < 1e-4);
        assert_eq!(idf["price"], 1.0);
        assert_eq!(&idf, k.local_idf());
    }

    #[test]
    fn empty_kb_idf_errors() {
        assert_eq!(recompute_local_idf(&kb(vec![]), &Analyzer::bundled()), Err(KbError::Empty));
    }

    #[test]
    fn alternates_deduplicate() {
        let mut q = QaPair::new(1, "Refund policy", "30 days");
        assert!(!q.add_alternate("refund POLICY"));
        assert!(q.add_alternate("how do refunds work"));
        assert!(!q.add_alternate("How do refunds work"));
        assert_eq!(q.alternate_questions.len(), 1);
    }
}
