//! Active-learning suggestions: ranker disagreement, end-user feedback,
//! DBSCAN grouping and accept/reject decisions.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{semantic_vector, SemanticVector};
use crate::kb::{KnowledgeBase, QaId};
use crate::ranker::RankedAnswer;
use crate::text::Analyzer;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ActiveConfig {
    pub disagreement_margin: f64,
    pub score_band: f64,
    pub dbscan_eps: f64,
    pub dbscan_min_pts: usize,
}

impl Default for ActiveConfig {
    fn default() -> Self {
        Self {
            disagreement_margin: 0.08,
            score_band: 0.1,
            dbscan_eps: 0.25,
            dbscan_min_pts: 2,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ActiveError {
    #[error("suggestion {0} not found")]
    UnknownSuggestion(String),
    #[error("suggestion {0} is already resolved")]
    NotPending(String),
    #[error("suggestion {id} targets missing QAPair {target}")]
    DanglingTarget { id: String, target: QaId },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FeedbackRecord {
    pub query_text: String,
    pub shown_qa_id: QaId,
    #[serde(default)]
    pub selected_qa_id: Option<QaId>,
    #[serde(default)]
    pub timestamp: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Disagreement,
    Feedback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pending,
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Accept,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Suggestion {
    pub suggestion_id: String,
    pub query_text: String,
    pub target_qa_id: QaId,
    pub origin: Origin,
    #[serde(default)]
    pub cluster_id: Option<usize>,
    #[serde(default)]
    pub representative: bool,
    pub status: Status,
    #[serde(default)]
    pub timestamp: u64,
}

impl Suggestion {
    pub fn new(id: impl Into<String>, query: impl Into<String>, target: QaId, origin: Origin, timestamp: u64) -> Self {
        Self {
            suggestion_id: id.into(),
            query_text: query.into(),
            target_qa_id: target,
            origin,
            cluster_id: None,
            representative: false,
            status: Status::Pending,
            timestamp,
        }
    }
}

/// Top-two pair on which the semantic and taxonomy features disagree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Disagreement {
    /// The final winner, which the suggestion targets.
    pub qa_id_a: QaId,
    pub qa_id_b: QaId,
}

/// Fires when semantic and taxonomy margins of the top two answers have
/// opposite signs, both exceed `disagreement_margin`, and the final scores
/// lie within `score_band`.
pub fn detect_disagreement(ranked: &[RankedAnswer], cfg: &ActiveConfig) -> Option<Disagreement> {
    let [a, b, ..] = ranked else {
        return None;
    };
    let (qa_id_a, qa_id_b) = (a.qa_id?, b.qa_id?);
    let d_sem = a.features.sem_q - b.features.sem_q;
    let d_wn = a.features.wn_q - b.features.wn_q;
    let fires = d_sem * d_wn < 0.0
        && libm::fabs(d_sem) > cfg.disagreement_margin
        && libm::fabs(d_wn) > cfg.disagreement_margin
        && libm::fabs(a.score - b.score) <= cfg.score_band;
    fires.then_some(Disagreement { qa_id_a, qa_id_b })
}

/// A feedback record becomes a suggestion when the user picked an answer
/// other than the one shown.
pub fn feedback_suggestion(record: &FeedbackRecord, id: impl Into<String>) -> Option<Suggestion> {
    let selected = record.selected_qa_id.filter(|s| *s != record.shown_qa_id)?;
    Some(Suggestion::new(
        id,
        record.query_text.clone(),
        selected,
        Origin::Feedback,
        record.timestamp,
    ))
}

/// Cluster label per point; `None` marks noise.
pub type Labels = Vec<Option<usize>>;

/// Plain DBSCAN with a precomputed `distance`, neighbourhoods including the
/// point itself. Clusters are numbered in order of their first core point;
/// a border point joins the first cluster that reaches it.
pub fn dbscan(n: usize, eps: f64, min_pts: usize, distance: impl Fn(usize, usize) -> f64) -> Labels {
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| i == j || distance(i, j) <= eps).collect())
        .collect();
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= min_pts.max(1)).collect();
    let mut labels: Labels = vec![None; n];
    let mut next = 0;
    for start in 0..n {
        if labels[start].is_some() || !core[start] {
            continue;
        }
        let c = next;
        next += 1;
        labels[start] = Some(c);
        let mut queue = VecDeque::from([start]);
        while let Some(p) = queue.pop_front() {
            for &q in &neighbors[p] {
                if labels[q].is_none() {
                    labels[q] = Some(c);
                    if core[q] {
                        queue.push_back(q);
                    }
                }
            }
        }
    }
    labels
}

/// `1 - cosine`, so identical texts are at distance 0.
pub fn semantic_distance(a: &SemanticVector, b: &SemanticVector) -> f64 {
    1.0 - crate::features::semantic_similarity(a, b).unwrap_or(0.0)
}

/// Runs DBSCAN over the pending suggestions' query vectors. Noise points
/// become singleton clusters. Each cluster gets one representative: the
/// member nearest the centroid, then the earliest, then the smallest id.
/// Resolved suggestions pass through with their cluster cleared.
pub fn cluster_suggestions(suggestions: &[Suggestion], eps: f64, min_pts: usize) -> Vec<Suggestion> {
    let mut out: Vec<Suggestion> = suggestions.to_vec();
    let pending: Vec<usize> = (0..out.len()).filter(|&i| out[i].status == Status::Pending).collect();
    for s in &mut out {
        s.cluster_id = None;
        s.representative = false;
    }
    let vectors: Vec<SemanticVector> = pending.iter().map(|&i| semantic_vector(&out[i].query_text)).collect();
    let labels = dbscan(pending.len(), eps, min_pts, |a, b| semantic_distance(&vectors[a], &vectors[b]));
    let mut next = labels.iter().flatten().max().map_or(0, |m| m + 1);
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (k, label) in labels.into_iter().enumerate() {
        let c = label.unwrap_or_else(|| {
            next += 1;
            next - 1
        });
        out[pending[k]].cluster_id = Some(c);
        members.entry(c).or_default().push(k);
    }
    for ks in members.values() {
        let mut centroid: BTreeMap<u32, f64> = BTreeMap::new();
        for &k in ks {
            for &(b, w) in vectors[k].entries() {
                *centroid.entry(b).or_insert(0.0) += w / ks.len() as f64;
            }
        }
        // Unit vectors: nearest to the centroid means largest dot product.
        let closeness = |k: usize| -> f64 {
            vectors[k]
                .entries()
                .iter()
                .map(|(b, w)| w * centroid.get(b).copied().unwrap_or(0.0))
                .sum()
        };
        let best = ks
            .iter()
            .copied()
            .min_by(|&x, &y| {
                let (sx, sy) = (&out[pending[x]], &out[pending[y]]);
                closeness(y)
                    .total_cmp(&closeness(x))
                    .then(sx.timestamp.cmp(&sy.timestamp))
                    .then(sx.suggestion_id.cmp(&sy.suggestion_id))
            })
            .expect("clusters are non-empty");
        out[pending[best]].representative = true;
    }
    out
}

/// Result of resolving one suggestion's cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolution {
    pub kb: KnowledgeBase,
    /// Every suggestion whose status changed, with the new status.
    pub updated: Vec<Suggestion>,
    /// Alternates actually added to the target.
    pub added: Vec<String>,
}

/// Resolves the cluster of `suggestion_id` within `suggestions` (as
/// returned by [`cluster_suggestions`]). Accepting appends every member
/// query as an alternate of the resolved suggestion's target.
pub fn apply_decision(
    kb: &KnowledgeBase,
    suggestions: &[Suggestion],
    suggestion_id: &str,
    decision: Decision,
    analyzer: &Analyzer,
) -> Result<Resolution, ActiveError> {
    let s = suggestions
        .iter()
        .find(|s| s.suggestion_id == suggestion_id)
        .ok_or_else(|| ActiveError::UnknownSuggestion(suggestion_id.into()))?;
    if s.status != Status::Pending {
        return Err(ActiveError::NotPending(suggestion_id.into()));
    }
    let target = s.target_qa_id;
    if kb.get(target).is_none() {
        return Err(ActiveError::DanglingTarget {
            id: suggestion_id.into(),
            target,
        });
    }
    let members: Vec<&Suggestion> = match s.cluster_id {
        Some(c) => suggestions
            .iter()
            .filter(|m| m.status == Status::Pending && m.cluster_id == Some(c))
            .collect(),
        None => vec![s],
    };
    let status = match decision {
        Decision::Accept => Status::Accepted,
        Decision::Reject => Status::Rejected,
    };
    let updated = members
        .iter()
        .map(|m| Suggestion {
            status,
            ..(*m).clone()
        })
        .collect();
    if decision == Decision::Reject {
        return Ok(Resolution {
            kb: kb.clone(),
            updated,
            added: Vec::new(),
        });
    }
    let mut pairs = kb.qa_pairs().to_vec();
    let qa = pairs.iter_mut().find(|q| q.id == target).expect("target checked above");
    let mut seen = BTreeSet::new();
    let mut added = Vec::new();
    for m in &members {
        let text = m.query_text.trim();
        if seen.insert(text.to_lowercase()) && qa.add_alternate(text) {
            added.push(String::from(text));
        }
    }
    Ok(Resolution {
        kb: kb.with_qa_pairs(pairs, analyzer),
        updated,
        added,
    })
}
