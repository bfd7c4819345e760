//! Offline evaluation of a ranker over a labeled query set.

use std::collections::BTreeMap;

use kbqa_core::engine::EngineError;
use kbqa_core::ranker::metrics::{auc, top_answer_f1, F1Report, QueryJudgement, TopAnswer};
use kbqa_core::ranker::{rank_candidates, TrainingRow, TrainingSet};
use kbqa_core::{Engine, KbSnapshot, QaId, QueryContext};
use serde::{Deserialize, Serialize};

use crate::io::LabelRow;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScoredRow {
    pub query: String,
    pub qa_id: QaId,
    pub label: bool,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QueryDiagnostic {
    pub query: String,
    pub top_qa_id: Option<QaId>,
    pub top_score: Option<f64>,
    pub relevant_qa_ids: Vec<QaId>,
    /// "tp", "fp", "fn" or "tn" at the report threshold.
    pub outcome: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvalReport {
    pub queries: usize,
    pub rows: usize,
    pub positives: usize,
    pub threshold: f64,
    /// `None` when the labels hold only one class.
    pub auc: Option<f64>,
    pub f1: F1Report,
    pub diagnostics: Vec<QueryDiagnostic>,
    pub scores: Vec<ScoredRow>,
}

/// Scores every labeled (query, QA) row with the engine's model and judges
/// each query's top-ranked answer. Labeled QAs that retrieval misses are
/// still scored, with a zero retrieval feature.
pub fn evaluate(engine: &Engine, snap: &KbSnapshot, labels: &[LabelRow], threshold: f64) -> Result<EvalReport, EngineError> {
    let mut order: Vec<&str> = Vec::new();
    let mut by_query: BTreeMap<&str, Vec<&LabelRow>> = BTreeMap::new();
    for row in labels {
        let e = by_query.entry(row.query.as_str()).or_default();
        if e.is_empty() {
            order.push(row.query.as_str());
        }
        e.push(row);
    }
    let ctx = QueryContext::default();
    let mut scores = Vec::with_capacity(labels.len());
    let mut judgements = Vec::with_capacity(order.len());
    let mut diagnostics = Vec::with_capacity(order.len());
    for q in order {
        let rows = &by_query[q];
        let ids: Vec<QaId> = rows.iter().map(|r| r.qa_id).collect();
        for (row, fv) in rows.iter().zip(engine.featurize_pairs(snap, q, &ctx, &ids)?) {
            scores.push(ScoredRow {
                query: q.to_string(),
                qa_id: row.qa_id,
                label: row.label,
                score: engine.model.score_features(&fv)?,
            });
        }
        let relevant: Vec<QaId> = rows.iter().filter(|r| r.label).map(|r| r.qa_id).collect();
        let ranked = rank_candidates(&engine.model, engine.candidates(snap, q, &ctx)?)?;
        let top = ranked.first().map(|r| TopAnswer {
            score: r.score,
            relevant: r.qa_id.is_some_and(|id| relevant.contains(&id)),
        });
        let j = QueryJudgement {
            top,
            has_relevant: !relevant.is_empty(),
        };
        let answered = top.filter(|t| t.score >= threshold);
        let outcome = match answered {
            Some(t) if t.relevant => "tp",
            Some(_) => "fp",
            None if j.has_relevant => "fn",
            None => "tn",
        };
        diagnostics.push(QueryDiagnostic {
            query: q.to_string(),
            top_qa_id: ranked.first().and_then(|r| r.qa_id),
            top_score: top.map(|t| t.score),
            relevant_qa_ids: relevant,
            outcome: outcome.into(),
        });
        judgements.push(j);
    }
    let s: Vec<f64> = scores.iter().map(|r| r.score).collect();
    let l: Vec<bool> = scores.iter().map(|r| r.label).collect();
    Ok(EvalReport {
        queries: judgements.len(),
        rows: scores.len(),
        positives: l.iter().filter(|&&b| b).count(),
        threshold,
        auc: auc(&s, &l),
        f1: top_answer_f1(&judgements, threshold),
        diagnostics,
        scores,
    })
}

/// Training rows from labels: one row per labeled pair, grouped by query.
pub fn training_set(engine: &Engine, snap: &KbSnapshot, labels: &[LabelRow]) -> Result<TrainingSet, EngineError> {
    let mut query_ids: BTreeMap<&str, u64> = BTreeMap::new();
    let mut grouped: Vec<(&str, Vec<&LabelRow>)> = Vec::new();
    for row in labels {
        let next = query_ids.len() as u64;
        let qid = *query_ids.entry(row.query.as_str()).or_insert(next);
        if qid as usize == grouped.len() {
            grouped.push((row.query.as_str(), Vec::new()));
        }
        grouped[qid as usize].1.push(row);
    }
    let ctx = QueryContext::default();
    let mut rows = Vec::with_capacity(labels.len());
    for (qid, (q, group)) in grouped.iter().enumerate() {
        let ids: Vec<QaId> = group.iter().map(|r| r.qa_id).collect();
        for (r, features) in group.iter().zip(engine.featurize_pairs(snap, q, &ctx, &ids)?) {
            rows.push(TrainingRow {
                features,
                label: u8::from(r.label),
                query_id: qid as u64,
            });
        }
    }
    Ok(TrainingSet::new(rows).with_provenance(engine.analyzer.stopwords_hash(), engine.taxonomy.hash()))
}
