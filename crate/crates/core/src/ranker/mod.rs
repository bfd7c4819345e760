//! Fusion ranker: boosted trees over [`FeatureVector`]s, re-ranking of
//! retrieved candidates and the no-answer sentinel.

mod gbdt;
pub mod metrics;

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{featurize, FeatureInputs, FeatureVector};
use crate::index::Hit;
use crate::kb::{KbError, QaId, QueryContext};

pub use gbdt::{
    incremental_train, logistic, train, train_with_report, GbdtModel, TrainParams, TrainReport,
    TrainingRow, TrainingSet, TreeNode, MIN_TRAINING_ROWS, MODEL_VERSION,
};

pub const DEFAULT_NO_ANSWER_THRESHOLD: f64 = 0.35;
pub const DEFAULT_DRIFT_BOUND: f64 = 0.15;
pub const NO_ANSWER_TEXT: &str = "No good match found in the knowledge base.";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RankerError {
    #[error("too few training rows: {rows} (need at least {min})")]
    TooFewRows { rows: usize, min: usize },
    #[error("degenerate labels: training data needs both 0 and 1")]
    DegenerateLabels,
    #[error("label must be 0 or 1, got {0}")]
    BadLabel(u8),
    #[error("training data contains a non-finite feature value")]
    NonFiniteFeature,
    #[error("invalid training parameters: {0}")]
    InvalidParams(&'static str),
    #[error("feature vector has {got} values, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("model feature names do not match this build's feature vector")]
    FeatureMismatch,
    #[error("stop-word or taxonomy hash differs from the model's; retrain from scratch")]
    ProvenanceMismatch,
    #[error("mean score drift {drift:.4} exceeds bound {bound}; retrain from scratch")]
    DriftExceeded { drift: f64, bound: f64 },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error(transparent)]
    Kb(#[from] KbError),
}

/// One entry of a ranked result list. `qa_id` is `None` for the no-answer
/// sentinel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RankedAnswer {
    pub qa_id: Option<QaId>,
    pub score: f64,
    pub features: FeatureVector,
    pub answer_text: String,
}

impl RankedAnswer {
    pub fn no_answer(score: f64) -> Self {
        Self {
            qa_id: None,
            score,
            features: FeatureVector::default(),
            answer_text: NO_ANSWER_TEXT.into(),
        }
    }

    pub fn is_no_answer(&self) -> bool {
        self.qa_id.is_none()
    }
}

/// A featurized candidate awaiting a score.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub qa_id: QaId,
    pub features: FeatureVector,
    pub answer_text: String,
}

/// Scores candidates and sorts them by score, then higher retrieval score,
/// then lower id. Nothing is filtered.
pub fn rank_candidates(
    model: &GbdtModel,
    candidates: Vec<Candidate>,
) -> Result<Vec<RankedAnswer>, RankerError> {
    let mut out = candidates
        .into_iter()
        .map(|c| {
            Ok(RankedAnswer {
                qa_id: Some(c.qa_id),
                score: model.score_features(&c.features)?,
                features: c.features,
                answer_text: c.answer_text,
            })
        })
        .collect::<Result<Vec<_>, RankerError>>()?;
    out.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(b.features.retrieval_score.total_cmp(&a.features.retrieval_score))
            .then(a.qa_id.cmp(&b.qa_id))
    });
    Ok(out)
}

/// Drops answers below `threshold`; an empty result becomes the sentinel
/// carrying the best score seen.
pub fn apply_threshold(ranked: Vec<RankedAnswer>, threshold: f64) -> Vec<RankedAnswer> {
    let top = ranked.first().map_or(0.0, |r| r.score);
    let kept: Vec<RankedAnswer> = ranked.into_iter().filter(|r| r.score >= threshold).collect();
    if kept.is_empty() {
        alloc::vec![RankedAnswer::no_answer(top)]
    } else {
        kept
    }
}

/// Retrieval scores divided by the best one in the list, so the feature is
/// comparable across KBs.
pub fn normalized_retrieval(hits: &[Hit]) -> impl Iterator<Item = (QaId, f64)> + '_ {
    let top = hits.iter().map(|h| h.score).fold(0.0, f64::max);
    hits.iter()
        .map(move |h| (h.qa_id, if top > 0.0 { h.score / top } else { 0.0 }))
}

/// Featurizes, scores, sorts and thresholds retrieved candidates.
pub fn rank(
    model: &GbdtModel,
    query: &str,
    ctx: &QueryContext,
    candidates: &[Hit],
    inputs: &FeatureInputs<'_>,
    no_answer_threshold: f64,
) -> Result<Vec<RankedAnswer>, RankerError> {
    let mut featurized = Vec::with_capacity(candidates.len());
    for (qa_id, r) in normalized_retrieval(candidates) {
        let qa = inputs.kb.get(qa_id).ok_or(KbError::MissingQa(qa_id))?;
        featurized.push(Candidate {
            qa_id,
            features: featurize(query, ctx, qa, r, inputs)?,
            answer_text: qa.answer.clone(),
        });
    }
    Ok(apply_threshold(rank_candidates(model, featurized)?, no_answer_threshold))
}
