//! Evaluation metrics: pairwise AUC and top-answer F1.

use serde::{Deserialize, Serialize};

/// Fraction of (positive, negative) pairs the scores order correctly, ties
/// counting one half. `None` when either class is absent.
///
/// Sort-based: O(n log n), exact against the pairwise definition because
/// tied runs contribute `neg_below + neg_tied / 2` per positive.
pub fn auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len(), "scores and labels differ in length");
    let mut idx: alloc::vec::Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let (mut pos, mut neg) = (0u64, 0u64);
    let mut twice_correct = 0u128;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        let (mut p, mut n) = (0u64, 0u64);
        while j < idx.len() && scores[idx[j]] == scores[idx[i]] {
            if labels[idx[j]] {
                p += 1;
            } else {
                n += 1;
            }
            j += 1;
        }
        twice_correct += p as u128 * (2 * neg as u128 + n as u128);
        pos += p;
        neg += n;
        i = j;
    }
    if pos == 0 || neg == 0 {
        return None;
    }
    Some(twice_correct as f64 / (2.0 * pos as f64 * neg as f64))
}

/// Top answer of one evaluated query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TopAnswer {
    pub score: f64,
    pub relevant: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QueryJudgement {
    pub top: Option<TopAnswer>,
    /// Some QA is labeled relevant for this query.
    pub has_relevant: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct F1Report {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// A query is answered when its top score reaches `threshold`; answered and
/// relevant is a true positive, answered and irrelevant a false positive,
/// and a query with a relevant QA but no true positive a false negative.
pub fn top_answer_f1(judgements: &[QueryJudgement], threshold: f64) -> F1Report {
    let mut r = F1Report::default();
    for j in judgements {
        let answered = j.top.filter(|t| t.score >= threshold);
        match answered {
            Some(t) if t.relevant => r.true_positives += 1,
            Some(_) => {
                r.false_positives += 1;
                if j.has_relevant {
                    r.false_negatives += 1;
                }
            }
            None if j.has_relevant => r.false_negatives += 1,
            None => {}
        }
    }
    let ratio = |a: usize, b: usize| if a + b == 0 { 0.0 } else { a as f64 / (a + b) as f64 };
    r.precision = ratio(r.true_positives, r.false_positives);
    r.recall = ratio(r.true_positives, r.false_negatives);
    r.f1 = if r.precision + r.recall == 0.0 {
        0.0
    } else {
        2.0 * r.precision * r.recall / (r.precision + r.recall)
    };
    r
}
