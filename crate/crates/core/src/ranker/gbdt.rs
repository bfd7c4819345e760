//! Logistic-loss gradient boosting over exact-greedy regression trees.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::RankerError;
use crate::features::{FeatureVector, FEATURE_COUNT};

pub const MODEL_VERSION: u32 = 1;
pub const MIN_TRAINING_ROWS: usize = 20;

/// One tree node; leaves carry the raw (pre learning-rate) output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    #[serde(rename_all = "camelCase")]
    Split {
        feature_index: usize,
        threshold: f64,
        #[serde(default)]
        gain: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf { value: f64 },
}

impl TreeNode {
    /// `x[feature] <= threshold` goes left.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature_index,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if x[*feature_index] <= *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaves(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit(&mut |n| {
            if let TreeNode::Leaf { value } = n {
                out.push(*value);
            }
        });
        out
    }

    fn visit(&self, f: &mut impl FnMut(&TreeNode)) {
        f(self);
        if let TreeNode::Split { left, right, .. } = self {
            left.visit(f);
            right.visit(f);
        }
    }

    fn features(&self, out: &mut BTreeSet<usize>) {
        self.visit(&mut |n| {
            if let TreeNode::Split { feature_index, .. } = n {
                out.insert(*feature_index);
            }
        });
    }

    /// Every leaf right of a split is >= every leaf left of it.
    fn is_monotone(&self) -> bool {
        match self {
            TreeNode::Leaf { .. } => true,
            TreeNode::Split { left, right, .. } => {
                let lmax = left.leaves().into_iter().fold(f64::NEG_INFINITY, f64::max);
                let rmin = right.leaves().into_iter().fold(f64::INFINITY, f64::min);
                lmax <= rmin && left.is_monotone() && right.is_monotone()
            }
        }
    }
}

/// Boosted-tree fusion model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct GbdtModel {
    pub version: u32,
    pub trees: Vec<TreeNode>,
    pub learning_rate: f64,
    pub base_score: f64,
    pub feature_names: Vec<String>,
    pub stopwords_hash: String,
    pub taxonomy_hash: String,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    libm::log(p / (1.0 - p))
}

fn log_loss(margins: &[f64], labels: &[f64]) -> f64 {
    if margins.is_empty() {
        return 0.0;
    }
    let total: f64 = margins
        .iter()
        .zip(labels)
        // log(1 + e^m) - y m, written to stay finite for large |m|.
        .map(|(&m, &y)| m.max(0.0) + libm::log1p(libm::exp(-m.abs())) - y * m)
        .sum();
    total / margins.len() as f64
}

impl GbdtModel {
    /// Zero-tree model.
    pub fn constant(base_score: f64, learning_rate: f64) -> Self {
        Self {
            version: MODEL_VERSION,
            trees: Vec::new(),
            learning_rate,
            base_score,
            feature_names: FeatureVector::names(),
            stopwords_hash: String::new(),
            taxonomy_hash: String::new(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_provenance(mut self, stopwords_hash: &str, taxonomy_hash: &str) -> Self {
        self.stopwords_hash = stopwords_hash.into();
        self.taxonomy_hash = taxonomy_hash.into();
        self
    }

    /// Checks structural invariants of a deserialized model.
    pub fn validate(&self) -> Result<(), RankerError> {
        let bad = |m: &str| Err(RankerError::InvalidModel(m.into()));
        if self.version != MODEL_VERSION {
            return bad("unsupported model version");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learningRate must be in (0, 1]");
        }
        if !self.base_score.is_finite() {
            return bad("baseScore must be finite");
        }
        let n = self.feature_names.len();
        let mut ok = true;
        for t in &self.trees {
            t.visit(&mut |node| match node {
                TreeNode::Split {
                    feature_index,
                    threshold,
                    ..
                } => ok &= *feature_index < n && threshold.is_finite(),
                TreeNode::Leaf { value } => ok &= value.is_finite(),
            });
        }
        if !ok {
            return bad("tree references an invalid feature or non-finite value");
        }
        Ok(())
    }

    pub fn margin(&self, x: &[f64]) -> Result<f64, RankerError> {
        if x.len() != self.feature_names.len() {
            return Err(RankerError::DimensionMismatch {
                expected: self.feature_names.len(),
                got: x.len(),
            });
        }
        let sum: f64 = self.trees.iter().map(|t| t.eval(x)).sum();
        Ok(self.base_score + self.learning_rate * sum)
    }

    /// `logistic(baseScore + learningRate * sum of tree outputs)`.
    pub fn score(&self, x: &[f64]) -> Result<f64, RankerError> {
        self.margin(x).map(logistic)
    }

    pub fn score_features(&self, fv: &FeatureVector) -> Result<f64, RankerError> {
        self.score(&fv.to_array())
    }

    /// Feature indices any split refers to.
    pub fn used_features(&self) -> BTreeSet<usize> {
        let mut s = BTreeSet::new();
        for t in &self.trees {
            t.features(&mut s);
        }
        s
    }

    /// Total split gain per feature, normalized to sum to 1.
    pub fn feature_gains(&self) -> Vec<(String, f64)> {
        let mut gains = vec![0.0; self.feature_names.len()];
        for t in &self.trees {
            t.visit(&mut |n| {
                if let TreeNode::Split {
                    feature_index, gain, ..
                } = n
                {
                    gains[*feature_index] += gain;
                }
            });
        }
        let total: f64 = gains.iter().sum();
        self.feature_names
            .iter()
            .zip(gains)
            .map(|(n, g)| (n.clone(), if total > 0.0 { g / total } else { 0.0 }))
            .collect()
    }

    /// Score never decreases when any single feature increases.
    pub fn is_monotone(&self) -> bool {
        self.trees.iter().all(TreeNode::is_monotone)
    }

    pub fn max_depth(&self) -> usize {
        self.trees.iter().map(TreeNode::depth).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrainingRow {
    pub features: FeatureVector,
    pub label: u8,
    pub query_id: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrainingSet {
    pub rows: Vec<TrainingRow>,
    #[serde(default)]
    pub stopwords_hash: String,
    #[serde(default)]
    pub taxonomy_hash: String,
}

impl TrainingSet {
    pub fn new(rows: Vec<TrainingRow>) -> Self {
        Self {
            rows,
            ..Self::default()
        }
    }

    pub fn with_provenance(mut self, stopwords_hash: &str, taxonomy_hash: &str) -> Self {
        self.stopwords_hash = stopwords_hash.into();
        self.taxonomy_hash = taxonomy_hash.into();
        self
    }

    pub fn positive_rate(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().filter(|r| r.label == 1).count() as f64 / self.rows.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrainParams {
    pub max_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_leaf: usize,
    pub validation_fraction: f64,
    pub patience: usize,
    pub prune_pct: f64,
    /// Generality-to-progress ratio below which a tree counts as stalled.
    pub ratio_threshold: f64,
    /// L2 penalty on leaf values.
    pub lambda: f64,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            max_trees: 100,
            max_depth: 3,
            learning_rate: 0.1,
            min_leaf: 5,
            validation_fraction: 0.2,
            patience: 3,
            prune_pct: 0.05,
            ratio_threshold: 0.1,
            lambda: 1.0,
            seed: 7,
        }
    }
}

impl TrainParams {
    fn check(&self) -> Result<(), RankerError> {
        let bad = |m: &'static str| Err(RankerError::InvalidParams(m));
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learningRate must be in (0, 1]");
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("validationFraction must be in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.prune_pct) {
            return bad("prunePct must be in [0, 1]");
        }
        if self.min_leaf == 0 || self.patience == 0 {
            return bad("minLeaf and patience must be positive");
        }
        if self.lambda < 0.0 {
            return bad("lambda must be non-negative");
        }
        Ok(())
    }
}

/// What happened during training, for reports and tests.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrainReport {
    pub train_rows: usize,
    pub validation_rows: usize,
    pub trees_built: usize,
    pub stopped_early: bool,
    pub trees_kept: usize,
    pub train_loss: f64,
    pub validation_loss_at_stop: f64,
    pub validation_loss: f64,
    pub leaves_pruned: usize,
    pub ratios: Vec<f64>,
    /// AUC of the final model on the validation rows; `None` without both
    /// classes there.
    pub validation_auc: Option<f64>,
}

/// Training-time tree with per-node gradient statistics.
#[derive(Debug, Clone)]
struct Arena {
    nodes: Vec<Node>,
}

#[derive(Debug, Clone)]
struct Node {
    split: Option<(usize, f64, f64, usize, usize)>,
    /// Newton value `-G / (H + lambda)` of the rows reaching this node.
    value: f64,
}

impl Arena {
    fn eval(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i].split {
                None => return self.nodes[i].value,
                Some((f, t, _, l, r)) => i = if x[f] <= t { l } else { r },
            }
        }
    }

    fn to_node(&self, i: usize) -> TreeNode {
        match self.nodes[i].split {
            None => TreeNode::Leaf {
                value: self.nodes[i].value,
            },
            Some((feature_index, threshold, gain, l, r)) => TreeNode::Split {
                feature_index,
                threshold,
                gain,
                left: Box::new(self.to_node(l)),
                right: Box::new(self.to_node(r)),
            },
        }
    }

    fn leaf_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().filter(|n| n.split.is_none()).map(|n| n.value)
    }

    /// Reachable splits whose children are both leaves.
    fn prunable(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![0];
        while let Some(i) = stack.pop() {
            if let Some((_, _, _, l, r)) = self.nodes[i].split {
                if self.nodes[l].split.is_none() && self.nodes[r].split.is_none() {
                    out.push(i);
                } else {
                    stack.push(r);
                    stack.push(l);
                }
            }
        }
        out.sort_unstable();
        out
    }
}

struct Grower<'a> {
    x: &'a [[f64; FEATURE_COUNT]],
    /// Row order sorted by each feature.
    sorted: Vec<Vec<u32>>,
    params: &'a TrainParams,
}

impl<'a> Grower<'a> {
    fn new(x: &'a [[f64; FEATURE_COUNT]], params: &'a TrainParams) -> Self {
        let sorted = (0..FEATURE_COUNT)
            .map(|f| {
                let mut idx: Vec<u32> = (0..x.len() as u32).collect();
                idx.sort_by(|&a, &b| x[a as usize][f].total_cmp(&x[b as usize][f]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Self { x, sorted, params }
    }

    fn leaf_value(&self, g: f64, h: f64) -> f64 {
        let d = h + self.params.lambda;
        if d > 0.0 {
            -g / d
        } else {
            0.0
        }
    }

    fn grow(&self, grad: &[f64], hess: &[f64]) -> Arena {
        let n = self.x.len();
        let mut member: Vec<usize> = vec![0; n];
        let (g0, h0) = (grad.iter().sum::<f64>(), hess.iter().sum::<f64>());
        let mut arena = Arena {
            nodes: vec![Node {
                split: None,
                value: self.leaf_value(g0, h0),
            }],
        };
        let mut frontier = vec![(0usize, g0, h0, n)];
        for _ in 0..self.params.max_depth {
            let mut next = Vec::new();
            for &(id, g, h, count) in &frontier {
                if count < 2 * self.params.min_leaf {
                    continue;
                }
                let Some((f, thr, gain, gl, hl, nl)) = self.best_split(id, g, h, count, &member, grad, hess)
                else {
                    continue;
                };
                let (l, r) = (arena.nodes.len(), arena.nodes.len() + 1);
                arena.nodes.push(Node {
                    split: None,
                    value: self.leaf_value(gl, hl),
                });
                arena.nodes.push(Node {
                    split: None,
                    value: self.leaf_value(g - gl, h - hl),
                });
                arena.nodes[id].split = Some((f, thr, gain, l, r));
                for (i, m) in member.iter_mut().enumerate() {
                    if *m == id {
                        *m = if self.x[i][f] <= thr { l } else { r };
                    }
                }
                next.push((l, gl, hl, nl));
                next.push((r, g - gl, h - hl, count - nl));
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        arena
    }

    #[allow(clippy::too_many_arguments)]
    fn best_split(
        &self,
        node: usize,
        g: f64,
        h: f64,
        count: usize,
        member: &[usize],
        grad: &[f64],
        hess: &[f64],
    ) -> Option<(usize, f64, f64, f64, f64, usize)> {
        let lambda = self.params.lambda;
        let min_leaf = self.params.min_leaf;
        let parent = g * g / (h + lambda);
        let mut best: Option<(usize, f64, f64, f64, f64, usize)> = None;
        for (f, order) in self.sorted.iter().enumerate() {
            let (mut gl, mut hl, mut nl) = (0.0, 0.0, 0usize);
            let mut prev: Option<f64> = None;
            for &i in order {
                let i = i as usize;
                if member[i] != node {
                    continue;
                }
                let v = self.x[i][f];
                if let Some(p) = prev {
                    if v > p && nl >= min_leaf && count - nl >= min_leaf {
                        let (gr, hr) = (g - gl, h - hl);
                        let gain = gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent;
                        if gain > 1e-12 && best.map_or(true, |b| gain > b.2) {
                            // Adjacent floats can round the midpoint up to v.
                            let mid = p + (v - p) / 2.0;
                            let thr = if mid < v { mid } else { p };
                            best = Some((f, thr, gain, gl, hl, nl));
                        }
                    }
                }
                gl += grad[i];
                hl += hess[i];
                nl += 1;
                prev = Some(v);
            }
        }
        best
    }
}

fn gradients(margins: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    margins
        .iter()
        .zip(y)
        .map(|(&m, &y)| {
            let p = logistic(m);
            (p - y, (p * (1.0 - p)).max(1e-16))
        })
        .unzip()
}

fn split_rows(data: &TrainingSet, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let groups: BTreeSet<u64> = data.rows.iter().map(|r| r.query_id).collect();
    let mut groups: Vec<u64> = groups.into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    groups.shuffle(&mut rng);
    let mut n_val = libm::ceil(fraction * groups.len() as f64) as usize;
    if fraction > 0.0 && groups.len() >= 2 {
        n_val = n_val.clamp(1, groups.len() - 1);
    } else {
        n_val = 0;
    }
    let val: BTreeSet<u64> = groups[..n_val].iter().copied().collect();
    (0..data.rows.len()).partition(|&i| !val.contains(&data.rows[i].query_id))
}

fn check_data(data: &TrainingSet) -> Result<(), RankerError> {
    if let Some(r) = data.rows.iter().find(|r| r.label > 1) {
        return Err(RankerError::BadLabel(r.label));
    }
    if data.rows.iter().any(|r| r.features.to_array().iter().any(|v| !v.is_finite())) {
        return Err(RankerError::NonFiniteFeature);
    }
    Ok(())
}

/// Fits a model; see [`train_with_report`].
pub fn train(data: &TrainingSet, params: &TrainParams) -> Result<GbdtModel, RankerError> {
    train_with_report(data, params).map(|(m, _)| m)
}

/// Boosts trees until `max_trees` or until the validation/training
/// improvement ratio stays below `ratio_threshold` for `patience` trees,
/// keeps the prefix with the lowest validation loss, then prunes small
/// sibling leaves as long as validation loss stays within 1e-6.
pub fn train_with_report(
    data: &TrainingSet,
    params: &TrainParams,
) -> Result<(GbdtModel, TrainReport), RankerError> {
    params.check()?;
    if data.rows.len() < MIN_TRAINING_ROWS {
        return Err(RankerError::TooFewRows {
            rows: data.rows.len(),
            min: MIN_TRAINING_ROWS,
        });
    }
    check_data(data)?;
    let rate = data.positive_rate();
    if rate == 0.0 || rate == 1.0 {
        return Err(RankerError::DegenerateLabels);
    }
    let base = logit(rate);
    let (tr, va) = split_rows(data, params.validation_fraction, params.seed);
    let pick = |idx: &[usize]| -> (Vec<[f64; FEATURE_COUNT]>, Vec<f64>) {
        idx.iter()
            .map(|&i| (data.rows[i].features.to_array(), data.rows[i].label as f64))
            .unzip()
    };
    let (xt, yt) = pick(&tr);
    let (xv, yv) = pick(&va);
    let grower = Grower::new(&xt, params);
    let lr = params.learning_rate;

    let mut mt = vec![base; xt.len()];
    let mut mv = vec![base; xv.len()];
    let mut trees: Vec<Arena> = Vec::new();
    let (mut lt, mut lv) = (log_loss(&mt, &yt), log_loss(&mv, &yv));
    let mut val_curve = vec![lv];
    let mut report = TrainReport {
        train_rows: xt.len(),
        validation_rows: xv.len(),
        ..TrainReport::default()
    };
    let mut stalled = 0;
    while trees.len() < params.max_trees {
        let (g, h) = gradients(&mt, &yt);
        let tree = grower.grow(&g, &h);
        for (m, x) in mt.iter_mut().zip(&xt) {
            *m += lr * tree.eval(x);
        }
        for (m, x) in mv.iter_mut().zip(&xv) {
            *m += lr * tree.eval(x);
        }
        trees.push(tree);
        let (nt, nv) = (log_loss(&mt, &yt), log_loss(&mv, &yv));
        val_curve.push(nv);
        if !xv.is_empty() {
            let progress = lt - nt;
            let ratio = if progress > 1e-12 { (lv - nv) / progress } else { 0.0 };
            report.ratios.push(ratio);
            stalled = if ratio < params.ratio_threshold { stalled + 1 } else { 0 };
        }
        lt = nt;
        lv = nv;
        if stalled >= params.patience {
            report.stopped_early = true;
            break;
        }
    }
    report.trees_built = trees.len();

    if !xv.is_empty() {
        let best = val_curve
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
            .map_or(0, |(i, _)| i);
        trees.truncate(best);
    }
    report.trees_kept = trees.len();
    let stop_loss = val_loss_of(&trees, base, lr, &xv, &yv);
    report.validation_loss_at_stop = stop_loss;
    if !xv.is_empty() && params.prune_pct > 0.0 {
        report.leaves_pruned = prune(&mut trees, base, lr, &xv, &yv, params.prune_pct, stop_loss);
    }
    report.validation_loss = val_loss_of(&trees, base, lr, &xv, &yv);
    report.train_loss = val_loss_of(&trees, base, lr, &xt, &yt);
    let margins: Vec<f64> = xv.iter().map(|x| trees.iter().map(|t| t.eval(x)).sum()).collect();
    let labels: Vec<bool> = yv.iter().map(|&y| y == 1.0).collect();
    report.validation_auc = super::metrics::auc(&margins, &labels);

    let model = GbdtModel {
        trees: trees.iter().map(|a| a.to_node(0)).collect(),
        learning_rate: lr,
        base_score: base,
        stopwords_hash: data.stopwords_hash.clone(),
        taxonomy_hash: data.taxonomy_hash.clone(),
        ..GbdtModel::constant(base, lr)
    };
    Ok((model, report))
}

fn val_loss_of(trees: &[Arena], base: f64, lr: f64, x: &[[f64; FEATURE_COUNT]], y: &[f64]) -> f64 {
    let m: Vec<f64> = x
        .iter()
        .map(|x| base + lr * trees.iter().map(|t| t.eval(x)).sum::<f64>())
        .collect();
    log_loss(&m, y)
}

/// Merges sibling leaves whose contribution is below the `pct` percentile
/// of all leaf magnitudes into their parent's Newton value; a merge is kept
/// only if validation loss stays within 1e-6 of `baseline`.
fn prune(
    trees: &mut [Arena],
    base: f64,
    lr: f64,
    x: &[[f64; FEATURE_COUNT]],
    y: &[f64],
    pct: f64,
    baseline: f64,
) -> usize {
    let mut mags: Vec<f64> = trees
        .iter()
        .flat_map(Arena::leaf_values)
        .map(|v| libm::fabs(lr * v))
        .collect();
    if mags.is_empty() {
        return 0;
    }
    mags.sort_by(f64::total_cmp);
    let rank = libm::ceil(pct * mags.len() as f64) as usize;
    let cutoff = mags[rank.clamp(1, mags.len()) - 1];
    let small = |v: f64| libm::fabs(lr * v) <= cutoff;

    let mut margins: Vec<f64> = x
        .iter()
        .map(|x| base + lr * trees.iter().map(|t| t.eval(x)).sum::<f64>())
        .collect();
    let mut pruned = 0;
    loop {
        let mut changed = false;
        for t in 0..trees.len() {
            for node in trees[t].prunable() {
                let (_, _, _, l, r) = trees[t].nodes[node].split.expect("prunable node is a split");
                if !(small(trees[t].nodes[l].value) && small(trees[t].nodes[r].value)) {
                    continue;
                }
                let mut candidate = trees[t].clone();
                candidate.nodes[node].split = None;
                let trial: Vec<f64> = margins
                    .iter()
                    .zip(x)
                    .map(|(m, x)| m - lr * trees[t].eval(x) + lr * candidate.eval(x))
                    .collect();
                if log_loss(&trial, y) <= baseline + 1e-6 {
                    trees[t] = candidate;
                    margins = trial;
                    pruned += 2;
                    changed = true;
                }
            }
        }
        if !changed {
            return pruned;
        }
    }
}

/// Appends up to `max_new_trees` trees fitted to the residuals of `model`
/// on `new_data`, refusing when the mean absolute score change over
/// `probe` (or `new_data` when `probe` is empty) exceeds `drift_bound`.
pub fn incremental_train(
    model: &GbdtModel,
    new_data: &TrainingSet,
    max_new_trees: usize,
    params: &TrainParams,
    drift_bound: f64,
    probe: &[FeatureVector],
) -> Result<GbdtModel, RankerError> {
    if model.feature_names != FeatureVector::names() {
        return Err(RankerError::FeatureMismatch);
    }
    if model.stopwords_hash != new_data.stopwords_hash || model.taxonomy_hash != new_data.taxonomy_hash {
        return Err(RankerError::ProvenanceMismatch);
    }
    if max_new_trees == 0 {
        return Ok(model.clone());
    }
    params.check()?;
    check_data(new_data)?;
    if new_data.rows.is_empty() {
        return Err(RankerError::TooFewRows { rows: 0, min: 1 });
    }
    let (x, y): (Vec<[f64; FEATURE_COUNT]>, Vec<f64>) = new_data
        .rows
        .iter()
        .map(|r| (r.features.to_array(), r.label as f64))
        .unzip();
    let grower = Grower::new(&x, params);
    let lr = model.learning_rate;
    let mut margins: Vec<f64> = x.iter().map(|x| model.margin(x)).collect::<Result<_, _>>()?;
    let mut out = model.clone();
    for _ in 0..max_new_trees {
        let (g, h) = gradients(&margins, &y);
        let tree = grower.grow(&g, &h);
        for (m, x) in margins.iter_mut().zip(&x) {
            *m += lr * tree.eval(x);
        }
        out.trees.push(tree.to_node(0));
    }
    let probe: Vec<[f64; FEATURE_COUNT]> = if probe.is_empty() {
        x
    } else {
        probe.iter().map(FeatureVector::to_array).collect()
    };
    let drift = probe
        .iter()
        .map(|p| Ok(libm::fabs(out.score(p)? - model.score(p)?)))
        .sum::<Result<f64, RankerError>>()?
        / probe.len() as f64;
    if drift > drift_bound {
        return Err(RankerError::DriftExceeded {
            drift,
            bound: drift_bound,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranker::metrics::auc;

    fn row(x: f64, label: u8, q: u64) -> TrainingRow {
        let mut a = [0.0; FEATURE_COUNT];
        a[0] = x;
        TrainingRow {
            features: FeatureVector::from_array(a),
            label,
            query_id: q,
        }
    }

    fn separable(n: usize, seed: u64) -> TrainingSet {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        TrainingSet::new(
            (0..n)
                .map(|i| {
                    let x: f64 = rng.gen();
                    row(x, (x > 0.5) as u8, i as u64)
                })
                .collect(),
        )
    }

    #[test]
    fn zero_trees_is_prior() {
        let data = separable(100, 1);
        let p = TrainParams {
            max_trees: 0,
            ..TrainParams::default()
        };
        let m = train(&data, &p).unwrap();
        assert!(m.trees.is_empty());
        let s = m.score(&[0.0; FEATURE_COUNT]).unwrap();
        assert!((s - data.positive_rate()).abs() < 1e-12);
        assert_eq!(GbdtModel::constant(0.0, 0.1).score(&[0.3; FEATURE_COUNT]).unwrap(), 0.5);
    }

    #[test]
    fn separable_reaches_full_validation_auc() {
        let data = separable(200, 3);
        let p = TrainParams::default();
        let m = train(&data, &p).unwrap();
        assert!(!m.trees.is_empty());
        assert!(m.max_depth() <= p.max_depth);
        let (tr, va) = split_rows(&data, p.validation_fraction, p.seed);
        assert!(!tr.is_empty());
        let scores: Vec<f64> = va.iter().map(|&i| m.score_features(&data.rows[i].features).unwrap()).collect();
        let labels: Vec<bool> = va.iter().map(|&i| data.rows[i].label == 1).collect();
        assert_eq!(auc(&scores, &labels), Some(1.0));
    }

    #[test]
    fn degenerate_and_small_inputs_rejected() {
        let p = TrainParams::default();
        let one_class = TrainingSet::new((0..30).map(|i| row(i as f64, 1, i)).collect());
        assert_eq!(train(&one_class, &p), Err(RankerError::DegenerateLabels));
        let few = TrainingSet::new((0..5).map(|i| row(i as f64, (i % 2) as u8, i)).collect());
        assert!(matches!(train(&few, &p), Err(RankerError::TooFewRows { .. })));
    }

    #[test]
    fn split_keeps_query_groups_together() {
        let data = TrainingSet::new((0..60).map(|i| row(i as f64, (i % 2) as u8, i / 3)).collect());
        let (tr, va) = split_rows(&data, 0.25, 9);
        let qt: BTreeSet<u64> = tr.iter().map(|&i| data.rows[i].query_id).collect();
        let qv: BTreeSet<u64> = va.iter().map(|&i| data.rows[i].query_id).collect();
        assert!(qt.is_disjoint(&qv));
        assert_eq!(qv.len(), 5);
    }

    #[test]
    fn pruning_within_tolerance() {
        for seed in 0..5 {
            let data = separable(150, seed);
            let (_, r) = train_with_report(&data, &TrainParams { prune_pct: 0.5, ..TrainParams::default() }).unwrap();
            assert!(r.validation_loss <= r.validation_loss_at_stop + 1e-6, "{r:?}");
        }
    }

    #[test]
    fn adjacent_float_values_split_cleanly() {
        let lo = 0.3_f64;
        let hi = f64::from_bits(lo.to_bits() + 1);
        let data = TrainingSet::new((0..80).map(|i| row(if i % 2 == 0 { lo } else { hi }, (i % 2) as u8, i)).collect());
        let m = train(&data, &TrainParams { validation_fraction: 0.0, ..TrainParams::default() }).unwrap();
        let mut a = [0.0; FEATURE_COUNT];
        a[0] = lo;
        let s_lo = m.score(&a).unwrap();
        a[0] = hi;
        assert!(m.score(&a).unwrap() > s_lo);
    }

    #[test]
    fn unused_features_do_not_matter() {
        let m = train(&separable(120, 5), &TrainParams::default()).unwrap();
        assert_eq!(m.used_features().into_iter().collect::<Vec<_>>(), [0]);
        let mut a = [0.0; FEATURE_COUNT];
        a[0] = 0.7;
        let s = m.score(&a).unwrap();
        a[5] = 99.0;
        assert_eq!(m.score(&a).unwrap(), s);
        assert!(matches!(m.score(&[0.0; 3]), Err(RankerError::DimensionMismatch { .. })));
    }

    #[test]
    fn incremental_zero_trees_is_identity() {
        let data = separable(100, 2);
        let m = train(&data, &TrainParams::default()).unwrap();
        let m2 = incremental_train(&m, &data, 0, &TrainParams::default(), 0.15, &[]).unwrap();
        assert_eq!(m, m2);
    }

    #[test]
    fn incremental_checks_features_and_provenance() {
        let data = separable(100, 2);
        let m = train(&data, &TrainParams::default()).unwrap();
        let other = data.clone().with_provenance("x", "y");
        assert_eq!(
            incremental_train(&m, &other, 2, &TrainParams::default(), 0.15, &[]),
            Err(RankerError::ProvenanceMismatch)
        );
        let mut renamed = m.clone();
        renamed.feature_names[0] = "other".into();
        assert_eq!(
            incremental_train(&renamed, &data, 2, &TrainParams::default(), 0.15, &[]),
            Err(RankerError::FeatureMismatch)
        );
    }

    #[test]
    fn model_json_shape() {
        let m = GbdtModel {
            trees: vec![TreeNode::Split {
                feature_index: 0,
                threshold: 0.5,
                gain: 1.0,
                left: Box::new(TreeNode::Leaf { value: -1.0 }),
                right: Box::new(TreeNode::Leaf { value: 1.0 }),
            }],
            ..GbdtModel::constant(0.0, 0.5)
        };
        assert!(m.validate().is_ok());
        assert!(m.is_monotone());
        let mut bad = m.clone();
        bad.feature_names.truncate(0);
        assert!(bad.validate().is_err());
    }
}
