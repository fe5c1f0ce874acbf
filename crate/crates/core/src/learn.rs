//! Arc classifiers: class-weighted logistic regression and a class-weighted
//! random forest, plus evaluation metrics and the versioned model file.
//!
//! Both trainers sort their input into a canonical order (instance id, then
//! arc id) before touching any randomness, so shuffling the training rows
//! changes nothing about the trained model.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{ArcSample, FeatureVector, NormStats, FEATURE_COUNT, FEATURE_LAYOUT_VERSION};
use crate::net::Network;
use crate::seed::rng_for;

/// Highest model file version this build can read.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeights {
    /// w_c = n / (2 n_c): errors on the rare class cost more.
    Balanced,
    Uniform,
}

#[derive(Debug, Clone)]
pub struct LogisticHyper {
    /// Inverse regularization strength; the L2 penalty is ||w||^2 / (2C).
    pub c: f64,
    pub class_weights: ClassWeights,
    pub max_iter: usize,
    /// Stop when the gradient max-norm falls below this.
    pub tol: f64,
}

impl Default for LogisticHyper {
    fn default() -> Self {
        LogisticHyper {
            c: 1.0,
            class_weights: ClassWeights::Balanced,
            max_iter: 50_000,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ForestHyper {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Features drawn (without replacement) per split.
    pub max_features: usize,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
    pub bootstrap: bool,
    pub class_weights: ClassWeights,
}

impl Default for ForestHyper {
    fn default() -> Self {
        ForestHyper {
            n_trees: 500,
            max_depth: 5,
            max_features: 5,
            min_samples_leaf: 50,
            min_samples_split: 100,
            bootstrap: true,
            class_weights: ClassWeights::Balanced,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    Logistic { weights: Vec<f64>, bias: f64 },
    Forest { trees: Vec<Tree> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        /// Class-weighted positive fraction of the training samples here.
        prob: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub feature_layout_version: u32,
    /// Normalization applied to inputs before the classifier; trainers fit
    /// it on their training rows.
    pub norm_stats: NormStats,
    /// Keep an arc when its probability reaches this.
    pub threshold: f64,
    pub params: ModelParams,
}

impl TrainedModel {
    pub fn kind(&self) -> &'static str {
        match self.params {
            ModelParams::Logistic { .. } => "logistic",
            ModelParams::Forest { .. } => "forest",
        }
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training data is empty")]
    Empty,
    #[error("class {0} is absent; cannot fit balanced weights or a useful classifier")]
    MissingClass(u8),
    #[error("need at least {need} samples for min_samples_leaf={need}, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("bad hyperparameter: {0}")]
    BadHyper(String),
    #[error("model file: {0}")]
    BadModel(String),
    #[error("model format version {found} is newer than supported {supported}")]
    IncompatibleVersion { found: u32, supported: u32 },
    #[error("model feature layout {found} does not match this build's {expected}")]
    LayoutMismatch { found: u32, expected: u32 },
}

/// Confusion counts and the derived rates. `balanced_accuracy` is exactly
/// `(recall + tnr) / 2`. Rates are NaN when their class is absent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub recall: f64,
    pub tnr: f64,
    pub balanced_accuracy: f64,
}

impl Metrics {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Metrics {
        let recall = tp as f64 / (tp + fn_) as f64;
        let tnr = tn as f64 / (tn + fp) as f64;
        Metrics {
            tp,
            fp,
            tn,
            fn_,
            recall,
            tnr,
            balanced_accuracy: (recall + tnr) / 2.0,
        }
    }
}

fn canonical_order(data: &[ArcSample]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.sort_by(|&a, &b| {
        data[a]
            .instance_id
            .cmp(&data[b].instance_id)
            .then_with(|| data[a].arc_id.cmp(&data[b].arc_id))
    });
    idx
}

fn class_weights(data: &[ArcSample], scheme: ClassWeights) -> Result<(f64, f64), TrainError> {
    if data.is_empty() {
        return Err(TrainError::Empty);
    }
    let n1 = data.iter().filter(|s| s.label).count();
    let n0 = data.len() - n1;
    match scheme {
        ClassWeights::Uniform => Ok((1.0, 1.0)),
        ClassWeights::Balanced => {
            if n0 == 0 {
                return Err(TrainError::MissingClass(0));
            }
            if n1 == 0 {
                return Err(TrainError::MissingClass(1));
            }
            let n = data.len() as f64;
            Ok((n / (2.0 * n0 as f64), n / (2.0 * n1 as f64)))
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Fits class-weighted logistic regression by full-batch gradient descent on
///
///   sum_i w_{y_i} * bce(y_i, sigmoid(w . x_i + b)) + ||w||^2 / (2C)
///
/// from zero-initialized parameters, with a fixed step of 1/H where H bounds
/// the objective's curvature, so the descent is deterministic and
/// convergent. Stops when the gradient max-norm drops below `tol`.
pub fn train_logistic(
    data: &[ArcSample],
    hyper: &LogisticHyper,
) -> Result<TrainedModel, TrainError> {
    if data.is_empty() {
        return Err(TrainError::Empty);
    }
    if !(hyper.c > 0.0) {
        return Err(TrainError::BadHyper(format!("C must be positive, got {}", hyper.c)));
    }
    let order = canonical_order(data);
    let (w0, w1) = class_weights(data, hyper.class_weights)?;

    // Curvature bound: the BCE Hessian is at most 1/4 per sample on the
    // augmented vector (x, 1), plus the L2 term.
    let mut curvature = 1.0 / hyper.c;
    for &i in &order {
        let s = &data[i];
        let wi = if s.label { w1 } else { w0 };
        let sq: f64 = s.features.iter().map(|v| v * v).sum::<f64>() + 1.0;
        curvature += 0.25 * wi * sq;
    }
    let step = 1.0 / curvature;

    let mut weights = vec![0.0; FEATURE_COUNT];
    let mut bias = 0.0;
    let mut grad = vec![0.0; FEATURE_COUNT];
    for _ in 0..hyper.max_iter {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        for &i in &order {
            let s = &data[i];
            let wi = if s.label { w1 } else { w0 };
            let z = bias
                + weights
                    .iter()
                    .zip(&s.features)
                    .map(|(w, x)| w * x)
                    .sum::<f64>();
            let err = wi * (sigmoid(z) - f64::from(u8::from(s.label)));
            for (g, x) in grad.iter_mut().zip(&s.features) {
                *g += err * x;
            }
            grad_b += err;
        }
        for (g, w) in grad.iter_mut().zip(&weights) {
            *g += w / hyper.c;
        }
        let max_norm = grad
            .iter()
            .chain(std::iter::once(&grad_b))
            .fold(0.0f64, |m, g| m.max(g.abs()));
        if max_norm < hyper.tol {
            break;
        }
        for (w, g) in weights.iter_mut().zip(&grad) {
            *w -= step * g;
        }
        bias -= step * grad_b;
    }

    Ok(TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        feature_layout_version: FEATURE_LAYOUT_VERSION,
        norm_stats: NormStats::fit(data),
        threshold: 0.5,
        params: ModelParams::Logistic { weights, bias },
    })
}

/// Trains a random forest of CART trees on class-weighted Gini impurity.
///
/// Class weights come from the full training set; each tree resamples the
/// canonical order with its own seeded stream (n-of-n with replacement when
/// `bootstrap` is set). Splits consider `max_features` features drawn per
/// split and thresholds at midpoints between consecutive distinct values,
/// and are only accepted when both children keep `min_samples_leaf` rows.
pub fn train_forest(
    data: &[ArcSample],
    hyper: &ForestHyper,
    seed: u64,
) -> Result<TrainedModel, TrainError> {
    if data.is_empty() {
        return Err(TrainError::Empty);
    }
    if hyper.n_trees == 0 || hyper.max_features == 0 {
        return Err(TrainError::BadHyper("n_trees and max_features must be positive".into()));
    }
    if data.len() < hyper.min_samples_leaf {
        return Err(TrainError::TooFewSamples {
            need: hyper.min_samples_leaf,
            got: data.len(),
        });
    }
    let order = canonical_order(data);
    let (w0, w1) = class_weights(data, hyper.class_weights)?;
    let max_features = hyper.max_features.min(FEATURE_COUNT);

    let mut trees = Vec::with_capacity(hyper.n_trees);
    for t in 0..hyper.n_trees {
        let mut rng = rng_for(seed, "tree", t as u64);
        let sample: Vec<usize> = if hyper.bootstrap {
            (0..order.len()).map(|_| order[rng.gen_range(0..order.len())]).collect()
        } else {
            order.clone()
        };
        let mut tree = Tree { nodes: Vec::new() };
        grow(&mut tree, data, sample, 0, hyper, max_features, (w0, w1), &mut rng);
        trees.push(tree);
    }

    Ok(TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        feature_layout_version: FEATURE_LAYOUT_VERSION,
        norm_stats: NormStats::fit(data),
        threshold: 0.5,
        params: ModelParams::Forest { trees },
    })
}

/// Builds the subtree for `sample` and returns its node index.
#[allow(clippy::too_many_arguments)]
fn grow(
    tree: &mut Tree,
    data: &[ArcSample],
    sample: Vec<usize>,
    depth: usize,
    hyper: &ForestHyper,
    max_features: usize,
    (w0, w1): (f64, f64),
    rng: &mut rand_chacha::ChaCha8Rng,
) -> usize {
    let n1 = sample.iter().filter(|&&i| data[i].label).count();
    let n0 = sample.len() - n1;
    let (cw0, cw1) = (w0 * n0 as f64, w1 * n1 as f64);
    let leaf_prob = cw1 / (cw0 + cw1);

    let splittable = depth < hyper.max_depth
        && sample.len() >= hyper.min_samples_split
        && n0 > 0
        && n1 > 0;
    let best = if splittable {
        best_split(data, &sample, max_features, (w0, w1), hyper.min_samples_leaf, rng)
    } else {
        None
    };
    let Some((feature, threshold)) = best else {
        tree.nodes.push(TreeNode::Leaf { prob: leaf_prob });
        return tree.nodes.len() - 1;
    };

    let (mut left, mut right) = (Vec::new(), Vec::new());
    for &i in &sample {
        if data[i].features[feature] <= threshold {
            left.push(i);
        } else {
            right.push(i);
        }
    }
    let id = tree.nodes.len();
    tree.nodes.push(TreeNode::Leaf { prob: leaf_prob });
    let left_id = grow(tree, data, left, depth + 1, hyper, max_features, (w0, w1), rng);
    let right_id = grow(tree, data, right, depth + 1, hyper, max_features, (w0, w1), rng);
    tree.nodes[id] = TreeNode::Split {
        feature,
        threshold,
        left: left_id,
        right: right_id,
    };
    id
}

/// Scans the drawn features for the weighted-Gini-optimal midpoint split.
/// Candidate features are visited in ascending index and thresholds in
/// ascending value, and only a strict improvement replaces the incumbent,
/// so ties resolve deterministically.
fn best_split(
    data: &[ArcSample],
    sample: &[usize],
    max_features: usize,
    (w0, w1): (f64, f64),
    min_leaf: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Option<(usize, f64)> {
    let mut features: Vec<usize> = (0..FEATURE_COUNT).collect();
    for k in 0..max_features {
        let j = rng.gen_range(k..FEATURE_COUNT);
        features.swap(k, j);
    }
    let mut drawn = features[..max_features].to_vec();
    drawn.sort_unstable();

    let total1 = sample.iter().filter(|&&i| data[i].label).count();
    let total0 = sample.len() - total1;
    let (tw0, tw1) = (w0 * total0 as f64, w1 * total1 as f64);
    let parent_impurity = weighted_gini(tw0, tw1);

    let mut best: Option<(f64, usize, f64)> = None;
    let mut values: Vec<(f64, bool)> = Vec::with_capacity(sample.len());
    for &f in &drawn {
        values.clear();
        values.extend(sample.iter().map(|&i| (data[i].features[f], data[i].label)));
        values.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (mut l0, mut l1) = (0usize, 0usize);
        for k in 0..values.len() - 1 {
            if values[k].1 {
                l1 += 1;
            } else {
                l0 += 1;
            }
            if values[k].0 == values[k + 1].0 {
                continue;
            }
            let left_n = l0 + l1;
            let right_n = values.len() - left_n;
            if left_n < min_leaf || right_n < min_leaf {
                continue;
            }
            let (lw0, lw1) = (w0 * l0 as f64, w1 * l1 as f64);
            let (rw0, rw1) = (tw0 - lw0, tw1 - lw1);
            let score = weighted_gini(lw0, lw1) + weighted_gini(rw0, rw1);
            if score < parent_impurity - 1e-12
                && best.map_or(true, |(b, _, _)| score < b - 1e-12)
            {
                let threshold = 0.5 * (values[k].0 + values[k + 1].0);
                best = Some((score, f, threshold));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

/// Weighted Gini impurity scaled by the node's weight mass:
/// W * (1 - (W0/W)^2 - (W1/W)^2), which makes sibling scores addable.
fn weighted_gini(cw0: f64, cw1: f64) -> f64 {
    let w = cw0 + cw1;
    if w <= 0.0 {
        return 0.0;
    }
    let p0 = cw0 / w;
    let p1 = cw1 / w;
    w * (1.0 - p0 * p0 - p1 * p1)
}

fn tree_prob(tree: &Tree, x: &FeatureVector) -> f64 {
    let mut node = 0;
    loop {
        match &tree.nodes[node] {
            TreeNode::Leaf { prob } => return *prob,
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                node = if x[*feature] <= *threshold { *left } else { *right };
            }
        }
    }
}

/// Applies the model's normalization and classifier to a raw feature vector.
/// Returns the positive-class probability and the keep decision
/// (`prob >= threshold`).
pub fn predict(model: &TrainedModel, raw: &FeatureVector) -> (f64, bool) {
    let x = model.norm_stats.apply(raw);
    let prob = match &model.params {
        ModelParams::Logistic { weights, bias } => {
            let z = bias + weights.iter().zip(&x).map(|(w, v)| w * v).sum::<f64>();
            sigmoid(z)
        }
        ModelParams::Forest { trees } => {
            trees.iter().map(|t| tree_prob(t, &x)).sum::<f64>() / trees.len() as f64
        }
    };
    (prob, prob >= model.threshold)
}

/// Classifies every selectable arc of a full network: features are
/// extracted raw, normalized with this instance's own fitted ranges (the
/// same operation training data went through), and passed to the model.
/// Depot-incident arcs are never kept by the mask; reduction re-adds them.
pub fn predict_mask(model: &TrainedModel, net: &Network) -> Result<Vec<bool>, TrainError> {
    if model.feature_layout_version != FEATURE_LAYOUT_VERSION {
        return Err(TrainError::LayoutMismatch {
            found: model.feature_layout_version,
            expected: FEATURE_LAYOUT_VERSION,
        });
    }
    let ids = net.selectable_arc_ids();
    let mut raws = Vec::with_capacity(ids.len());
    for &arc_id in &ids {
        let f = crate::features::extract_features(net, arc_id)
            .map_err(|e| TrainError::BadModel(e.to_string()))?;
        raws.push(f);
    }
    let mut stats = NormStats {
        min: vec![f64::INFINITY; FEATURE_COUNT],
        max: vec![f64::NEG_INFINITY; FEATURE_COUNT],
    };
    for f in &raws {
        for i in 0..FEATURE_COUNT {
            stats.min[i] = stats.min[i].min(f[i]);
            stats.max[i] = stats.max[i].max(f[i]);
        }
    }
    let mut mask = vec![false; net.arcs.len()];
    for (arc_id, raw) in ids.iter().zip(&raws) {
        let normalized = stats.apply(raw);
        let (_, keep) = predict(model, &normalized);
        mask[*arc_id] = keep;
    }
    Ok(mask)
}

/// Counts the model's confusion matrix over labeled samples.
pub fn evaluate(model: &TrainedModel, data: &[ArcSample]) -> Metrics {
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for s in data {
        let (_, keep) = predict(model, &s.features);
        match (s.label, keep) {
            (true, true) => tp += 1,
            (true, false) => fn_ += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
        }
    }
    Metrics::from_counts(tp, fp, tn, fn_)
}

/// Serializes a model as versioned JSON text. Floats use the shortest
/// representation that parses back to the identical bit pattern.
pub fn save_model(model: &TrainedModel) -> String {
    serde_json::to_string_pretty(model).expect("model serialization cannot fail")
}

/// Parses a model file, rejecting versions newer than this build and any
/// feature-layout mismatch.
pub fn load_model(text: &str) -> Result<TrainedModel, TrainError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| TrainError::BadModel(e.to_string()))?;
    let found = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| TrainError::BadModel("missing format_version".into()))? as u32;
    if found > MODEL_FORMAT_VERSION {
        return Err(TrainError::IncompatibleVersion {
            found,
            supported: MODEL_FORMAT_VERSION,
        });
    }
    let model: TrainedModel =
        serde_json::from_value(value).map_err(|e| TrainError::BadModel(e.to_string()))?;
    if model.feature_layout_version != FEATURE_LAYOUT_VERSION {
        return Err(TrainError::LayoutMismatch {
            found: model.feature_layout_version,
            expected: FEATURE_LAYOUT_VERSION,
        });
    }
    match &model.params {
        ModelParams::Logistic { weights, .. } => {
            if weights.len() != FEATURE_COUNT {
                return Err(TrainError::BadModel(format!(
                    "expected {} weights, found {}",
                    FEATURE_COUNT,
                    weights.len()
                )));
            }
        }
        ModelParams::Forest { trees } => {
            if trees.is_empty() {
                return Err(TrainError::BadModel("forest has no trees".into()));
            }
        }
    }
    if model.norm_stats.min.len() != FEATURE_COUNT || model.norm_stats.max.len() != FEATURE_COUNT {
        return Err(TrainError::BadModel("norm_stats length mismatch".into()));
    }
    Ok(model)
}

impl NormStats {
    /// The identity transform on already-normalized vectors.
    pub fn identity() -> NormStats {
        NormStats {
            min: vec![0.0; FEATURE_COUNT],
            max: vec![1.0; FEATURE_COUNT],
        }
    }
}
