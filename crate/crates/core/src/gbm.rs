//! Gradient-boosted regression trees with exact greedy splits.
//!
//! Squared loss for numeric targets, logistic loss for binary targets and
//! per-class softmax trees for multiclass targets. Leaves carry Newton
//! steps `−G/(H+λ)`; every node records its cover (training rows reaching
//! it), which TreeSHAP later uses as the background distribution.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::diagnostics::Diagnostic;
use crate::error::{Error, Result};
use crate::rng;
use crate::tabular::ColumnSpec;

/// L2 penalty on leaf values.
const LAMBDA: f64 = 1.0;
const MIN_GAIN: f64 = 1e-12;
pub const MIN_ROWS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TreeNode {
    Internal {
        feature: usize,
        threshold: f64,
        cover: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        value: f64,
        cover: f64,
    },
}

impl TreeNode {
    pub fn leaf(value: f64, cover: f64) -> Self {
        TreeNode::Leaf { value, cover }
    }

    /// Internal node whose cover is the sum of its children's.
    pub fn split(feature: usize, threshold: f64, left: TreeNode, right: TreeNode) -> Self {
        TreeNode::Internal {
            feature,
            threshold,
            cover: left.cover() + right.cover(),
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn cover(&self) -> f64 {
        match self {
            TreeNode::Internal { cover, .. } | TreeNode::Leaf { cover, .. } => *cover,
        }
    }

    /// Rows with `x[feature] < threshold` descend left.
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value, .. } => return *value,
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if row[*feature] < *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    /// Cover-weighted mean of the leaf values.
    pub fn expected_value(&self) -> f64 {
        match self {
            TreeNode::Leaf { value, .. } => *value,
            TreeNode::Internal {
                cover, left, right, ..
            } => {
                (left.cover() * left.expected_value() + right.cover() * right.expected_value())
                    / cover
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn uses_feature(&self, f: usize) -> bool {
        match self {
            TreeNode::Leaf { .. } => false,
            TreeNode::Internal {
                feature,
                left,
                right,
                ..
            } => *feature == f || left.uses_feature(f) || right.uses_feature(f),
        }
    }

    /// Children's covers sum to the parent's and every cover is positive.
    pub fn covers_consistent(&self) -> bool {
        match self {
            TreeNode::Leaf { cover, .. } => *cover > 0.0,
            TreeNode::Internal {
                cover, left, right, ..
            } => {
                *cover > 0.0
                    && (left.cover() + right.cover() - cover).abs() <= 1e-9 * cover
                    && left.covers_consistent()
                    && right.covers_consistent()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "classes", rename_all = "snake_case")]
pub enum Task {
    Regression,
    Binary,
    Multiclass(usize),
}

impl Task {
    /// Number of raw outputs (trees per boosting round).
    pub fn n_outputs(&self) -> usize {
        match self {
            Task::Multiclass(k) => *k,
            _ => 1,
        }
    }

    pub fn is_classification(&self) -> bool {
        !matches!(self, Task::Regression)
    }

    /// Regression for numeric columns, binary or multiclass by cardinality.
    pub fn for_column(spec: &ColumnSpec) -> Self {
        match spec.cardinality() {
            None => Task::Regression,
            Some(2) => Task::Binary,
            Some(k) => Task::Multiclass(k),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbmParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_child_cover: f64,
    pub holdout_fraction: f64,
}

impl Default for GbmParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 4,
            learning_rate: 0.1,
            min_child_cover: 5.0,
            holdout_fraction: 0.25,
        }
    }
}

/// Dense row-major feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
}

impl FeatureMatrix {
    pub fn new(data: Vec<f64>, n_rows: usize, n_cols: usize) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return Err(Error::InvalidArgument(format!(
                "matrix buffer has {} entries, expected {n_rows}×{n_cols}",
                data.len()
            )));
        }
        Ok(Self {
            data,
            n_rows,
            n_cols,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::InvalidArgument("rows of unequal length".into()));
        }
        Self::new(rows.concat(), rows.len(), n_cols)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.n_cols..(r + 1) * self.n_cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.n_cols + c]
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.n_cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        FeatureMatrix {
            data,
            n_rows: rows.len(),
            n_cols: self.n_cols,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmModel {
    pub task: Task,
    /// One ordered tree list per output.
    pub trees: Vec<Vec<TreeNode>>,
    pub base_score: Vec<f64>,
    pub learning_rate: f64,
    pub n_features: usize,
    /// Table columns feeding the model, in feature order.
    #[serde(default)]
    pub feature_columns: Vec<usize>,
    #[serde(default)]
    pub target: Option<ColumnSpec>,
    /// Held-out accuracy `Acc(v)`.
    pub acc: f64,
    #[serde(default)]
    pub holdout_rows: Vec<usize>,
    /// Mean training loss after each boosting round.
    #[serde(default)]
    pub train_loss: Vec<f64>,
}

impl GbmModel {
    /// An untrained model: zero trees per output.
    pub fn constant(task: Task, base_score: Vec<f64>, learning_rate: f64, n_features: usize) -> Self {
        Self {
            task,
            trees: vec![Vec::new(); task.n_outputs()],
            base_score,
            learning_rate,
            n_features,
            feature_columns: (0..n_features).collect(),
            target: None,
            acc: 0.0,
            holdout_rows: Vec::new(),
            train_loss: Vec::new(),
        }
    }

    pub fn n_outputs(&self) -> usize {
        self.task.n_outputs()
    }

    /// `base_score + learning_rate·Σ_t tree_t(row)` for each output.
    pub fn predict_raw(&self, row: &[f64]) -> Vec<f64> {
        self.trees
            .iter()
            .zip(&self.base_score)
            .map(|(trees, base)| {
                base + self.learning_rate * trees.iter().map(|t| t.predict(row)).sum::<f64>()
            })
            .collect()
    }

    /// Class index (classification) or prediction (regression).
    pub fn predict(&self, row: &[f64]) -> f64 {
        let raw = self.predict_raw(row);
        match self.task {
            Task::Regression => raw[0],
            Task::Binary => f64::from(u8::from(raw[0] > 0.0)),
            Task::Multiclass(_) => argmax(&raw) as f64,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Held-out quality in [0, 1]: fraction correct for classification,
/// `max(0, 1 − MSE/Var(y))` for regression. A constant regression holdout
/// scores 0 and yields a warning.
pub fn accuracy(model: &GbmModel, x: &FeatureMatrix, y: &[f64]) -> (f64, Option<Diagnostic>) {
    let n = y.len();
    if n == 0 {
        return (
            0.0,
            Some(Diagnostic::new("gbm", "empty_holdout", "holdout is empty")),
        );
    }
    if model.task.is_classification() {
        let correct = (0..n).filter(|&i| model.predict(x.row(i)) == y[i]).count();
        return (correct as f64 / n as f64, None);
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    if var == 0.0 {
        return (
            0.0,
            Some(Diagnostic::new(
                "gbm",
                "constant_holdout",
                "holdout target has zero variance; accuracy set to 0",
            )),
        );
    }
    let mse = (0..n)
        .map(|i| {
            let e = y[i] - model.predict_raw(x.row(i))[0];
            e * e
        })
        .sum::<f64>()
        / n as f64;
    ((1.0 - mse / var).clamp(0.0, 1.0), None)
}

fn validate_target(y: &[f64], task: Task) -> Result<()> {
    if y.iter().all(|v| *v == y[0]) {
        return Err(Error::ConstantTarget);
    }
    let classes = match task {
        Task::Regression => return Ok(()),
        Task::Binary => 2,
        Task::Multiclass(k) => k,
    };
    if let Some(bad) = y
        .iter()
        .find(|v| v.fract() != 0.0 || **v < 0.0 || **v >= classes as f64)
    {
        return Err(Error::InvalidArgument(format!(
            "class label {bad} outside 0..{classes}"
        )));
    }
    Ok(())
}

/// Deterministic holdout split: `(train, holdout)` row indices, each sorted.
pub fn holdout_split(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::seeded(seed));
    let n_hold = ((n as f64 * fraction).round() as usize).clamp(1, n - 1);
    let mut hold = idx[..n_hold].to_vec();
    let mut train = idx[n_hold..].to_vec();
    hold.sort_unstable();
    train.sort_unstable();
    (train, hold)
}

/// Fit on a seeded train/holdout split and score `acc` on the holdout.
pub fn fit(
    x: &FeatureMatrix,
    y: &[f64],
    task: Task,
    params: &GbmParams,
    seed: u64,
) -> Result<GbmModel> {
    if x.n_rows() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "{} feature rows but {} targets",
            x.n_rows(),
            y.len()
        )));
    }
    if y.len() < MIN_ROWS {
        return Err(Error::TooFewRows {
            min: MIN_ROWS,
            got: y.len(),
        });
    }
    if !(params.holdout_fraction > 0.0 && params.holdout_fraction < 1.0) {
        return Err(Error::InvalidArgument(
            "holdout_fraction must lie in (0, 1)".into(),
        ));
    }
    if params.max_depth == 0 || params.learning_rate <= 0.0 {
        return Err(Error::InvalidArgument(
            "max_depth and learning_rate must be positive".into(),
        ));
    }
    validate_target(y, task)?;

    let (train, hold) = holdout_split(y.len(), params.holdout_fraction, seed);
    let x_train = x.select_rows(&train);
    let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
    let mut model = boost(&x_train, &y_train, task, params);
    let x_hold = x.select_rows(&hold);
    let y_hold: Vec<f64> = hold.iter().map(|&i| y[i]).collect();
    model.acc = accuracy(&model, &x_hold, &y_hold).0;
    model.holdout_rows = hold;
    Ok(model)
}

fn initial_scores(y: &[f64], task: Task) -> Vec<f64> {
    let n = y.len() as f64;
    match task {
        Task::Regression => vec![y.iter().sum::<f64>() / n],
        Task::Binary => {
            let p = (y.iter().sum::<f64>() / n).clamp(1e-6, 1.0 - 1e-6);
            vec![(p / (1.0 - p)).ln()]
        }
        Task::Multiclass(k) => (0..k)
            .map(|c| {
                let p = y.iter().filter(|v| **v as usize == c).count() as f64 / n;
                p.max(1e-6).ln()
            })
            .collect(),
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn softmax_into(raw: &[f64], out: &mut [f64]) {
    let m = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for (o, r) in out.iter_mut().zip(raw) {
        *o = (r - m).exp();
        s += *o;
    }
    for o in out.iter_mut() {
        *o /= s;
    }
}

/// Mean training loss given raw scores `f` (row-major, `k` per row).
fn mean_loss(f: &[f64], y: &[f64], task: Task) -> f64 {
    let n = y.len();
    let total: f64 = match task {
        Task::Regression => (0..n).map(|i| 0.5 * (f[i] - y[i]).powi(2)).sum(),
        Task::Binary => (0..n)
            .map(|i| {
                let z = f[i];
                // log(1 + e^z) − y·z, evaluated stably
                z.max(0.0) + (-z.abs()).exp().ln_1p() - y[i] * z
            })
            .sum(),
        Task::Multiclass(k) => (0..n)
            .map(|i| {
                let row = &f[i * k..(i + 1) * k];
                let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = m + row.iter().map(|r| (r - m).exp()).sum::<f64>().ln();
                lse - row[y[i] as usize]
            })
            .sum(),
    };
    total / n as f64
}

fn boost(x: &FeatureMatrix, y: &[f64], task: Task, params: &GbmParams) -> GbmModel {
    let n = x.n_rows();
    let k = task.n_outputs();
    let base = initial_scores(y, task);
    let mut model = GbmModel::constant(task, base.clone(), params.learning_rate, x.n_cols());

    let grower = Grower::new(x, params);
    let mut f: Vec<f64> = (0..n).flat_map(|_| base.iter().copied()).collect();
    let mut grad = vec![vec![0.0; n]; k];
    let mut hess = vec![vec![0.0; n]; k];
    let mut prob = vec![0.0; k];

    for _ in 0..params.n_trees {
        for i in 0..n {
            match task {
                Task::Regression => {
                    grad[0][i] = f[i] - y[i];
                    hess[0][i] = 1.0;
                }
                Task::Binary => {
                    let p = sigmoid(f[i]);
                    grad[0][i] = p - y[i];
                    hess[0][i] = (p * (1.0 - p)).max(1e-16);
                }
                Task::Multiclass(_) => {
                    softmax_into(&f[i * k..(i + 1) * k], &mut prob);
                    for c in 0..k {
                        let target = f64::from(u8::from(y[i] as usize == c));
                        grad[c][i] = prob[c] - target;
                        hess[c][i] = (prob[c] * (1.0 - prob[c])).max(1e-16);
                    }
                }
            }
        }
        for c in 0..k {
            let (tree, row_values) = grower.grow(&grad[c], &hess[c]);
            for i in 0..n {
                f[i * k + c] += params.learning_rate * row_values[i];
            }
            model.trees[c].push(tree);
        }
        model.train_loss.push(mean_loss(&f, y, task));
    }
    model
}

/// Level-wise exact greedy tree builder over presorted feature columns.
struct Grower<'a> {
    columns: Vec<Vec<f64>>,
    sorted: Vec<Vec<u32>>,
    params: &'a GbmParams,
    n: usize,
}

#[derive(Clone)]
struct GrowNode {
    grad: f64,
    hess: f64,
    count: usize,
    split: Option<(usize, f64, usize, usize)>,
}

#[derive(Clone, Copy)]
struct ScanState {
    grad: f64,
    hess: f64,
    count: usize,
    last: f64,
}

#[derive(Clone, Copy)]
struct Best {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl<'a> Grower<'a> {
    fn new(x: &FeatureMatrix, params: &'a GbmParams) -> Self {
        let n = x.n_rows();
        let columns: Vec<Vec<f64>> = (0..x.n_cols())
            .map(|c| (0..n).map(|r| x.get(r, c)).collect())
            .collect();
        let sorted = columns
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..n as u32).collect();
                idx.sort_by(|&a, &b| {
                    col[a as usize]
                        .total_cmp(&col[b as usize])
                        .then(a.cmp(&b))
                });
                idx
            })
            .collect();
        Self {
            columns,
            sorted,
            params,
            n,
        }
    }

    fn score(grad: f64, hess: f64) -> f64 {
        grad * grad / (hess + LAMBDA)
    }

    /// Returns the tree and the leaf value reached by every training row.
    fn grow(&self, grad: &[f64], hess: &[f64]) -> (TreeNode, Vec<f64>) {
        let mut nodes = vec![GrowNode {
            grad: grad.iter().sum(),
            hess: hess.iter().sum(),
            count: self.n,
            split: None,
        }];
        let mut node_of = vec![0usize; self.n];
        let mut active = vec![0usize];
        let min_child = self.params.min_child_cover;

        for _depth in 0..self.params.max_depth {
            if active.is_empty() {
                break;
            }
            let mut slot = vec![usize::MAX; nodes.len()];
            for (a, &nd) in active.iter().enumerate() {
                slot[nd] = a;
            }
            let mut best: Vec<Option<Best>> = vec![None; active.len()];
            for (feature, order) in self.sorted.iter().enumerate() {
                let col = &self.columns[feature];
                let mut state = vec![
                    ScanState {
                        grad: 0.0,
                        hess: 0.0,
                        count: 0,
                        last: f64::NAN,
                    };
                    active.len()
                ];
                for &i in order {
                    let i = i as usize;
                    let a = slot[node_of[i]];
                    if a == usize::MAX {
                        continue;
                    }
                    let x = col[i];
                    let st = &mut state[a];
                    if st.count > 0 && x > st.last {
                        let parent = &nodes[active[a]];
                        let n_left = st.count as f64;
                        let n_right = (parent.count - st.count) as f64;
                        if n_left >= min_child && n_right >= min_child {
                            let gain = Self::score(st.grad, st.hess)
                                + Self::score(parent.grad - st.grad, parent.hess - st.hess)
                                - Self::score(parent.grad, parent.hess);
                            if gain > MIN_GAIN && best[a].is_none_or(|b| gain > b.gain) {
                                let mut threshold = st.last + (x - st.last) / 2.0;
                                if threshold <= st.last {
                                    threshold = x;
                                }
                                best[a] = Some(Best {
                                    gain,
                                    feature,
                                    threshold,
                                });
                            }
                        }
                    }
                    st.grad += grad[i];
                    st.hess += hess[i];
                    st.count += 1;
                    st.last = x;
                }
            }

            let mut next = Vec::new();
            for (a, &nd) in active.iter().enumerate() {
                if let Some(b) = best[a] {
                    let left = nodes.len();
                    let right = left + 1;
                    let blank = GrowNode {
                        grad: 0.0,
                        hess: 0.0,
                        count: 0,
                        split: None,
                    };
                    nodes.push(blank.clone());
                    nodes.push(blank);
                    nodes[nd].split = Some((b.feature, b.threshold, left, right));
                    next.push(left);
                    next.push(right);
                }
            }
            for i in 0..self.n {
                if let Some((feature, threshold, left, right)) = nodes[node_of[i]].split {
                    let child = if self.columns[feature][i] < threshold {
                        left
                    } else {
                        right
                    };
                    node_of[i] = child;
                    let c = &mut nodes[child];
                    c.grad += grad[i];
                    c.hess += hess[i];
                    c.count += 1;
                }
            }
            active = next;
        }

        let leaf_value = |nd: &GrowNode| -nd.grad / (nd.hess + LAMBDA);
        let row_values = node_of.iter().map(|&nd| leaf_value(&nodes[nd])).collect();
        (Self::assemble(&nodes, 0, &leaf_value), row_values)
    }

    fn assemble(nodes: &[GrowNode], id: usize, leaf_value: &dyn Fn(&GrowNode) -> f64) -> TreeNode {
        let nd = &nodes[id];
        match nd.split {
            None => TreeNode::leaf(leaf_value(nd), nd.count as f64),
            Some((feature, threshold, left, right)) => TreeNode::Internal {
                feature,
                threshold,
                cover: nd.count as f64,
                left: Box::new(Self::assemble(nodes, left, leaf_value)),
                right: Box::new(Self::assemble(nodes, right, leaf_value)),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_matrix(n: usize, m: usize, seed: u64) -> FeatureMatrix {
        let mut rng = rng::seeded(seed);
        let data = (0..n * m).map(|_| StandardNormal.sample(&mut rng)).collect();
        FeatureMatrix::new(data, n, m).unwrap()
    }

    #[test]
    fn identity_target_is_learned() {
        let x = gaussian_matrix(1000, 3, 1);
        let y: Vec<f64> = (0..1000).map(|i| x.get(i, 0)).collect();
        let m = fit(&x, &y, Task::Regression, &GbmParams::default(), 5).unwrap();
        assert!(m.acc >= 0.99, "acc {}", m.acc);
    }

    #[test]
    fn independent_target_scores_near_zero() {
        let x = gaussian_matrix(1000, 3, 2);
        let mut rng = rng::seeded(77);
        let y: Vec<f64> = (0..1000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let m = fit(&x, &y, Task::Regression, &GbmParams::default(), 5).unwrap();
        assert!(m.acc <= 0.05, "acc {}", m.acc);
    }

    #[test]
    fn separable_binary_is_perfect() {
        let x = gaussian_matrix(1000, 3, 3);
        let y: Vec<f64> = (0..1000).map(|i| f64::from(u8::from(x.get(i, 0) > 0.0))).collect();
        let m = fit(&x, &y, Task::Binary, &GbmParams::default(), 5).unwrap();
        assert_eq!(m.acc, 1.0);
    }

    #[test]
    fn multiclass_learns_bands() {
        let x = gaussian_matrix(600, 2, 4);
        let y: Vec<f64> = (0..600)
            .map(|i| {
                let v = x.get(i, 1);
                if v < -0.5 {
                    0.0
                } else if v < 0.5 {
                    1.0
                } else {
                    2.0
                }
            })
            .collect();
        let m = fit(&x, &y, Task::Multiclass(3), &GbmParams::default(), 9).unwrap();
        assert_eq!(m.trees.len(), 3);
        assert!(m.acc >= 0.95, "acc {}", m.acc);
    }

    #[test]
    fn rejects_bad_inputs() {
        let x = gaussian_matrix(10, 2, 1);
        let y = vec![0.0; 10];
        assert!(matches!(
            fit(&x, &y, Task::Regression, &GbmParams::default(), 0),
            Err(Error::TooFewRows { .. })
        ));
        let x = gaussian_matrix(30, 2, 1);
        let y = vec![1.0; 30];
        assert!(matches!(
            fit(&x, &y, Task::Regression, &GbmParams::default(), 0),
            Err(Error::ConstantTarget)
        ));
    }

    #[test]
    fn empty_model_predicts_base() {
        let m = GbmModel::constant(Task::Regression, vec![3.5], 0.1, 2);
        assert_eq!(m.predict_raw(&[1.0, 2.0]), vec![3.5]);
    }

    #[test]
    fn stump_descent() {
        let mut m = GbmModel::constant(Task::Regression, vec![0.0], 1.0, 1);
        m.trees[0].push(TreeNode::split(
            0,
            1.0,
            TreeNode::leaf(2.0, 1.0),
            TreeNode::leaf(5.0, 1.0),
        ));
        assert_eq!(m.predict_raw(&[0.0]), vec![2.0]);
        assert_eq!(m.predict_raw(&[1.0]), vec![5.0]);
    }

    #[test]
    fn doubling_trees_and_halving_rate_is_identity() {
        let x = gaussian_matrix(200, 3, 8);
        let y: Vec<f64> = (0..200).map(|i| x.get(i, 0) * x.get(i, 1)).collect();
        let m = fit(
            &x,
            &y,
            Task::Regression,
            &GbmParams {
                n_trees: 10,
                learning_rate: 0.5,
                ..Default::default()
            },
            3,
        )
        .unwrap();
        let mut d = m.clone();
        d.learning_rate /= 2.0;
        d.trees[0] = m.trees[0].iter().flat_map(|t| [t.clone(), t.clone()]).collect();
        for i in 0..20 {
            let (a, b) = (m.predict_raw(x.row(i))[0], d.predict_raw(x.row(i))[0]);
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn accuracy_counting() {
        let mut m = GbmModel::constant(Task::Binary, vec![0.0], 1.0, 1);
        m.trees[0].push(TreeNode::split(
            0,
            0.0,
            TreeNode::leaf(-1.0, 1.0),
            TreeNode::leaf(1.0, 1.0),
        ));
        let x = FeatureMatrix::from_rows(&[vec![-1.0], vec![1.0], vec![2.0], vec![-3.0]]).unwrap();
        assert_eq!(accuracy(&m, &x, &[0.0, 1.0, 1.0, 1.0]).0, 0.75);
        assert_eq!(accuracy(&m, &x, &[0.0, 1.0, 1.0, 0.0]).0, 1.0);
    }

    #[test]
    fn regression_accuracy_edges() {
        let y = [1.0, 2.0, 4.0, 9.0];
        let mean = y.iter().sum::<f64>() / 4.0;
        let m = GbmModel::constant(Task::Regression, vec![mean], 0.1, 1);
        let x = FeatureMatrix::from_rows(&[vec![0.0], vec![0.0], vec![0.0], vec![0.0]]).unwrap();
        assert!(accuracy(&m, &x, &y).0.abs() < 1e-12);
        let (acc, warn) = accuracy(&m, &x, &[2.0; 4]);
        assert_eq!(acc, 0.0);
        assert!(warn.is_some());
    }

    #[test]
    fn training_loss_never_increases() {
        let x = gaussian_matrix(400, 4, 11);
        let mut rng = rng::seeded(12);
        let yr: Vec<f64> = (0..400)
            .map(|i| x.get(i, 0).sin() + 0.3 * rng.random::<f64>())
            .collect();
        let yb: Vec<f64> = (0..400)
            .map(|i| f64::from(u8::from(x.get(i, 1) + 0.5 * x.get(i, 2) > 0.2)))
            .collect();
        let yk: Vec<f64> = (0..400).map(|i| ((x.get(i, 3) + 3.0) as usize % 4) as f64).collect();
        for (y, task) in [
            (yr, Task::Regression),
            (yb, Task::Binary),
            (yk, Task::Multiclass(4)),
        ] {
            let m = fit(&x, &y, task, &GbmParams::default(), 1).unwrap();
            for w in m.train_loss.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "{task:?}: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn fit_is_deterministic_and_covers_consistent() {
        let x = gaussian_matrix(300, 3, 21);
        let y: Vec<f64> = (0..300).map(|i| x.get(i, 0) + x.get(i, 2)).collect();
        let a = fit(&x, &y, Task::Regression, &GbmParams::default(), 4).unwrap();
        let b = fit(&x, &y, Task::Regression, &GbmParams::default(), 4).unwrap();
        assert_eq!(a, b);
        assert!(a.trees.iter().flatten().all(TreeNode::covers_consistent));
        assert!(a.trees[0].iter().all(|t| t.depth() <= 4));
        let root = a.trees[0][0].cover();
        assert_eq!(root, 225.0);
    }

    #[test]
    fn json_round_trip() {
        let x = gaussian_matrix(100, 2, 5);
        let y: Vec<f64> = (0..100).map(|i| x.get(i, 0)).collect();
        let m = fit(
            &x,
            &y,
            Task::Regression,
            &GbmParams {
                n_trees: 3,
                ..Default::default()
            },
            0,
        )
        .unwrap();
        let back = GbmModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
    }
}
