//! Path-dependent TreeSHAP and a brute-force Shapley oracle.
//!
//! Both use the same value function: `v(S)` descends the tree, following
//! the row on splits over features in `S` and averaging both children by
//! cover on splits over features outside `S`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gbm::{GbmModel, TreeNode};

pub const BRUTE_FORCE_MAX_FEATURES: usize = 12;

/// Attributions for one model output on one row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapRow {
    /// Table column the model predicts, when known.
    pub target: Option<usize>,
    /// Output index (class for multiclass models, else 0).
    pub output: usize,
    pub attributions: Vec<f64>,
    /// Expected raw prediction under the cover distribution.
    pub base: f64,
}

impl ShapRow {
    pub fn total(&self) -> f64 {
        self.base + self.attributions.iter().sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy)]
struct PathElem {
    feature: Option<usize>,
    zero: f64,
    one: f64,
    weight: f64,
}

/// Path elements live at the end of `buf`, from `start` on; each recursion
/// level copies its parent's path onto the end of the same buffer.
fn extend(buf: &mut Vec<PathElem>, start: usize, zero: f64, one: f64, feature: Option<usize>) {
    let l = buf.len() - start;
    buf.push(PathElem {
        feature,
        zero,
        one,
        weight: if l == 0 { 1.0 } else { 0.0 },
    });
    let path = &mut buf[start..];
    let denom = (l + 1) as f64;
    for i in (0..l).rev() {
        path[i + 1].weight += one * path[i].weight * (i + 1) as f64 / denom;
        path[i].weight = zero * path[i].weight * (l - i) as f64 / denom;
    }
}

/// Undo the extension for element `index`, removing it from the path.
fn unwind(buf: &mut Vec<PathElem>, start: usize, index: usize) {
    let path = &mut buf[start..];
    let depth = path.len() - 1;
    let PathElem { zero, one, .. } = path[index];
    let denom = (depth + 1) as f64;
    let mut next = path[depth].weight;
    for j in (0..depth).rev() {
        if one != 0.0 {
            let tmp = path[j].weight;
            path[j].weight = next * denom / ((j + 1) as f64 * one);
            next = tmp - path[j].weight * zero * (depth - j) as f64 / denom;
        } else {
            path[j].weight = path[j].weight * denom / (zero * (depth - j) as f64);
        }
    }
    for j in index..depth {
        path[j].feature = path[j + 1].feature;
        path[j].zero = path[j + 1].zero;
        path[j].one = path[j + 1].one;
    }
    buf.pop();
}

/// Total weight of the path after unwinding `index`, without modifying it.
fn unwound_sum(path: &[PathElem], index: usize) -> f64 {
    let depth = path.len() - 1;
    let PathElem { zero, one, .. } = path[index];
    let denom = (depth + 1) as f64;
    let mut total = 0.0;
    if one != 0.0 {
        let mut next = path[depth].weight;
        for j in (0..depth).rev() {
            let tmp = next * denom / ((j + 1) as f64 * one);
            total += tmp;
            next = path[j].weight - tmp * zero * (depth - j) as f64 / denom;
        }
    } else {
        for j in (0..depth).rev() {
            total += path[j].weight * denom / (zero * (depth - j) as f64);
        }
    }
    total
}

struct Walk<'a> {
    row: &'a [f64],
    phi: &'a mut [f64],
    buf: Vec<PathElem>,
    scale: f64,
}

impl Walk<'_> {
    fn recurse(
        &mut self,
        node: &TreeNode,
        parent: (usize, usize),
        zero: f64,
        one: f64,
        feature: Option<usize>,
    ) {
        let start = self.buf.len();
        self.buf.extend_from_within(parent.0..parent.0 + parent.1);
        extend(&mut self.buf, start, zero, one, feature);
        match node {
            TreeNode::Leaf { value, .. } => {
                let path = &self.buf[start..];
                for i in 1..path.len() {
                    let e = path[i];
                    if let Some(f) = e.feature {
                        self.phi[f] += unwound_sum(path, i) * (e.one - e.zero) * value * self.scale;
                    }
                }
            }
            TreeNode::Internal {
                feature: split,
                threshold,
                cover,
                left,
                right,
            } => {
                let (hot, cold) = if self.row[*split] < *threshold {
                    (left, right)
                } else {
                    (right, left)
                };
                let (mut inc_zero, mut inc_one) = (1.0, 1.0);
                let len = self.buf.len() - start;
                if let Some(k) = (1..len).find(|&i| self.buf[start + i].feature == Some(*split)) {
                    inc_zero = self.buf[start + k].zero;
                    inc_one = self.buf[start + k].one;
                    unwind(&mut self.buf, start, k);
                }
                let here = (start, self.buf.len() - start);
                self.recurse(hot, here, inc_zero * hot.cover() / cover, inc_one, Some(*split));
                self.recurse(cold, here, inc_zero * cold.cover() / cover, 0.0, Some(*split));
            }
        }
        self.buf.truncate(start);
    }
}

/// Exact SHAP values of every model output on `row`, in polynomial time.
pub fn tree_shap(model: &GbmModel, row: &[f64]) -> Vec<ShapRow> {
    let target = model.target.as_ref().map(|t| t.index);
    model
        .trees
        .iter()
        .zip(&model.base_score)
        .enumerate()
        .map(|(output, (trees, base_score))| {
            let mut phi = vec![0.0; model.n_features];
            let mut base = 0.0;
            let mut walk = Walk {
                row,
                phi: &mut phi,
                buf: Vec::with_capacity(64),
                scale: model.learning_rate,
            };
            for tree in trees {
                walk.recurse(tree, (0, 0), 1.0, 1.0, None);
                base += tree.expected_value();
            }
            ShapRow {
                target,
                output,
                attributions: phi,
                base: base_score + model.learning_rate * base,
            }
        })
        .collect()
}

/// Per-feature `|φ|` averaged over outputs (identity for single-output models).
pub fn mean_abs_over_outputs(rows: &[ShapRow]) -> Vec<f64> {
    let Some(first) = rows.first() else {
        return Vec::new();
    };
    let mut out = vec![0.0; first.attributions.len()];
    for r in rows {
        for (o, a) in out.iter_mut().zip(&r.attributions) {
            *o += a.abs();
        }
    }
    let k = rows.len() as f64;
    out.iter_mut().for_each(|o| *o /= k);
    out
}

fn conditional_value(node: &TreeNode, row: &[f64], present: u32) -> f64 {
    match node {
        TreeNode::Leaf { value, .. } => *value,
        TreeNode::Internal {
            feature,
            threshold,
            cover,
            left,
            right,
        } => {
            if present & (1 << feature) != 0 {
                if row[*feature] < *threshold {
                    conditional_value(left, row, present)
                } else {
                    conditional_value(right, row, present)
                }
            } else {
                (left.cover() * conditional_value(left, row, present)
                    + right.cover() * conditional_value(right, row, present))
                    / cover
            }
        }
    }
}

/// Shapley values by enumerating all feature coalitions. Exponential in the
/// number of features; refuses more than [`BRUTE_FORCE_MAX_FEATURES`].
pub fn shap_brute_force(model: &GbmModel, row: &[f64]) -> Result<Vec<ShapRow>> {
    let m = model.n_features;
    if m > BRUTE_FORCE_MAX_FEATURES {
        return Err(Error::TooManyFeatures {
            max: BRUTE_FORCE_MAX_FEATURES,
            got: m,
        });
    }
    let mut fact = vec![1.0f64; m + 1];
    for i in 1..=m {
        fact[i] = fact[i - 1] * i as f64;
    }
    let target = model.target.as_ref().map(|t| t.index);
    Ok(model
        .trees
        .iter()
        .zip(&model.base_score)
        .enumerate()
        .map(|(output, (trees, base_score))| {
            let value: Vec<f64> = (0..1u32 << m)
                .map(|s| {
                    base_score
                        + model.learning_rate
                            * trees
                                .iter()
                                .map(|t| conditional_value(t, row, s))
                                .sum::<f64>()
                })
                .collect();
            let attributions = (0..m)
                .map(|u| {
                    let bit = 1u32 << u;
                    (0..1u32 << m)
                        .filter(|s| s & bit == 0)
                        .map(|s| {
                            let size = s.count_ones() as usize;
                            let weight = fact[size] * fact[m - size - 1] / fact[m];
                            weight * (value[(s | bit) as usize] - value[s as usize])
                        })
                        .sum()
                })
                .collect();
            ShapRow {
                target,
                output,
                attributions,
                base: value[0],
            }
        })
        .collect())
}
