//! CART classification trees grown with Gini impurity.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::TrainingSet;
use crate::error::{Error, Result};

/// Gini impurity `1 − Σ pᵢ²` of a class histogram.
pub fn gini(histogram: &[u32]) -> Result<f64> {
    let total: u64 = histogram.iter().map(|&c| c as u64).sum();
    if total == 0 {
        return Err(Error::Training("gini of an empty histogram".into()));
    }
    let t = total as f64;
    Ok(1.0
        - histogram
            .iter()
            .map(|&c| (c as f64 / t).powi(2))
            .sum::<f64>())
}

/// Owned, nested view of a tree. This is also the on-disk node shape:
/// `{"split": {"f", "t", "l", "r"}}` or `{"leaf": {"hist"}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    #[serde(rename = "split")]
    Split {
        #[serde(rename = "f")]
        feature: usize,
        #[serde(rename = "t")]
        threshold: f64,
        #[serde(rename = "l")]
        left: Box<TreeNode>,
        #[serde(rename = "r")]
        right: Box<TreeNode>,
    },
    #[serde(rename = "leaf")]
    Leaf {
        #[serde(rename = "hist")]
        histogram: Vec<u32>,
    },
}

const LEAF: u32 = u32::MAX;

/// Split nodes compare `x[feature] <= threshold` and go left on true.
/// Leaves reuse `left` as the histogram index and `right` as the majority class.
#[derive(Debug, Clone, Copy, PartialEq)]
struct PackedNode {
    threshold: f64,
    feature: u32,
    left: u32,
    right: u32,
}

/// A grown tree stored as a flat pre-order node array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<PackedNode>,
    histograms: Vec<Vec<u32>>,
}

fn majority(hist: &[u32]) -> u32 {
    // First maximum wins, so ties go to the lowest class index.
    let mut best = 0;
    for (c, &n) in hist.iter().enumerate() {
        if n > hist[best] {
            best = c;
        }
    }
    best as u32
}

impl Tree {
    /// Majority class of the leaf reached by `x`.
    #[inline]
    pub fn predict(&self, x: &[f32]) -> usize {
        let mut node = &self.nodes[0];
        while node.feature != LEAF {
            let next = if (x[node.feature as usize] as f64) <= node.threshold {
                node.left
            } else {
                node.right
            };
            node = &self.nodes[next as usize];
        }
        node.right as usize
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.histograms.len()
    }

    pub fn is_leaf(&self) -> bool {
        self.nodes.len() == 1
    }

    pub fn depth(&self) -> usize {
        let mut max = 0;
        let mut stack = vec![(0u32, 0usize)];
        while let Some((i, d)) = stack.pop() {
            let n = &self.nodes[i as usize];
            if n.feature == LEAF {
                max = max.max(d);
            } else {
                stack.push((n.left, d + 1));
                stack.push((n.right, d + 1));
            }
        }
        max
    }

    pub(crate) fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter(|n| n.feature != LEAF)
            .map(|n| n.feature as usize)
            .max()
    }

    pub fn leaf_histograms(&self) -> &[Vec<u32>] {
        &self.histograms
    }

    pub fn to_node(&self) -> TreeNode {
        self.node_at(0)
    }

    fn node_at(&self, index: u32) -> TreeNode {
        let n = &self.nodes[index as usize];
        if n.feature == LEAF {
            TreeNode::Leaf {
                histogram: self.histograms[n.left as usize].clone(),
            }
        } else {
            TreeNode::Split {
                feature: n.feature as usize,
                threshold: n.threshold,
                left: Box::new(self.node_at(n.left)),
                right: Box::new(self.node_at(n.right)),
            }
        }
    }

    /// Rebuilds the flat form, checking arity against the model's feature and class counts.
    pub fn from_node(root: &TreeNode, n_features: usize, n_classes: usize) -> Result<Tree> {
        let mut tree = Tree {
            nodes: Vec::new(),
            histograms: Vec::new(),
        };
        // (node, parent slot to patch, is_left)
        let mut stack: Vec<(&TreeNode, Option<(usize, bool)>)> = vec![(root, None)];
        while let Some((node, parent)) = stack.pop() {
            let index = tree.nodes.len();
            if let Some((p, is_left)) = parent {
                if is_left {
                    tree.nodes[p].left = index as u32;
                } else {
                    tree.nodes[p].right = index as u32;
                }
            }
            match node {
                TreeNode::Leaf { histogram } => {
                    if histogram.len() != n_classes {
                        return Err(Error::Model(format!(
                            "leaf histogram has {} entries for {n_classes} classes",
                            histogram.len()
                        )));
                    }
                    if histogram.iter().all(|&c| c == 0) {
                        return Err(Error::Model("empty leaf histogram".into()));
                    }
                    tree.nodes.push(PackedNode {
                        threshold: 0.0,
                        feature: LEAF,
                        left: tree.histograms.len() as u32,
                        right: majority(histogram),
                    });
                    tree.histograms.push(histogram.clone());
                }
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if *feature >= n_features {
                        return Err(Error::Model(format!(
                            "split on feature {feature} but model has {n_features} features"
                        )));
                    }
                    if !threshold.is_finite() {
                        return Err(Error::Model("non-finite split threshold".into()));
                    }
                    tree.nodes.push(PackedNode {
                        threshold: *threshold,
                        feature: *feature as u32,
                        left: 0,
                        right: 0,
                    });
                    stack.push((right, Some((index, false))));
                    stack.push((left, Some((index, true))));
                }
            }
        }
        Ok(tree)
    }
}

pub(crate) struct GrowParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub mtry: usize,
}

struct Candidate {
    feature: usize,
    score: f64,
    threshold: f64,
}

/// Grows one tree on the samples listed in `bag` (indices into `data`, repeats allowed).
pub(crate) fn grow<R: Rng>(
    data: &TrainingSet,
    mut bag: Vec<u32>,
    p: &GrowParams,
    rng: &mut R,
) -> Tree {
    let n_classes = data.class_names.len();
    let n_features = data.feature_count();
    let mut tree = Tree {
        nodes: Vec::new(),
        histograms: Vec::new(),
    };

    let mut order: Vec<usize> = (0..n_features).collect();
    let mut column: Vec<(f32, u8)> = Vec::with_capacity(bag.len());

    // (start, end, depth, parent slot)
    type Pending = (usize, usize, usize, Option<(usize, bool)>);
    let mut stack: Vec<Pending> = vec![(0, bag.len(), 0, None)];
    while let Some((start, end, depth, parent)) = stack.pop() {
        let index = tree.nodes.len();
        if let Some((pi, is_left)) = parent {
            if is_left {
                tree.nodes[pi].left = index as u32;
            } else {
                tree.nodes[pi].right = index as u32;
            }
        }
        let samples = &mut bag[start..end];
        let mut hist = vec![0u32; n_classes];
        for &s in samples.iter() {
            hist[data.labels[s as usize] as usize] += 1;
        }
        let n = samples.len();
        let pure = hist.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_capped = p.max_depth.is_some_and(|d| depth >= d);

        let split = if pure || depth_capped || n < 2 * p.min_samples_leaf {
            None
        } else {
            best_split(data, samples, &hist, p, &mut order, &mut column, rng)
        };

        match split {
            None => {
                tree.nodes.push(PackedNode {
                    threshold: 0.0,
                    feature: LEAF,
                    left: tree.histograms.len() as u32,
                    right: majority(&hist),
                });
                tree.histograms.push(hist);
            }
            Some(c) => {
                // Partition samples in place: left block first.
                let mut lo = 0;
                for i in 0..n {
                    let v = data.value(samples[i] as usize, c.feature) as f64;
                    if v <= c.threshold {
                        samples.swap(lo, i);
                        lo += 1;
                    }
                }
                tree.nodes.push(PackedNode {
                    threshold: c.threshold,
                    feature: c.feature as u32,
                    left: 0,
                    right: 0,
                });
                let mid = start + lo;
                stack.push((mid, end, depth + 1, Some((index, false))));
                stack.push((start, mid, depth + 1, Some((index, true))));
            }
        }
    }
    tree
}

/// Visits features in a random order until `mtry` non-constant ones have
/// been scanned, then keeps the best split. Exact score ties go to the lower
/// feature index, then the lower threshold.
fn best_split<R: Rng>(
    data: &TrainingSet,
    samples: &[u32],
    hist: &[u32],
    p: &GrowParams,
    order: &mut [usize],
    column: &mut Vec<(f32, u8)>,
    rng: &mut R,
) -> Option<Candidate> {
    let n_features = order.len();
    let n_classes = hist.len();
    let n = samples.len();
    let mut best: Option<Candidate> = None;
    let mut visited = 0;
    let mut left = vec![0u32; n_classes];

    for k in 0..n_features {
        if visited == p.mtry {
            break;
        }
        // Lazy Fisher-Yates: draw the next feature without replacement.
        let j = rng.random_range(k..n_features);
        order.swap(k, j);
        let feature = order[k];

        column.clear();
        column.extend(
            samples
                .iter()
                .map(|&s| (data.value(s as usize, feature), data.labels[s as usize])),
        );
        column.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        if column[0].0 == column[n - 1].0 {
            continue;
        }
        visited += 1;

        left.iter_mut().for_each(|c| *c = 0);
        let mut sq_left: u64 = 0;
        let mut sq_right: u64 = hist.iter().map(|&c| (c as u64) * (c as u64)).sum();
        let mut feature_best: Option<(f64, f64)> = None;
        for i in 0..n - 1 {
            let c = column[i].1 as usize;
            let l = left[c] as u64;
            let r = (hist[c] - left[c]) as u64;
            sq_left += 2 * l + 1;
            sq_right -= 2 * r - 1;
            left[c] += 1;

            let n_left = i + 1;
            let n_right = n - n_left;
            if column[i].0 == column[i + 1].0
                || n_left < p.min_samples_leaf
                || n_right < p.min_samples_leaf
            {
                continue;
            }
            // Maximizing Σ l²/n_l + Σ r²/n_r minimizes weighted child Gini.
            let score = sq_left as f64 / n_left as f64 + sq_right as f64 / n_right as f64;
            if feature_best.is_none_or(|(s, _)| score > s) {
                let t = (column[i].0 as f64 + column[i + 1].0 as f64) / 2.0;
                feature_best = Some((score, t));
            }
        }

        if let Some((score, threshold)) = feature_best {
            let better = match &best {
                None => true,
                Some(b) => score > b.score || (score == b.score && feature < b.feature),
            };
            if better {
                best = Some(Candidate {
                    feature,
                    score,
                    threshold,
                });
            }
        }
    }
    best
}
