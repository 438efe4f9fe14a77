use super::{ComponentClassifier, ComponentLearn, LearnError, WeightVector};
use crate::dataset::{Dataset, FeatureAccess};
use serde::{Deserialize, Serialize};

/// Samples with `x[feature] < threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        label: i8,
    },
    Split {
        feature: u32,
        #[serde(with = "crate::real")]
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub root: TreeNode,
}

impl DecisionTree {
    pub fn predict<F: FeatureAccess + ?Sized>(&self, x: &F) -> i8 {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { label } => return *label,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x.feature(*feature as usize) < *threshold {
                        left
                    } else {
                        right
                    }
                }
            }
        }
    }

    pub fn feature_ids(&self) -> Vec<u32> {
        fn walk(n: &TreeNode, out: &mut Vec<u32>) {
            if let TreeNode::Split {
                feature,
                left,
                right,
                ..
            } = n
            {
                out.push(*feature);
                walk(left, out);
                walk(right, out);
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }

    pub fn remap_features(&mut self, map: &[u32]) {
        fn walk(n: &mut TreeNode, map: &[u32]) {
            if let TreeNode::Split {
                feature,
                left,
                right,
                ..
            } = n
            {
                *feature = map[*feature as usize];
                walk(left, map);
                walk(right, map);
            }
        }
        walk(&mut self.root, map);
    }

    pub fn depth(&self) -> usize {
        fn d(n: &TreeNode) -> usize {
            match n {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + d(left).max(d(right)),
            }
        }
        d(&self.root)
    }
}

/// `W * gini`, i.e. `W (1 - p^2 - q^2)` for class masses `pos`, `neg`.
fn weighted_gini(pos: f64, neg: f64) -> f64 {
    let total = pos + neg;
    if total <= 0.0 {
        0.0
    } else {
        total - (pos * pos + neg * neg) / total
    }
}

fn majority(idx: &[usize], data: &Dataset, w: &[f64]) -> i8 {
    let (mut pos, mut neg) = (0.0, 0.0);
    for &i in idx {
        if data.label(i) > 0 {
            pos += w[i];
        } else {
            neg += w[i];
        }
    }
    if pos >= neg {
        1
    } else {
        -1
    }
}

struct Split {
    feature: usize,
    threshold: f64,
    score: f64,
}

fn best_split(idx: &[usize], data: &Dataset, w: &[f64]) -> Option<Split> {
    let (mut pos, mut neg) = (0.0, 0.0);
    for &i in idx {
        if data.label(i) > 0 {
            pos += w[i];
        } else {
            neg += w[i];
        }
    }
    let parent = weighted_gini(pos, neg);
    let mut best: Option<Split> = None;
    let mut order = idx.to_vec();
    for f in 0..data.dim() {
        order.sort_by(|&a, &b| data.point(a)[f].total_cmp(&data.point(b)[f]));
        let (mut lp, mut ln) = (0.0, 0.0);
        for k in 1..order.len() {
            let prev = order[k - 1];
            if data.label(prev) > 0 {
                lp += w[prev];
            } else {
                ln += w[prev];
            }
            let (a, b) = (data.point(prev)[f], data.point(order[k])[f]);
            if a == b {
                continue;
            }
            let score = weighted_gini(lp, ln) + weighted_gini(pos - lp, neg - ln);
            if best.as_ref().map_or(true, |s| score < s.score) {
                best = Some(Split {
                    feature: f,
                    threshold: 0.5 * (a + b),
                    score,
                });
            }
        }
    }
    // a split must reduce impurity to be worth a node
    best.filter(|s| s.score < parent - 1e-15)
}

fn grow(idx: &[usize], data: &Dataset, w: &[f64], depth_left: usize) -> TreeNode {
    if depth_left == 0 {
        return TreeNode::Leaf {
            label: majority(idx, data, w),
        };
    }
    match best_split(idx, data, w) {
        None => TreeNode::Leaf {
            label: majority(idx, data, w),
        },
        Some(s) => {
            let (l, r): (Vec<usize>, Vec<usize>) = idx
                .iter()
                .partition(|&&i| data.point(i)[s.feature] < s.threshold);
            TreeNode::Split {
                feature: s.feature as u32,
                threshold: s.threshold,
                left: Box::new(grow(&l, data, w, depth_left - 1)),
                right: Box::new(grow(&r, data, w, depth_left - 1)),
            }
        }
    }
}

/// Greedy weighted-Gini tree grown to `max_depth`, leaves vote by weighted majority.
pub fn learn_tree(
    data: &Dataset,
    w: &WeightVector,
    max_depth: usize,
) -> Result<ComponentClassifier, LearnError> {
    if data.is_empty() {
        return Err(LearnError::Empty);
    }
    let idx: Vec<usize> = (0..data.len()).collect();
    Ok(ComponentClassifier::Tree(DecisionTree {
        root: grow(&idx, data, w.as_slice(), max_depth),
    }))
}

#[derive(Debug, Clone, Copy)]
pub struct TreeLearner {
    pub max_depth: usize,
}

impl Default for TreeLearner {
    fn default() -> Self {
        TreeLearner { max_depth: 3 }
    }
}

impl ComponentLearn for TreeLearner {
    fn learn(
        &mut self,
        data: &Dataset,
        w: &WeightVector,
        _round: usize,
    ) -> Result<ComponentClassifier, LearnError> {
        learn_tree(data, w, self.max_depth)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{learn_stump, weighted_error};
    use super::*;

    #[test]
    fn xor_needs_depth_two() {
        let d = Dataset::new(
            vec![
                vec![0.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, 0.0],
                vec![1.0, 1.0],
                vec![0.1, 0.0],
            ],
            vec![-1, 1, 1, -1, -1],
        )
        .unwrap();
        let w = WeightVector::uniform(5);
        let h = learn_tree(&d, &w, 3).unwrap();
        assert_eq!(weighted_error(&h, &d, &w).unwrap(), 0.0);
        let ComponentClassifier::Tree(t) = h else { panic!() };
        assert!(t.depth() <= 3);
    }

    #[test]
    fn depth_one_tree_matches_stump_error() {
        let datasets = [
            Dataset::new(
                vec![vec![0.3, 5.0], vec![1.2, 4.0], vec![2.5, 1.0], vec![3.1, 0.5]],
                vec![-1, -1, 1, 1],
            )
            .unwrap(),
            Dataset::new(
                (0..12).map(|i| vec![i as f64, ((i * 7) % 5) as f64]).collect(),
                (0..12).map(|i| if i >= 5 { 1 } else { -1 }).collect(),
            )
            .unwrap(),
        ];
        for d in &datasets {
            let w = WeightVector::uniform(d.len());
            let tree = learn_tree(d, &w, 1).unwrap();
            let stump = learn_stump(d, &w).unwrap();
            assert_eq!(
                weighted_error(&tree, d, &w).unwrap(),
                weighted_error(&stump, d, &w).unwrap()
            );
        }
    }

    #[test]
    fn pure_node_is_a_leaf() {
        let d = Dataset::new(vec![vec![0.0], vec![1.0]], vec![1, 1]).unwrap();
        let h = learn_tree(&d, &WeightVector::uniform(2), 3).unwrap();
        assert_eq!(
            h,
            ComponentClassifier::Tree(DecisionTree {
                root: TreeNode::Leaf { label: 1 }
            })
        );
    }

    #[test]
    fn remap_rewrites_every_split() {
        let mut t = DecisionTree {
            root: TreeNode::Split {
                feature: 0,
                threshold: 0.0,
                left: Box::new(TreeNode::Leaf { label: -1 }),
                right: Box::new(TreeNode::Split {
                    feature: 1,
                    threshold: 1.0,
                    left: Box::new(TreeNode::Leaf { label: 1 }),
                    right: Box::new(TreeNode::Leaf { label: -1 }),
                }),
            },
        };
        t.remap_features(&[10, 20]);
        assert_eq!(t.feature_ids(), vec![10, 20]);
    }
}
