//! Recursive partitioning with linear splits.
//!
//! Each split is a trained soft-margin hyperplane; the training subset is
//! divided by the split's own predictions and each side is trained again
//! until it is label-pure, too small, or too deep. The resulting classifier
//! carves the space into regions that need not be connected.

use crate::encoding::{FeatureVector, Label, LabeledDataset};
use crate::svm::{train, Predictor, SvmError, SvmModel, TrainParams};

/// Tree hyperparameters on top of the per-split SVM parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub svm: TrainParams,
    pub max_depth: usize,
    pub min_leaf_size: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            svm: TrainParams::default(),
            max_depth: 3,
            min_leaf_size: 5,
        }
    }
}

/// A node: a terminal majority label with its purity, or a hyperplane split
/// whose children hold the points it predicts positive and negative.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Leaf {
        label: Label,
        purity: f64,
    },
    Split {
        model: SvmModel,
        positive: Box<TreeNode>,
        negative: Box<TreeNode>,
    },
}

/// A trained partition tree.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionTree {
    root: TreeNode,
    max_depth: usize,
    min_leaf_size: usize,
    dimension: usize,
}

impl PartitionTree {
    pub fn root(&self) -> &TreeNode {
        &self.root
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn min_leaf_size(&self) -> usize {
        self.min_leaf_size
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Longest root-to-leaf path, counted in splits.
    pub fn depth(&self) -> usize {
        fn walk(node: &TreeNode) -> usize {
            match node {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split {
                    positive, negative, ..
                } => 1 + walk(positive).max(walk(negative)),
            }
        }
        walk(&self.root)
    }

    /// True when every split's solver run converged.
    pub fn all_splits_converged(&self) -> bool {
        fn walk(node: &TreeNode) -> bool {
            match node {
                TreeNode::Leaf { .. } => true,
                TreeNode::Split {
                    model,
                    positive,
                    negative,
                } => model.summary().converged && walk(positive) && walk(negative),
            }
        }
        walk(&self.root)
    }

    /// Routes x through the splits and returns the leaf label together with
    /// the decision value of the last split taken (0 for a single-leaf tree).
    pub fn classify(&self, x: &FeatureVector) -> Result<(Label, f64), SvmError> {
        if x.len() != self.dimension {
            return Err(SvmError::DimensionMismatch {
                expected: self.dimension,
                found: x.len(),
            });
        }
        let mut node = &self.root;
        let mut last_decision = 0.0;
        loop {
            match node {
                TreeNode::Leaf { label, .. } => return Ok((*label, last_decision)),
                TreeNode::Split {
                    model,
                    positive,
                    negative,
                } => {
                    last_decision = model.decision_value(x)?;
                    node = if last_decision >= 0.0 {
                        positive
                    } else {
                        negative
                    };
                }
            }
        }
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<Label, SvmError> {
        Ok(self.classify(x)?.0)
    }

    pub(crate) fn from_parts(
        root: TreeNode,
        max_depth: usize,
        min_leaf_size: usize,
        dimension: usize,
    ) -> Self {
        PartitionTree {
            root,
            max_depth,
            min_leaf_size,
            dimension,
        }
    }
}

impl Predictor for PartitionTree {
    fn dimension(&self) -> usize {
        PartitionTree::dimension(self)
    }

    fn predict(&self, x: &FeatureVector) -> Result<Label, SvmError> {
        PartitionTree::predict(self, x)
    }

    fn decision_value(&self, x: &FeatureVector) -> Result<f64, SvmError> {
        Ok(self.classify(x)?.1)
    }
}

/// Trains a partition tree. The root split trains on the full dataset; each
/// side is re-split while it is not label-pure, the depth allows it, the
/// solver converged, and both children would keep at least `min_leaf_size`
/// points. A dataset with a single class is rejected at the root only.
pub fn train_partition_tree(
    dataset: &LabeledDataset,
    params: &TreeParams,
) -> Result<PartitionTree, SvmError> {
    if params.max_depth == 0 {
        return Err(SvmError::InvalidParameter(
            "max_depth must be at least 1".into(),
        ));
    }
    if params.min_leaf_size == 0 {
        return Err(SvmError::InvalidParameter(
            "min_leaf_size must be at least 1".into(),
        ));
    }
    let (positives, negatives) = dataset.class_counts();
    if positives == 0 || negatives == 0 {
        return Err(SvmError::SingleClassDataset);
    }
    let root = build_node(dataset, params, 0)?;
    Ok(PartitionTree {
        root,
        max_depth: params.max_depth,
        min_leaf_size: params.min_leaf_size,
        dimension: dataset.dimension(),
    })
}

fn majority_leaf(positives: usize, negatives: usize) -> TreeNode {
    let total = (positives + negatives) as f64;
    // Ties go positive, mirroring the prediction tie rule.
    let label = if positives >= negatives {
        Label::Positive
    } else {
        Label::Negative
    };
    TreeNode::Leaf {
        label,
        purity: positives.max(negatives) as f64 / total,
    }
}

fn build_node(
    dataset: &LabeledDataset,
    params: &TreeParams,
    depth: usize,
) -> Result<TreeNode, SvmError> {
    let (positives, negatives) = dataset.class_counts();
    if negatives == 0 {
        return Ok(TreeNode::Leaf {
            label: Label::Positive,
            purity: 1.0,
        });
    }
    if positives == 0 {
        return Ok(TreeNode::Leaf {
            label: Label::Negative,
            purity: 1.0,
        });
    }
    if depth >= params.max_depth {
        return Ok(majority_leaf(positives, negatives));
    }
    let model = train(dataset, &params.svm)?;
    if !model.summary().converged {
        return Ok(majority_leaf(positives, negatives));
    }
    // Route the subset by the split's own predictions, in training space:
    // the subset vectors already carry any standardization.
    let mut positive_idx = Vec::new();
    let mut negative_idx = Vec::new();
    for (i, vector) in dataset.vectors().iter().enumerate() {
        if model.decision_training(vector.components()) >= 0.0 {
            positive_idx.push(i);
        } else {
            negative_idx.push(i);
        }
    }
    if positive_idx.len() < params.min_leaf_size || negative_idx.len() < params.min_leaf_size {
        return Ok(majority_leaf(positives, negatives));
    }
    let positive = build_node(&subset(dataset, &positive_idx), params, depth + 1)?;
    let negative = build_node(&subset(dataset, &negative_idx), params, depth + 1)?;
    Ok(TreeNode::Split {
        model,
        positive: Box::new(positive),
        negative: Box::new(negative),
    })
}

fn subset(dataset: &LabeledDataset, indices: &[usize]) -> LabeledDataset {
    let vectors = indices
        .iter()
        .map(|&i| dataset.vectors()[i].clone())
        .collect();
    let labels = indices.iter().map(|&i| dataset.labels()[i]).collect();
    match dataset.scaling() {
        Some(scaling) => LabeledDataset::with_scaling(vectors, labels, scaling.to_vec()),
        None => LabeledDataset::new(vectors, labels),
    }
    .expect("subset of a valid dataset is valid")
}
