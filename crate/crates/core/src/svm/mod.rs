//! Linear soft-margin SVM training and prediction, plus the recursive
//! partition classifier for decision regions that need not be connected.

mod persist;
mod tree;

pub use persist::{load_model, save_model, ModelArtifact, MODEL_FORMAT_VERSION};
pub use tree::{train_partition_tree, PartitionTree, TreeNode, TreeParams};

use thiserror::Error;

use crate::encoding::{apply_scaling, DimScale, FeatureVector, Label, LabeledDataset};
use crate::qp::{self, QpError, QpProblem};

#[derive(Debug, Error)]
pub enum SvmError {
    #[error("dataset contains a single class; both labels are required")]
    SingleClassDataset,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("weight vector has zero norm")]
    ZeroWeightVector,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("model file has format_version {found}, this build supports {supported}")]
    VersionMismatch { found: u32, supported: u32 },
    #[error("corrupt model file: {0}")]
    CorruptModel(String),
}

/// Training hyperparameters: box constant C, KKT tolerance, and the SMO step
/// budget in sweeps of l pair updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub c: f64,
    pub tol: f64,
    pub max_passes: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            c: 1.0,
            tol: 1e-3,
            max_passes: 1000,
        }
    }
}

impl TrainParams {
    pub fn new(c: f64, tol: f64) -> Self {
        TrainParams {
            c,
            tol,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<(), SvmError> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(SvmError::InvalidParameter(format!(
                "C must be positive, got {}",
                self.c
            )));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(SvmError::InvalidParameter(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_passes == 0 {
            return Err(SvmError::InvalidParameter(
                "max_passes must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// A training point that ended with α_i > 0, stored in training space.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportVector {
    pub index: usize,
    pub alpha: f64,
    pub label: Label,
    pub vector: Vec<f64>,
}

/// Solve statistics recorded with every trained model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingSummary {
    pub samples: usize,
    pub iterations: usize,
    pub kkt_violation: f64,
    pub converged: bool,
}

/// A trained hyperplane w • x + b = 0 with its support vectors and, when the
/// training data was standardized, the stored scaling transform.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    weights: Vec<f64>,
    offset: f64,
    c: f64,
    support: Vec<SupportVector>,
    scaling: Option<Vec<DimScale>>,
    summary: TrainingSummary,
}

impl SvmModel {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn box_constant(&self) -> f64 {
        self.c
    }

    pub fn support(&self) -> &[SupportVector] {
        &self.support
    }

    pub fn scaling(&self) -> Option<&[DimScale]> {
        self.scaling.as_deref()
    }

    pub fn is_standardized(&self) -> bool {
        self.scaling.is_some()
    }

    pub fn summary(&self) -> &TrainingSummary {
        &self.summary
    }

    /// Number of input dimensions M.
    pub fn dimension(&self) -> usize {
        self.weights.len()
    }

    /// w • x + b in training space, bypassing the scaling transform.
    pub(crate) fn decision_training(&self, components: &[f64]) -> f64 {
        dot(&self.weights, components) + self.offset
    }

    fn check_dimension(&self, x: &FeatureVector) -> Result<(), SvmError> {
        if x.len() != self.weights.len() {
            return Err(SvmError::DimensionMismatch {
                expected: self.weights.len(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// w • x + b. Inputs are raw; a standardized model applies its stored
    /// scaling transform internally.
    pub fn decision_value(&self, x: &FeatureVector) -> Result<f64, SvmError> {
        self.check_dimension(x)?;
        Ok(match &self.scaling {
            Some(scaling) => self.decision_training(&apply_scaling(scaling, x.components())),
            None => self.decision_training(x.components()),
        })
    }

    /// Class of x; a decision value of exactly 0 goes positive.
    pub fn predict(&self, x: &FeatureVector) -> Result<Label, SvmError> {
        Ok(Label::from_decision(self.decision_value(x)?))
    }

    /// Geometric distance |w • x + b| / ‖w‖ from x to the hyperplane.
    pub fn margin_distance(&self, x: &FeatureVector) -> Result<f64, SvmError> {
        let norm = dot(&self.weights, &self.weights).sqrt();
        if norm == 0.0 {
            return Err(SvmError::ZeroWeightVector);
        }
        Ok(self.decision_value(x)?.abs() / norm)
    }

    pub(crate) fn from_parts(
        weights: Vec<f64>,
        offset: f64,
        c: f64,
        support: Vec<SupportVector>,
        scaling: Option<Vec<DimScale>>,
        summary: TrainingSummary,
    ) -> Self {
        SvmModel {
            weights,
            offset,
            c,
            support,
            scaling,
            summary,
        }
    }
}

/// Trains a linear soft-margin model: solves the dual on the Gram matrix of
/// the dataset and reconstructs w = Σ α_i y_i x_i. A run that exhausts its
/// step budget still yields a model, tagged non-converged in its summary.
pub fn train(dataset: &LabeledDataset, params: &TrainParams) -> Result<SvmModel, SvmError> {
    params.validate()?;
    let (positives, negatives) = dataset.class_counts();
    if positives == 0 || negatives == 0 {
        return Err(SvmError::SingleClassDataset);
    }
    let problem = QpProblem::from_vectors(dataset.vectors(), dataset.labels(), params.c)?;
    let solution = qp::solve_dual(&problem, params.tol, params.max_passes)?;
    let violation = qp::kkt_violation(&problem, &solution)?;

    let dim = dataset.dimension();
    let mut weights = vec![0.0; dim];
    let mut support = Vec::new();
    for (i, &alpha) in solution.alphas.iter().enumerate() {
        if alpha > 0.0 {
            let label = dataset.labels()[i];
            let components = dataset.vectors()[i].components();
            let coef = alpha * label.sign();
            for (w, &x) in weights.iter_mut().zip(components) {
                *w += coef * x;
            }
            support.push(SupportVector {
                index: i,
                alpha,
                label,
                vector: components.to_vec(),
            });
        }
    }
    Ok(SvmModel {
        weights,
        offset: solution.offset,
        c: params.c,
        support,
        scaling: dataset.scaling().map(<[DimScale]>::to_vec),
        summary: TrainingSummary {
            samples: dataset.len(),
            iterations: solution.iterations,
            kkt_violation: violation,
            converged: solution.converged,
        },
    })
}

/// Anything that classifies feature vectors: linear models, partition trees,
/// and loaded artifacts of either kind.
pub trait Predictor {
    fn dimension(&self) -> usize;
    fn predict(&self, x: &FeatureVector) -> Result<Label, SvmError>;
    /// A scalar trace of the decision. For linear models this is w • x + b;
    /// for trees it is the decision value of the last split on the routing
    /// path, so its sign need not match the leaf label.
    fn decision_value(&self, x: &FeatureVector) -> Result<f64, SvmError>;
}

impl Predictor for SvmModel {
    fn dimension(&self) -> usize {
        SvmModel::dimension(self)
    }

    fn predict(&self, x: &FeatureVector) -> Result<Label, SvmError> {
        SvmModel::predict(self, x)
    }

    fn decision_value(&self, x: &FeatureVector) -> Result<f64, SvmError> {
        SvmModel::decision_value(self, x)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
