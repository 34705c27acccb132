//! Classification toolkit for clinical test records built on linear
//! soft-margin support vector machines.
//!
//! The pipeline has five stages, one module each:
//!
//! * [`encoding`]: turn raw clinical records into labeled vectors in
//!   M-dimensional Euclidean space (numeric results pass through, staged
//!   results map to schema-chosen distinct numbers), with optional
//!   standardization.
//! * [`qp`]: solve the box-constrained dual quadratic program by sequential
//!   minimal optimization, verified against a brute-force active-set oracle
//!   and KKT residual diagnostics.
//! * [`svm`]: train, persist, and apply linear models and recursive
//!   partition trees whose decision regions need not be connected.
//! * [`metrics`]: confusion matrices and the four diagnostic ratios
//!   (sensitivity, specificity, predictive values) with exact 6-decimal
//!   rendering.
//! * [`report`]: multi-disease statistical diagnosis of a single record
//!   from a registry of trained per-disease models.

pub mod encoding;
pub mod metrics;
pub mod qp;
pub mod report;
pub mod svm;

pub use encoding::{
    ClinicalRecord, DimScale, EncodeError, EncodingSchema, FeatureKind, FeatureSpec,
    FeatureVector, Label, LabelRule, LabeledDataset, Stage,
};
pub use metrics::{
    ConfusionMatrix, EvaluationDocument, EvaluationMode, EvaluationSummary, MetricsError,
};
pub use qp::{DualSolution, QpError, QpProblem};
pub use report::{DiagnosticReport, ModelRegistry, RegistryEntry, ReportError, RowOutcome};
pub use svm::{
    ModelArtifact, PartitionTree, Predictor, SvmError, SvmModel, TrainParams, TreeNode,
    TreeParams,
};
