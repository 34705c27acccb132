//! Versioned JSON model files.
//!
//! Every numeric field is serialized as its shortest round-tripping decimal
//! string, so load(save(m)) reproduces decision values bit-exactly. The
//! payload carries a SHA-256 checksum computed over its canonical compact
//! serialization; tampered or truncated files are rejected.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::encoding::{DimScale, FeatureVector, Label};
use crate::svm::tree::{PartitionTree, TreeNode};
use crate::svm::{Predictor, SupportVector, SvmError, SvmModel, TrainingSummary};

/// Format version this build reads and writes.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// A persisted classifier: a single hyperplane or a partition tree.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelArtifact {
    Linear(SvmModel),
    Tree(PartitionTree),
}

impl ModelArtifact {
    pub fn dimension(&self) -> usize {
        match self {
            ModelArtifact::Linear(m) => m.dimension(),
            ModelArtifact::Tree(t) => t.dimension(),
        }
    }

    /// Leaf label plus decision trace, as in [`PartitionTree::classify`].
    pub fn classify(&self, x: &FeatureVector) -> Result<(Label, f64), SvmError> {
        match self {
            ModelArtifact::Linear(m) => {
                let value = m.decision_value(x)?;
                Ok((Label::from_decision(value), value))
            }
            ModelArtifact::Tree(t) => t.classify(x),
        }
    }

    pub fn converged(&self) -> bool {
        match self {
            ModelArtifact::Linear(m) => m.summary().converged,
            ModelArtifact::Tree(t) => t.all_splits_converged(),
        }
    }
}

impl Predictor for ModelArtifact {
    fn dimension(&self) -> usize {
        ModelArtifact::dimension(self)
    }

    fn predict(&self, x: &FeatureVector) -> Result<Label, SvmError> {
        Ok(self.classify(x)?.0)
    }

    fn decision_value(&self, x: &FeatureVector) -> Result<f64, SvmError> {
        Ok(self.classify(x)?.1)
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn parse_f64(s: &str) -> Result<f64, SvmError> {
    s.parse()
        .map_err(|_| SvmError::CorruptModel(format!("bad number {s:?}")))
}

#[derive(Serialize, Deserialize)]
struct ScaleDto {
    mean: String,
    std: String,
    zero_variance: bool,
}

#[derive(Serialize, Deserialize)]
struct SupportDto {
    index: usize,
    alpha: String,
    label: i8,
    vector: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct SummaryDto {
    samples: usize,
    iterations: usize,
    kkt_violation: String,
    converged: bool,
}

#[derive(Serialize, Deserialize)]
struct LinearDto {
    weights: Vec<String>,
    offset: String,
    #[serde(rename = "C")]
    c: String,
    scaling: Option<Vec<ScaleDto>>,
    support: Vec<SupportDto>,
    training_summary: SummaryDto,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
enum NodeDto {
    Leaf {
        label: i8,
        purity: String,
    },
    Split {
        model: LinearDto,
        positive: Box<NodeDto>,
        negative: Box<NodeDto>,
    },
}

#[derive(Serialize, Deserialize)]
struct TreeDto {
    max_depth: usize,
    min_leaf_size: usize,
    dimension: usize,
    root: NodeDto,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum PayloadDto {
    Linear(LinearDto),
    Tree(TreeDto),
}

#[derive(Serialize)]
struct SignedView<'a> {
    format_version: u32,
    #[serde(flatten)]
    payload: &'a PayloadDto,
}

#[derive(Serialize, Deserialize)]
struct FileDto {
    format_version: u32,
    #[serde(flatten)]
    payload: PayloadDto,
    checksum: String,
}

fn checksum(format_version: u32, payload: &PayloadDto) -> String {
    let canonical = serde_json::to_string(&SignedView {
        format_version,
        payload,
    })
    .expect("payload serializes");
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn linear_to_dto(model: &SvmModel) -> LinearDto {
    LinearDto {
        weights: model.weights().iter().copied().map(fmt_f64).collect(),
        offset: fmt_f64(model.offset()),
        c: fmt_f64(model.box_constant()),
        scaling: model.scaling().map(|scales| {
            scales
                .iter()
                .map(|s| ScaleDto {
                    mean: fmt_f64(s.mean),
                    std: fmt_f64(s.std),
                    zero_variance: s.zero_variance,
                })
                .collect()
        }),
        support: model
            .support()
            .iter()
            .map(|sv| SupportDto {
                index: sv.index,
                alpha: fmt_f64(sv.alpha),
                label: sv.label.into(),
                vector: sv.vector.iter().copied().map(fmt_f64).collect(),
            })
            .collect(),
        training_summary: SummaryDto {
            samples: model.summary().samples,
            iterations: model.summary().iterations,
            kkt_violation: fmt_f64(model.summary().kkt_violation),
            converged: model.summary().converged,
        },
    }
}

fn linear_from_dto(dto: &LinearDto) -> Result<SvmModel, SvmError> {
    let weights = dto
        .weights
        .iter()
        .map(|s| parse_f64(s))
        .collect::<Result<Vec<_>, _>>()?;
    if weights.is_empty() {
        return Err(SvmError::CorruptModel("model has no weights".into()));
    }
    let dim = weights.len();
    let scaling = match &dto.scaling {
        None => None,
        Some(scales) => {
            if scales.len() != dim {
                return Err(SvmError::CorruptModel(format!(
                    "scaling has {} entries for dimension {dim}",
                    scales.len()
                )));
            }
            let mut out = Vec::with_capacity(scales.len());
            for s in scales {
                let std = parse_f64(&s.std)?;
                if !(std.is_finite() && std > 0.0) {
                    return Err(SvmError::CorruptModel(
                        "stored standard deviation must be positive".into(),
                    ));
                }
                out.push(DimScale {
                    mean: parse_f64(&s.mean)?,
                    std,
                    zero_variance: s.zero_variance,
                });
            }
            Some(out)
        }
    };
    let mut support = Vec::with_capacity(dto.support.len());
    for sv in &dto.support {
        if sv.vector.len() != dim {
            return Err(SvmError::CorruptModel(format!(
                "support vector {} has dimension {}, expected {dim}",
                sv.index,
                sv.vector.len()
            )));
        }
        support.push(SupportVector {
            index: sv.index,
            alpha: parse_f64(&sv.alpha)?,
            label: Label::try_from(sv.label).map_err(SvmError::CorruptModel)?,
            vector: sv
                .vector
                .iter()
                .map(|s| parse_f64(s))
                .collect::<Result<Vec<_>, _>>()?,
        });
    }
    Ok(SvmModel::from_parts(
        weights,
        parse_f64(&dto.offset)?,
        parse_f64(&dto.c)?,
        support,
        scaling,
        TrainingSummary {
            samples: dto.training_summary.samples,
            iterations: dto.training_summary.iterations,
            kkt_violation: parse_f64(&dto.training_summary.kkt_violation)?,
            converged: dto.training_summary.converged,
        },
    ))
}

fn node_to_dto(node: &TreeNode) -> NodeDto {
    match node {
        TreeNode::Leaf { label, purity } => NodeDto::Leaf {
            label: (*label).into(),
            purity: fmt_f64(*purity),
        },
        TreeNode::Split {
            model,
            positive,
            negative,
        } => NodeDto::Split {
            model: linear_to_dto(model),
            positive: Box::new(node_to_dto(positive)),
            negative: Box::new(node_to_dto(negative)),
        },
    }
}

fn node_from_dto(dto: &NodeDto, dimension: usize) -> Result<TreeNode, SvmError> {
    match dto {
        NodeDto::Leaf { label, purity } => Ok(TreeNode::Leaf {
            label: Label::try_from(*label).map_err(SvmError::CorruptModel)?,
            purity: parse_f64(purity)?,
        }),
        NodeDto::Split {
            model,
            positive,
            negative,
        } => {
            let model = linear_from_dto(model)?;
            if model.dimension() != dimension {
                return Err(SvmError::CorruptModel(format!(
                    "split dimension {} does not match tree dimension {dimension}",
                    model.dimension()
                )));
            }
            Ok(TreeNode::Split {
                model,
                positive: Box::new(node_from_dto(positive, dimension)?),
                negative: Box::new(node_from_dto(negative, dimension)?),
            })
        }
    }
}

fn artifact_to_payload(artifact: &ModelArtifact) -> PayloadDto {
    match artifact {
        ModelArtifact::Linear(model) => PayloadDto::Linear(linear_to_dto(model)),
        ModelArtifact::Tree(tree) => PayloadDto::Tree(TreeDto {
            max_depth: tree.max_depth(),
            min_leaf_size: tree.min_leaf_size(),
            dimension: tree.dimension(),
            root: node_to_dto(tree.root()),
        }),
    }
}

fn artifact_from_payload(payload: &PayloadDto) -> Result<ModelArtifact, SvmError> {
    match payload {
        PayloadDto::Linear(dto) => Ok(ModelArtifact::Linear(linear_from_dto(dto)?)),
        PayloadDto::Tree(dto) => {
            if dto.dimension == 0 {
                return Err(SvmError::CorruptModel("tree has dimension 0".into()));
            }
            Ok(ModelArtifact::Tree(PartitionTree::from_parts(
                node_from_dto(&dto.root, dto.dimension)?,
                dto.max_depth,
                dto.min_leaf_size,
                dto.dimension,
            )))
        }
    }
}

/// Serializes the artifact to its file form without touching the filesystem.
pub fn model_to_json(artifact: &ModelArtifact) -> String {
    let payload = artifact_to_payload(artifact);
    let checksum = checksum(MODEL_FORMAT_VERSION, &payload);
    let file = FileDto {
        format_version: MODEL_FORMAT_VERSION,
        payload,
        checksum,
    };
    let mut text = serde_json::to_string_pretty(&file).expect("model serializes");
    text.push('\n');
    text
}

/// Parses and verifies a model file: version gate first, then the checksum.
pub fn model_from_json(text: &str) -> Result<ModelArtifact, SvmError> {
    #[derive(Deserialize)]
    struct VersionProbe {
        format_version: u32,
    }
    let probe: VersionProbe = serde_json::from_str(text)
        .map_err(|e| SvmError::CorruptModel(format!("unreadable model file: {e}")))?;
    if probe.format_version != MODEL_FORMAT_VERSION {
        return Err(SvmError::VersionMismatch {
            found: probe.format_version,
            supported: MODEL_FORMAT_VERSION,
        });
    }
    let file: FileDto = serde_json::from_str(text)
        .map_err(|e| SvmError::CorruptModel(format!("unreadable model file: {e}")))?;
    let expected = checksum(file.format_version, &file.payload);
    if expected != file.checksum {
        return Err(SvmError::CorruptModel("checksum mismatch".into()));
    }
    artifact_from_payload(&file.payload)
}

/// Writes the artifact as a versioned, checksummed JSON file.
pub fn save_model<P: AsRef<Path>>(artifact: &ModelArtifact, path: P) -> Result<(), SvmError> {
    fs::write(path, model_to_json(artifact))?;
    Ok(())
}

/// Loads a file produced by [`save_model`].
pub fn load_model<P: AsRef<Path>>(path: P) -> Result<ModelArtifact, SvmError> {
    let text = fs::read_to_string(path)?;
    model_from_json(&text)
}
