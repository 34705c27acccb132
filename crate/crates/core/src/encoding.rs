//! Encoding of clinical records as labeled vectors.
//!
//! A schema lists M features in a fixed enumeration order. Numeric features
//! take the cell value as the vector component; staged features map each of
//! their k named stages to a schema-chosen distinct number. A label rule maps
//! one designated column to the +1/-1 class labels. Optional standardization
//! rescales every dimension to mean 0 and standard deviation 1 (population
//! convention, divisor l) and records the transform so prediction-time inputs
//! can stay raw.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::Read;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Errors produced while encoding records or standardizing datasets.
#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("missing value for column {column:?}")]
    MissingColumn { column: String },
    #[error("unknown stage {value:?} for feature {feature:?}")]
    UnknownStage { feature: String, value: String },
    #[error("cell {value:?} for feature {feature:?} is not numeric")]
    NonNumericCell { feature: String, value: String },
    #[error("non-finite value for feature {feature:?}")]
    NonFiniteValue { feature: String },
    #[error("non-finite component at dimension {index}")]
    NonFiniteComponent { index: usize },
    #[error("label value {value:?} matches neither the positive nor the negative rule")]
    UnknownLabelValue { value: String },
    #[error("record {index}: {source}")]
    AtRecord {
        index: usize,
        #[source]
        source: Box<EncodeError>,
    },
    #[error("dataset is already standardized")]
    AlreadyStandardized,
    #[error("dataset has {actual} rows, need at least {required}")]
    DatasetTooSmall { actual: usize, required: usize },
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Binary class label carried by every training vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    /// The label as the sign y ∈ {+1, -1} used in the optimization problem.
    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }

    /// Label for a decision value; a tie at exactly 0 goes positive.
    pub fn from_decision(value: f64) -> Label {
        if value >= 0.0 {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Positive => Label::Negative,
            Label::Negative => Label::Positive,
        }
    }
}

impl From<Label> for i8 {
    fn from(label: Label) -> i8 {
        match label {
            Label::Positive => 1,
            Label::Negative => -1,
        }
    }
}

impl TryFrom<i8> for Label {
    type Error = String;

    fn try_from(value: i8) -> Result<Label, String> {
        match value {
            1 => Ok(Label::Positive),
            -1 => Ok(Label::Negative),
            other => Err(format!("label must be +1 or -1, got {other}")),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Positive => write!(f, "+1"),
            Label::Negative => write!(f, "-1"),
        }
    }
}

/// One named stage of a staged clinical test and the number chosen for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub value: f64,
}

/// How a feature's raw cells become vector components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureKind {
    /// The cell is parsed as a number and taken as the component directly.
    Numeric,
    /// The cell names one of k stages; the component is that stage's number.
    Staged { stages: Vec<Stage> },
}

/// Per-column encoding rule.
///
/// `impute` is an opt-in constant substituted when the cell is missing or
/// empty; without it, missing values are errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub impute: Option<f64>,
}

/// Maps the raw label column onto the +1/-1 classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRule {
    pub label_column: String,
    pub positive_value: String,
    pub negative_value: String,
}

/// Ordered feature rules plus the label rule; the feature order is the
/// component order of every encoded vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EncodingSchema {
    features: Vec<FeatureSpec>,
    label_rule: LabelRule,
}

impl EncodingSchema {
    /// Validates and builds a schema: feature names must be unique, the label
    /// column must not be a feature, staged features need non-empty stage
    /// lists with unique names and pairwise-distinct finite numbers.
    pub fn new(features: Vec<FeatureSpec>, label_rule: LabelRule) -> Result<Self, EncodeError> {
        if features.is_empty() {
            return Err(EncodeError::InvalidSchema(
                "schema must declare at least one feature".into(),
            ));
        }
        let mut names = HashSet::new();
        for feature in &features {
            if !names.insert(feature.name.as_str()) {
                return Err(EncodeError::InvalidSchema(format!(
                    "duplicate feature name {:?}",
                    feature.name
                )));
            }
            if let Some(v) = feature.impute {
                if !v.is_finite() {
                    return Err(EncodeError::InvalidSchema(format!(
                        "imputation constant for {:?} is not finite",
                        feature.name
                    )));
                }
            }
            if let FeatureKind::Staged { stages } = &feature.kind {
                if stages.is_empty() {
                    return Err(EncodeError::InvalidSchema(format!(
                        "staged feature {:?} has no stages",
                        feature.name
                    )));
                }
                let mut stage_names = HashSet::new();
                for stage in stages {
                    if !stage_names.insert(stage.name.as_str()) {
                        return Err(EncodeError::InvalidSchema(format!(
                            "feature {:?} repeats stage {:?}",
                            feature.name, stage.name
                        )));
                    }
                    if !stage.value.is_finite() {
                        return Err(EncodeError::InvalidSchema(format!(
                            "stage {:?} of feature {:?} has a non-finite number",
                            stage.name, feature.name
                        )));
                    }
                }
                for (i, a) in stages.iter().enumerate() {
                    for b in &stages[i + 1..] {
                        if a.value == b.value {
                            return Err(EncodeError::InvalidSchema(format!(
                                "feature {:?}: stages {:?} and {:?} share the number {}",
                                feature.name, a.name, b.name, a.value
                            )));
                        }
                    }
                }
            }
        }
        if names.contains(label_rule.label_column.as_str()) {
            return Err(EncodeError::InvalidSchema(format!(
                "label column {:?} is also a feature",
                label_rule.label_column
            )));
        }
        if label_rule.positive_value == label_rule.negative_value {
            return Err(EncodeError::InvalidSchema(
                "positive and negative label values must differ".into(),
            ));
        }
        Ok(EncodingSchema {
            features,
            label_rule,
        })
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn label_rule(&self) -> &LabelRule {
        &self.label_rule
    }

    /// Number of vector dimensions M.
    pub fn dimension(&self) -> usize {
        self.features.len()
    }

    /// Parses and validates a schema from its JSON document form.
    pub fn from_json(text: &str) -> Result<Self, EncodeError> {
        serde_json::from_str(text).map_err(|e| EncodeError::InvalidSchema(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }
}

impl<'de> Deserialize<'de> for EncodingSchema {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            features: Vec<FeatureSpec>,
            label_rule: LabelRule,
        }
        let raw = Raw::deserialize(deserializer)?;
        EncodingSchema::new(raw.features, raw.label_rule).map_err(D::Error::custom)
    }
}

/// One raw clinical record: column name to raw cell text.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClinicalRecord {
    values: HashMap<String, String>,
}

impl ClinicalRecord {
    pub fn new(values: HashMap<String, String>) -> Self {
        ClinicalRecord { values }
    }

    pub fn from_pairs(pairs: &[(&str, &str)]) -> Self {
        ClinicalRecord {
            values: pairs
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }

    pub fn get(&self, column: &str) -> Option<&str> {
        self.values.get(column).map(String::as_str)
    }
}

/// A point in M-dimensional Euclidean space; every component is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(components: Vec<f64>) -> Result<Self, EncodeError> {
        if let Some(index) = components.iter().position(|v| !v.is_finite()) {
            return Err(EncodeError::NonFiniteComponent { index });
        }
        Ok(FeatureVector(components))
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Serialize for FeatureVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for FeatureVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let components = Vec::<f64>::deserialize(deserializer)?;
        FeatureVector::new(components).map_err(D::Error::custom)
    }
}

/// Stored transform of one dimension: the original mean and standard
/// deviation. For zero-variance dimensions the deviation is stored as 1 and
/// the flag is set, so the transform only centers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimScale {
    pub mean: f64,
    pub std: f64,
    pub zero_variance: bool,
}

/// Labeled vectors x_i with classes y_i, plus the scaling transform when the
/// dataset has been standardized.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabeledDataset {
    vectors: Vec<FeatureVector>,
    labels: Vec<Label>,
    scaling: Option<Vec<DimScale>>,
}

impl LabeledDataset {
    pub fn new(vectors: Vec<FeatureVector>, labels: Vec<Label>) -> Result<Self, EncodeError> {
        Self::build(vectors, labels, None)
    }

    pub fn with_scaling(
        vectors: Vec<FeatureVector>,
        labels: Vec<Label>,
        scaling: Vec<DimScale>,
    ) -> Result<Self, EncodeError> {
        Self::build(vectors, labels, Some(scaling))
    }

    fn build(
        vectors: Vec<FeatureVector>,
        labels: Vec<Label>,
        scaling: Option<Vec<DimScale>>,
    ) -> Result<Self, EncodeError> {
        if vectors.is_empty() {
            return Err(EncodeError::InvalidDataset(
                "dataset must contain at least one vector".into(),
            ));
        }
        if vectors.len() != labels.len() {
            return Err(EncodeError::InvalidDataset(format!(
                "{} vectors but {} labels",
                vectors.len(),
                labels.len()
            )));
        }
        let dim = vectors[0].len();
        if vectors.iter().any(|v| v.len() != dim) {
            return Err(EncodeError::InvalidDataset(
                "vectors have mixed dimensions".into(),
            ));
        }
        if let Some(scales) = &scaling {
            if scales.len() != dim {
                return Err(EncodeError::InvalidDataset(format!(
                    "scaling has {} entries for dimension {}",
                    scales.len(),
                    dim
                )));
            }
            if !scales.iter().all(|s| s.std.is_finite() && s.std > 0.0) {
                return Err(EncodeError::InvalidDataset(
                    "stored standard deviations must be positive".into(),
                ));
            }
        }
        Ok(LabeledDataset {
            vectors,
            labels,
            scaling,
        })
    }

    pub fn vectors(&self) -> &[FeatureVector] {
        &self.vectors
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn scaling(&self) -> Option<&[DimScale]> {
        self.scaling.as_deref()
    }

    /// Number of rows l.
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Number of dimensions M.
    pub fn dimension(&self) -> usize {
        self.vectors[0].len()
    }

    /// (positive, negative) label counts.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self
            .labels
            .iter()
            .filter(|l| **l == Label::Positive)
            .count();
        (pos, self.labels.len() - pos)
    }
}

impl<'de> Deserialize<'de> for LabeledDataset {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            vectors: Vec<FeatureVector>,
            labels: Vec<Label>,
            #[serde(default)]
            scaling: Option<Vec<DimScale>>,
        }
        let raw = Raw::deserialize(deserializer)?;
        LabeledDataset::build(raw.vectors, raw.labels, raw.scaling).map_err(D::Error::custom)
    }
}

/// Encodes one record against the schema, producing components in schema
/// feature order.
pub fn encode_record(
    record: &ClinicalRecord,
    schema: &EncodingSchema,
) -> Result<FeatureVector, EncodeError> {
    let mut components = Vec::with_capacity(schema.dimension());
    for feature in schema.features() {
        let cell = record.get(&feature.name).filter(|c| !c.is_empty());
        let value = match cell {
            None => feature
                .impute
                .ok_or_else(|| EncodeError::MissingColumn {
                    column: feature.name.clone(),
                })?,
            Some(cell) => match &feature.kind {
                FeatureKind::Numeric => {
                    let v: f64 =
                        cell.trim()
                            .parse()
                            .map_err(|_| EncodeError::NonNumericCell {
                                feature: feature.name.clone(),
                                value: cell.to_string(),
                            })?;
                    if !v.is_finite() {
                        return Err(EncodeError::NonFiniteValue {
                            feature: feature.name.clone(),
                        });
                    }
                    v
                }
                FeatureKind::Staged { stages } => stages
                    .iter()
                    .find(|s| s.name == cell)
                    .map(|s| s.value)
                    .ok_or_else(|| EncodeError::UnknownStage {
                        feature: feature.name.clone(),
                        value: cell.to_string(),
                    })?,
            },
        };
        components.push(value);
    }
    FeatureVector::new(components)
}

/// Encodes a batch of records; every record must carry the label column with
/// the schema's positive or negative value. Errors name the failing record.
pub fn encode_dataset(
    records: &[ClinicalRecord],
    schema: &EncodingSchema,
) -> Result<LabeledDataset, EncodeError> {
    if records.is_empty() {
        return Err(EncodeError::InvalidDataset(
            "dataset must contain at least one record".into(),
        ));
    }
    let rule = schema.label_rule();
    let mut vectors = Vec::with_capacity(records.len());
    let mut labels = Vec::with_capacity(records.len());
    for (index, record) in records.iter().enumerate() {
        let at = |source: EncodeError| EncodeError::AtRecord {
            index,
            source: Box::new(source),
        };
        let cell = record
            .get(&rule.label_column)
            .filter(|c| !c.is_empty())
            .ok_or_else(|| {
                at(EncodeError::MissingColumn {
                    column: rule.label_column.clone(),
                })
            })?;
        let label = if cell == rule.positive_value {
            Label::Positive
        } else if cell == rule.negative_value {
            Label::Negative
        } else {
            return Err(at(EncodeError::UnknownLabelValue {
                value: cell.to_string(),
            }));
        };
        vectors.push(encode_record(record, schema).map_err(at)?);
        labels.push(label);
    }
    LabeledDataset::new(vectors, labels)
}

// Relative threshold below which a dimension counts as constant.
const ZERO_VARIANCE_EPS: f64 = 1e-12;

/// Rescales every dimension to mean 0 and standard deviation 1 (population
/// convention, divisor l) and stores the per-dimension transform. Dimensions
/// with zero variance are centered only and flagged.
pub fn standardize(dataset: &LabeledDataset) -> Result<LabeledDataset, EncodeError> {
    if dataset.scaling.is_some() {
        return Err(EncodeError::AlreadyStandardized);
    }
    let l = dataset.len();
    if l < 2 {
        return Err(EncodeError::DatasetTooSmall {
            actual: l,
            required: 2,
        });
    }
    let dim = dataset.dimension();
    let mut scaling = Vec::with_capacity(dim);
    for d in 0..dim {
        let mean = dataset
            .vectors
            .iter()
            .map(|v| v.components()[d])
            .sum::<f64>()
            / l as f64;
        let variance = dataset
            .vectors
            .iter()
            .map(|v| {
                let delta = v.components()[d] - mean;
                delta * delta
            })
            .sum::<f64>()
            / l as f64;
        let std = variance.sqrt();
        let zero_variance = std <= ZERO_VARIANCE_EPS * mean.abs().max(1.0);
        scaling.push(DimScale {
            mean,
            std: if zero_variance { 1.0 } else { std },
            zero_variance,
        });
    }
    let vectors = dataset
        .vectors
        .iter()
        .map(|v| FeatureVector::new(apply_scaling(&scaling, v.components())))
        .collect::<Result<Vec<_>, _>>()?;
    LabeledDataset::build(vectors, dataset.labels.clone(), Some(scaling))
}

/// Applies the stored transform: component d becomes (x_d - mean_d) / std_d.
pub fn apply_scaling(scaling: &[DimScale], components: &[f64]) -> Vec<f64> {
    scaling
        .iter()
        .zip(components)
        .map(|(s, &x)| (x - s.mean) / s.std)
        .collect()
}

/// Inverts [`apply_scaling`]: component d becomes x_d * std_d + mean_d.
pub fn invert_scaling(scaling: &[DimScale], components: &[f64]) -> Vec<f64> {
    scaling
        .iter()
        .zip(components)
        .map(|(s, &x)| x * s.std + s.mean)
        .collect()
}

/// Reads clinical records from CSV with a header row. Cells are trimmed; on
/// duplicate headers the first occurrence of a column name wins.
pub fn records_from_csv<R: Read>(reader: R) -> Result<Vec<ClinicalRecord>, EncodeError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let mut values = HashMap::with_capacity(headers.len());
        for (header, cell) in headers.iter().zip(row.iter()) {
            values
                .entry(header.clone())
                .or_insert_with(|| cell.to_string());
        }
        records.push(ClinicalRecord::new(values));
    }
    Ok(records)
}
