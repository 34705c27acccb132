//! Multi-disease statistical diagnosis of a single clinical record.
//!
//! A registry holds one trained model per disease together with that
//! disease's encoding schema and its stored evaluation. Diagnosing a record
//! encodes it once per disease, predicts, and attaches the confidence of the
//! emitted class: the stored predictive value for positive calls, the
//! predictive value for negative calls, times 100. A row whose encoding or
//! prediction fails is marked unavailable; the remaining rows still appear.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::encoding::{encode_record, ClinicalRecord, EncodingSchema, Label};
use crate::metrics::{EvaluationDocument, EvaluationSummary};
use crate::svm::{load_model, ModelArtifact};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("registry has no entries")]
    EmptyRegistry,
    #[error("registry entry {disease:?}: {reason}")]
    InvalidEntry { disease: String, reason: String },
    #[error("registry manifest: {0}")]
    BadManifest(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// One disease's classifier, schema, and stored evaluation.
#[derive(Debug, Clone)]
pub struct RegistryEntry {
    pub model: ModelArtifact,
    pub schema: EncodingSchema,
    pub evaluation: EvaluationSummary,
}

/// Per-disease registry, keyed and iterated in disease-name order.
#[derive(Debug, Clone)]
pub struct ModelRegistry {
    entries: BTreeMap<String, RegistryEntry>,
}

impl ModelRegistry {
    /// Validates and builds a registry: each entry's schema dimension must
    /// match its model and each evaluation must count at least one case.
    pub fn new(entries: BTreeMap<String, RegistryEntry>) -> Result<Self, ReportError> {
        for (disease, entry) in &entries {
            if entry.schema.dimension() != entry.model.dimension() {
                return Err(ReportError::InvalidEntry {
                    disease: disease.clone(),
                    reason: format!(
                        "schema dimension {} does not match model dimension {}",
                        entry.schema.dimension(),
                        entry.model.dimension()
                    ),
                });
            }
            if entry.evaluation.matrix.total() == 0 {
                return Err(ReportError::InvalidEntry {
                    disease: disease.clone(),
                    reason: "evaluation matrix is empty".into(),
                });
            }
        }
        Ok(ModelRegistry { entries })
    }

    pub fn entries(&self) -> &BTreeMap<String, RegistryEntry> {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Loads a registry from a JSON manifest listing, per disease, the model
    /// file, schema file, and evaluation file. Relative paths resolve against
    /// the manifest's directory.
    pub fn load<P: AsRef<Path>>(manifest_path: P) -> Result<Self, ReportError> {
        use serde::Deserialize;

        #[derive(Deserialize)]
        struct ManifestEntry {
            name: String,
            model: String,
            schema: String,
            evaluation: String,
        }
        #[derive(Deserialize)]
        struct Manifest {
            diseases: Vec<ManifestEntry>,
        }

        let manifest_path = manifest_path.as_ref();
        let text = fs::read_to_string(manifest_path)?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| ReportError::BadManifest(e.to_string()))?;
        let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));

        let mut entries = BTreeMap::new();
        for item in manifest.diseases {
            let invalid = |reason: String| ReportError::InvalidEntry {
                disease: item.name.clone(),
                reason,
            };
            if entries.contains_key(&item.name) {
                return Err(invalid("duplicate disease name".into()));
            }
            let model = load_model(base.join(&item.model))
                .map_err(|e| invalid(format!("model {}: {e}", item.model)))?;
            let schema_text = fs::read_to_string(base.join(&item.schema))
                .map_err(|e| invalid(format!("schema {}: {e}", item.schema)))?;
            let schema = EncodingSchema::from_json(&schema_text)
                .map_err(|e| invalid(format!("schema {}: {e}", item.schema)))?;
            let evaluation = load_evaluation(&base.join(&item.evaluation))
                .map_err(|e| invalid(format!("evaluation {}: {e}", item.evaluation)))?;
            entries.insert(
                item.name,
                RegistryEntry {
                    model,
                    schema,
                    evaluation,
                },
            );
        }
        ModelRegistry::new(entries)
    }
}

/// Reads either a full evaluation document or a bare summary.
fn load_evaluation(path: &Path) -> Result<EvaluationSummary, String> {
    let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
    if let Ok(document) = serde_json::from_str::<EvaluationDocument>(&text) {
        return Ok(document.summary);
    }
    serde_json::from_str::<EvaluationSummary>(&text).map_err(|e| e.to_string())
}

/// One diagnosis row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub disease: String,
    #[serde(flatten)]
    pub outcome: RowOutcome,
}

/// The outcome of one disease's diagnosis, or why it was unavailable.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum RowOutcome {
    Ok {
        predicted: Label,
        /// Stored predictive value of the emitted class, times 100; `None`
        /// when that predictive value is undefined.
        confidence_percent: Option<f64>,
        decision_value: f64,
    },
    Unavailable {
        reason: String,
    },
}

/// Diagnosis rows, one per registry entry, sorted by disease name.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticReport {
    pub rows: Vec<ReportRow>,
}

/// Diagnoses one record against every registry entry.
pub fn diagnose(
    registry: &ModelRegistry,
    record: &ClinicalRecord,
) -> Result<DiagnosticReport, ReportError> {
    if registry.is_empty() {
        return Err(ReportError::EmptyRegistry);
    }
    let mut rows = Vec::with_capacity(registry.len());
    for (disease, entry) in registry.entries() {
        let outcome = diagnose_entry(entry, record);
        rows.push(ReportRow {
            disease: disease.clone(),
            outcome,
        });
    }
    Ok(DiagnosticReport { rows })
}

fn diagnose_entry(entry: &RegistryEntry, record: &ClinicalRecord) -> RowOutcome {
    let vector = match encode_record(record, &entry.schema) {
        Ok(v) => v,
        Err(e) => {
            return RowOutcome::Unavailable {
                reason: e.to_string(),
            }
        }
    };
    let (predicted, decision_value) = match entry.model.classify(&vector) {
        Ok(pair) => pair,
        Err(e) => {
            return RowOutcome::Unavailable {
                reason: e.to_string(),
            }
        }
    };
    let predictive_value = match predicted {
        Label::Positive => entry.evaluation.ppv,
        Label::Negative => entry.evaluation.npv,
    };
    RowOutcome::Ok {
        predicted,
        confidence_percent: predictive_value.map(|v| v * 100.0),
        decision_value,
    }
}

impl DiagnosticReport {
    /// The report as an aligned text table.
    pub fn render_table(&self) -> String {
        let name_width = self
            .rows
            .iter()
            .map(|r| r.disease.len())
            .max()
            .unwrap_or(0)
            .max("Disease".len())
            + 2;
        let mut out = String::new();
        out.push_str(&format!(
            "{:<name_width$}{:<13}{:<13}{}\n",
            "Disease", "Prediction", "Confidence", "Decision value"
        ));
        for row in &self.rows {
            match &row.outcome {
                RowOutcome::Ok {
                    predicted,
                    confidence_percent,
                    decision_value,
                } => {
                    let prediction = match predicted {
                        Label::Positive => "Positive",
                        Label::Negative => "Negative",
                    };
                    let confidence = match confidence_percent {
                        Some(pct) => format!("{pct:.1}%"),
                        None => "undefined".into(),
                    };
                    out.push_str(&format!(
                        "{:<name_width$}{:<13}{:<13}{:.6}\n",
                        row.disease, prediction, confidence, decision_value
                    ));
                }
                RowOutcome::Unavailable { reason } => {
                    out.push_str(&format!(
                        "{:<name_width$}{:<13}{:<13}-  ({reason})\n",
                        row.disease, "unavailable", "-"
                    ));
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{
        FeatureKind, FeatureSpec, FeatureVector, LabelRule, LabeledDataset,
    };
    use crate::metrics::{summarize, ConfusionMatrix};
    use crate::svm::{train, TrainParams};

    fn schema_for(columns: &[&str]) -> EncodingSchema {
        EncodingSchema::new(
            columns
                .iter()
                .map(|name| FeatureSpec {
                    name: name.to_string(),
                    kind: FeatureKind::Numeric,
                    impute: None,
                })
                .collect(),
            LabelRule {
                label_column: "diagnosis".into(),
                positive_value: "disease".into(),
                negative_value: "healthy".into(),
            },
        )
        .unwrap()
    }

    fn toy_model() -> ModelArtifact {
        let vectors = vec![
            FeatureVector::new(vec![0.0, 2.0]).unwrap(),
            FeatureVector::new(vec![0.0, -2.0]).unwrap(),
        ];
        let labels = vec![Label::Positive, Label::Negative];
        let dataset = LabeledDataset::new(vectors, labels).unwrap();
        ModelArtifact::Linear(train(&dataset, &TrainParams::new(10.0, 1e-7)).unwrap())
    }

    fn entry_with_matrix(columns: &[&str], matrix: ConfusionMatrix) -> RegistryEntry {
        RegistryEntry {
            model: toy_model(),
            schema: schema_for(columns),
            evaluation: summarize(&matrix).unwrap(),
        }
    }

    fn fatty_liver_entry() -> RegistryEntry {
        entry_with_matrix(
            &["SGOT", "SGPT"],
            ConfusionMatrix::from_counts(389, 37, 53, 405).unwrap(),
        )
    }

    #[test]
    fn positive_call_reports_the_stored_ppv() {
        let mut entries = BTreeMap::new();
        entries.insert("fatty liver".to_string(), fatty_liver_entry());
        let registry = ModelRegistry::new(entries).unwrap();
        let record = ClinicalRecord::from_pairs(&[("SGOT", "0"), ("SGPT", "3")]);
        let report = diagnose(&registry, &record).unwrap();
        let RowOutcome::Ok {
            predicted,
            confidence_percent,
            decision_value,
        } = &report.rows[0].outcome
        else {
            panic!("expected a diagnosis row");
        };
        assert_eq!(*predicted, Label::Positive);
        // PPV 389/426 = 0.913146..., reported as a percentage.
        assert!((confidence_percent.unwrap() - 91.31455399061032).abs() < 1e-9);
        assert!((decision_value - 1.5).abs() < 1e-6);
    }

    #[test]
    fn perfect_evaluation_reports_full_confidence() {
        let mut entries = BTreeMap::new();
        entries.insert(
            "breast".to_string(),
            entry_with_matrix(
                &["a", "b"],
                ConfusionMatrix::from_counts(104, 0, 0, 104).unwrap(),
            ),
        );
        let registry = ModelRegistry::new(entries).unwrap();
        for cell in ["3", "-3"] {
            let record = ClinicalRecord::from_pairs(&[("a", "0"), ("b", cell)]);
            let report = diagnose(&registry, &record).unwrap();
            let RowOutcome::Ok {
                confidence_percent, ..
            } = &report.rows[0].outcome
            else {
                panic!("expected a diagnosis row");
            };
            assert_eq!(confidence_percent.unwrap(), 100.0);
        }
    }

    #[test]
    fn failing_entry_becomes_unavailable_while_others_survive() {
        let mut entries = BTreeMap::new();
        entries.insert("liver".to_string(), entry_with_matrix(&["a", "b"], ConfusionMatrix::from_counts(9, 1, 1, 9).unwrap()));
        entries.insert("gastritis".to_string(), entry_with_matrix(&["a", "c"], ConfusionMatrix::from_counts(8, 2, 2, 8).unwrap()));
        entries.insert("breast".to_string(), entry_with_matrix(&["a", "b"], ConfusionMatrix::from_counts(7, 3, 3, 7).unwrap()));
        let registry = ModelRegistry::new(entries).unwrap();
        // Record lacks column "c", so only gastritis fails.
        let record = ClinicalRecord::from_pairs(&[("a", "1"), ("b", "2")]);
        let report = diagnose(&registry, &record).unwrap();
        assert_eq!(report.rows.len(), 3);
        // Rows arrive sorted by disease name.
        let names: Vec<&str> = report.rows.iter().map(|r| r.disease.as_str()).collect();
        assert_eq!(names, vec!["breast", "gastritis", "liver"]);
        assert!(matches!(report.rows[0].outcome, RowOutcome::Ok { .. }));
        assert!(matches!(
            &report.rows[1].outcome,
            RowOutcome::Unavailable { reason } if reason.contains("c")
        ));
        assert!(matches!(report.rows[2].outcome, RowOutcome::Ok { .. }));
    }

    #[test]
    fn empty_registry_is_rejected() {
        let registry = ModelRegistry::new(BTreeMap::new()).unwrap();
        let record = ClinicalRecord::from_pairs(&[]);
        assert!(matches!(
            diagnose(&registry, &record),
            Err(ReportError::EmptyRegistry)
        ));
    }

    #[test]
    fn mismatched_schema_dimension_is_rejected_at_construction() {
        let mut entries = BTreeMap::new();
        entries.insert(
            "liver".to_string(),
            entry_with_matrix(&["a"], ConfusionMatrix::from_counts(1, 0, 0, 1).unwrap()),
        );
        assert!(matches!(
            ModelRegistry::new(entries),
            Err(ReportError::InvalidEntry { .. })
        ));
    }

    #[test]
    fn diagnose_is_pure_and_repeatable() {
        let mut entries = BTreeMap::new();
        entries.insert("fatty liver".to_string(), fatty_liver_entry());
        let registry = ModelRegistry::new(entries).unwrap();
        let record = ClinicalRecord::from_pairs(&[("SGOT", "0"), ("SGPT", "-1")]);
        let a = diagnose(&registry, &record).unwrap();
        let b = diagnose(&registry, &record).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn report_table_lists_rows_in_order() {
        let mut entries = BTreeMap::new();
        entries.insert("liver".to_string(), fatty_liver_entry());
        let registry = ModelRegistry::new(entries).unwrap();
        let record = ClinicalRecord::from_pairs(&[("SGOT", "0"), ("SGPT", "3")]);
        let table = diagnose(&registry, &record).unwrap().render_table();
        assert!(table.contains("Disease"));
        assert!(table.contains("liver"));
        assert!(table.contains("Positive"));
        assert!(table.contains("91.3%"));
    }
}
