//! Diagnostic evaluation: confusion matrices and the four ratios
//! (sensitivity, specificity, predictive value for positive/negative).
//!
//! Ratios are stored as floats but rendered from the integer counts with
//! exact rational arithmetic, rounded half-even to six decimals. A ratio
//! whose denominator is zero is undefined, never 0 or NaN.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::{Label, LabeledDataset};
use crate::svm::{Predictor, SvmError};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("confusion matrix has no entries")]
    EmptyMatrix,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error(transparent)]
    Svm(#[from] SvmError),
}

/// Counts of (Patient ∧ Positive, Normal ∧ Positive, Patient ∧ Negative,
/// Normal ∧ Negative); "Patient" is the true +1 class, "Positive" the call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    #[serde(rename = "tp")]
    pub tpc: u64,
    #[serde(rename = "fp")]
    pub fpc: u64,
    #[serde(rename = "fn")]
    pub fnc: u64,
    #[serde(rename = "tn")]
    pub tnc: u64,
}

impl ConfusionMatrix {
    pub fn from_counts(tpc: u64, fpc: u64, fnc: u64, tnc: u64) -> Result<Self, MetricsError> {
        let matrix = ConfusionMatrix { tpc, fpc, fnc, tnc };
        if matrix.total() == 0 {
            return Err(MetricsError::EmptyMatrix);
        }
        Ok(matrix)
    }

    pub fn total(&self) -> u64 {
        self.tpc + self.fpc + self.fnc + self.tnc
    }

    /// Row totals: all Positive calls, all Negative calls.
    pub fn positive_calls(&self) -> u64 {
        self.tpc + self.fpc
    }

    pub fn negative_calls(&self) -> u64 {
        self.fnc + self.tnc
    }

    /// Column totals: all true patients, all true normals.
    pub fn patients(&self) -> u64 {
        self.tpc + self.fnc
    }

    pub fn normals(&self) -> u64 {
        self.fpc + self.tnc
    }

    /// Relabels Patient ↔ Normal (and with it Positive ↔ Negative). Swapping
    /// exchanges sensitivity with specificity and PPV with NPV.
    pub fn swap_roles(&self) -> Self {
        ConfusionMatrix {
            tpc: self.tnc,
            fpc: self.fnc,
            fnc: self.fpc,
            tnc: self.tpc,
        }
    }
}

/// The matrix plus its four ratios; `None` marks an undefined ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub matrix: ConfusionMatrix,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub ppv: Option<f64>,
    pub npv: Option<f64>,
}

/// Tallies predictions against true labels over the whole dataset.
///
/// Vectors are handed to the predictor unchanged, so pass raw (unscaled)
/// vectors when the predictor carries its own scaling transform.
pub fn confusion<P: Predictor + ?Sized>(
    predictor: &P,
    dataset: &LabeledDataset,
) -> Result<ConfusionMatrix, MetricsError> {
    if dataset.is_empty() {
        return Err(MetricsError::EmptyDataset);
    }
    let mut matrix = ConfusionMatrix {
        tpc: 0,
        fpc: 0,
        fnc: 0,
        tnc: 0,
    };
    for (vector, &truth) in dataset.vectors().iter().zip(dataset.labels()) {
        let call = predictor.predict(vector)?;
        match (truth, call) {
            (Label::Positive, Label::Positive) => matrix.tpc += 1,
            (Label::Negative, Label::Positive) => matrix.fpc += 1,
            (Label::Positive, Label::Negative) => matrix.fnc += 1,
            (Label::Negative, Label::Negative) => matrix.tnc += 1,
        }
    }
    Ok(matrix)
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    if den == 0 {
        None
    } else {
        Some(num as f64 / den as f64)
    }
}

/// Computes the four diagnostic ratios from the counts.
pub fn summarize(matrix: &ConfusionMatrix) -> Result<EvaluationSummary, MetricsError> {
    if matrix.total() == 0 {
        return Err(MetricsError::EmptyMatrix);
    }
    Ok(EvaluationSummary {
        matrix: *matrix,
        sensitivity: ratio(matrix.tpc, matrix.patients()),
        specificity: ratio(matrix.tnc, matrix.normals()),
        ppv: ratio(matrix.tpc, matrix.positive_calls()),
        npv: ratio(matrix.tnc, matrix.negative_calls()),
    })
}

/// num/den rounded half-even to exactly six decimals, computed in integer
/// arithmetic; `None` when the denominator is zero.
pub fn ratio_6dp(num: u64, den: u64) -> Option<String> {
    if den == 0 {
        return None;
    }
    let num = num as u128;
    let den = den as u128;
    let scaled = num * 1_000_000;
    let mut quotient = scaled / den;
    let remainder = scaled % den;
    match (2 * remainder).cmp(&den) {
        std::cmp::Ordering::Greater => quotient += 1,
        std::cmp::Ordering::Equal => {
            if quotient % 2 == 1 {
                quotient += 1;
            }
        }
        std::cmp::Ordering::Less => {}
    }
    Some(format!("{}.{:06}", quotient / 1_000_000, quotient % 1_000_000))
}

fn render_ratio(num: u64, den: u64) -> String {
    ratio_6dp(num, den).unwrap_or_else(|| "undefined".into())
}

impl EvaluationSummary {
    /// Six-decimal renderings derived from the counts.
    pub fn sensitivity_6dp(&self) -> Option<String> {
        ratio_6dp(self.matrix.tpc, self.matrix.patients())
    }

    pub fn specificity_6dp(&self) -> Option<String> {
        ratio_6dp(self.matrix.tnc, self.matrix.normals())
    }

    pub fn ppv_6dp(&self) -> Option<String> {
        ratio_6dp(self.matrix.tpc, self.matrix.positive_calls())
    }

    pub fn npv_6dp(&self) -> Option<String> {
        ratio_6dp(self.matrix.tnc, self.matrix.negative_calls())
    }

    /// The evaluation as an aligned text table with a totals row and column,
    /// followed by the four ratio lines.
    pub fn render_table(&self) -> String {
        let m = &self.matrix;
        let mut out = String::new();
        out.push_str(&format!(
            "{:<10}{:>10}{:>10}{:>10}\n",
            "", "Patient", "Normal", "Total"
        ));
        out.push_str(&format!(
            "{:<10}{:>10}{:>10}{:>10}\n",
            "Positive",
            m.tpc,
            m.fpc,
            m.positive_calls()
        ));
        out.push_str(&format!(
            "{:<10}{:>10}{:>10}{:>10}\n",
            "Negative",
            m.fnc,
            m.tnc,
            m.negative_calls()
        ));
        out.push_str(&format!(
            "{:<10}{:>10}{:>10}{:>10}\n",
            "Total",
            m.patients(),
            m.normals(),
            m.total()
        ));
        out.push('\n');
        out.push_str(&format!(
            "Sensitivity: {}\n",
            render_ratio(m.tpc, m.patients())
        ));
        out.push_str(&format!(
            "Specificity: {}\n",
            render_ratio(m.tnc, m.normals())
        ));
        out.push_str(&format!(
            "Predictive value for positive: {}\n",
            render_ratio(m.tpc, m.positive_calls())
        ));
        out.push_str(&format!(
            "Predictive value for negative: {}\n",
            render_ratio(m.tnc, m.negative_calls())
        ));
        out
    }
}

/// Whether the reported counts came from the training data itself or from a
/// held-out split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluationMode {
    Resubstitution,
    Holdout,
}

/// The evaluation JSON document: the summary plus how it was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationDocument {
    pub mode: EvaluationMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holdout_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub summary: EvaluationSummary,
}

impl EvaluationDocument {
    pub fn resubstitution(summary: EvaluationSummary) -> Self {
        EvaluationDocument {
            mode: EvaluationMode::Resubstitution,
            holdout_fraction: None,
            seed: None,
            summary,
        }
    }

    pub fn holdout(summary: EvaluationSummary, fraction: f64, seed: u64) -> Self {
        EvaluationDocument {
            mode: EvaluationMode::Holdout,
            holdout_fraction: Some(fraction),
            seed: Some(seed),
            summary,
        }
    }

    pub fn render_table(&self) -> String {
        let mode = match self.mode {
            EvaluationMode::Resubstitution => "resubstitution (training data)".to_string(),
            EvaluationMode::Holdout => format!(
                "holdout ({:.0}%, seed {})",
                self.holdout_fraction.unwrap_or(0.0) * 100.0,
                self.seed.unwrap_or(0)
            ),
        };
        format!("Evaluation: {mode}\n\n{}", self.summary.render_table())
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("evaluation serializes");
        text.push('\n');
        text
    }
}
