//! Synthetic two-cluster cohort generator.
//!
//! Two Gaussian clusters with unit within-cluster deviation sit at
//! +/-(separation/2) along a seeded random unit direction. An overlap
//! fraction of each class is resampled from the opposite cluster while
//! keeping its label, which makes those points unreachable by any linear
//! separator. A fixed seed reproduces the cohort byte for byte.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use clinsvm::encoding::{EncodingSchema, FeatureKind, FeatureSpec, LabelRule};

pub struct SynthParams {
    pub n_per_class: usize,
    pub dims: usize,
    pub separation: f64,
    pub overlap: f64,
    pub seed: u64,
}

impl SynthParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.n_per_class < 1 {
            return Err("n-per-class must be at least 1".into());
        }
        if self.dims < 1 {
            return Err("dims must be at least 1".into());
        }
        if !(self.separation > 0.0 && self.separation.is_finite()) {
            return Err(format!("separation must be positive, got {}", self.separation));
        }
        if !(0.0..=1.0).contains(&self.overlap) {
            return Err(format!("overlap must lie in [0, 1], got {}", self.overlap));
        }
        Ok(())
    }
}

fn unit_direction(rng: &mut ChaCha8Rng, dims: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dims).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Generates the cohort as CSV text with header `f1..fD,label` and labels
/// `+1`/`-1`; all positive rows precede all negative rows.
pub fn generate_cohort(params: &SynthParams) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let direction = unit_direction(&mut rng, params.dims);
    let half = params.separation / 2.0;
    let flipped = (params.overlap * params.n_per_class as f64).floor() as usize;

    let mut out = String::new();
    for d in 0..params.dims {
        out.push_str(&format!("f{}", d + 1));
        out.push(',');
    }
    out.push_str("label\n");

    for &side in &[1.0f64, -1.0] {
        for row in 0..params.n_per_class {
            // The first `flipped` rows of each class come from the opposite
            // cluster but keep their class label.
            let center_sign = if row < flipped { -side } else { side };
            for &u in &direction {
                let noise: f64 = rng.sample(StandardNormal);
                let value = center_sign * half * u + noise;
                out.push_str(&format!("{value}"));
                out.push(',');
            }
            out.push_str(if side > 0.0 { "+1" } else { "-1" });
            out.push('\n');
        }
    }
    out
}

/// All-numeric schema matching [`generate_cohort`]'s CSV layout.
pub fn cohort_schema(dims: usize) -> EncodingSchema {
    EncodingSchema::new(
        (0..dims)
            .map(|d| FeatureSpec {
                name: format!("f{}", d + 1),
                kind: FeatureKind::Numeric,
                impute: None,
            })
            .collect(),
        LabelRule {
            label_column: "label".into(),
            positive_value: "+1".into(),
            negative_value: "-1".into(),
        },
    )
    .expect("generated schema is valid")
}
