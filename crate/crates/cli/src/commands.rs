//! Command implementations: thin orchestration over the library modules.

use std::fs;
use std::fs::File;
use std::path::{Path, PathBuf};

use clinsvm::encoding::{
    encode_dataset, encode_record, records_from_csv, standardize, ClinicalRecord, EncodingSchema,
    FeatureVector, Label, LabeledDataset,
};
use clinsvm::metrics::{confusion, summarize, EvaluationDocument};
use clinsvm::report::{diagnose, ModelRegistry};
use clinsvm::svm::{
    load_model, save_model, train as train_svm, train_partition_tree, ModelArtifact, TrainParams,
    TreeParams,
};

use crate::split::split_holdout;
use crate::synth::{cohort_schema, generate_cohort, SynthParams};
use crate::{
    CliError, EncodeArgs, EvaluateArgs, Outcome, PredictArgs, ReportArgs, SynthArgs, TrainArgs,
};

fn data_err<E: std::fmt::Display>(context: &Path) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", context.display()))
}

fn load_schema(path: &Path) -> Result<EncodingSchema, CliError> {
    let text = fs::read_to_string(path).map_err(data_err(path))?;
    EncodingSchema::from_json(&text).map_err(data_err(path))
}

fn load_records(path: &Path) -> Result<Vec<ClinicalRecord>, CliError> {
    let file = File::open(path).map_err(data_err(path))?;
    records_from_csv(file).map_err(data_err(path))
}

fn write_output(path: &Path, content: &str) -> Result<(), CliError> {
    fs::write(path, content).map_err(data_err(path))
}

fn wants_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn dataset_to_csv(dataset: &LabeledDataset, schema: &EncodingSchema) -> String {
    let mut out = String::new();
    for feature in schema.features() {
        out.push_str(&feature.name);
        out.push(',');
    }
    out.push_str(&schema.label_rule().label_column);
    out.push('\n');
    for (vector, label) in dataset.vectors().iter().zip(dataset.labels()) {
        for component in vector.components() {
            out.push_str(&format!("{component}"));
            out.push(',');
        }
        out.push_str(&label.to_string());
        out.push('\n');
    }
    out
}

pub fn encode(args: &EncodeArgs) -> Result<Outcome, CliError> {
    let schema = load_schema(&args.schema)?;
    let records = load_records(&args.data)?;
    let mut dataset = encode_dataset(&records, &schema).map_err(data_err(&args.data))?;
    if args.standardize {
        dataset = standardize(&dataset).map_err(data_err(&args.data))?;
    }
    let rendered = match &args.out {
        Some(path) if wants_json(path) => {
            let mut text =
                serde_json::to_string_pretty(&dataset).expect("dataset serializes");
            text.push('\n');
            text
        }
        _ => dataset_to_csv(&dataset, &schema),
    };
    match &args.out {
        Some(path) => write_output(path, &rendered)?,
        None => print!("{rendered}"),
    }
    Ok(Outcome::Success)
}

fn validate_train_args(args: &TrainArgs) -> Result<(), CliError> {
    if !(args.c > 0.0 && args.c.is_finite()) {
        return Err(CliError::Usage(format!("--C must be positive, got {}", args.c)));
    }
    if !(args.tol > 0.0 && args.tol.is_finite()) {
        return Err(CliError::Usage(format!("--tol must be positive, got {}", args.tol)));
    }
    if args.max_passes < 1 {
        return Err(CliError::Usage("--max-passes must be at least 1".into()));
    }
    validate_holdout(args.holdout)?;
    if args.tree {
        if args.max_depth < 1 {
            return Err(CliError::Usage("--max-depth must be at least 1".into()));
        }
        if args.min_leaf < 1 {
            return Err(CliError::Usage("--min-leaf must be at least 1".into()));
        }
    }
    Ok(())
}

fn validate_holdout(fraction: f64) -> Result<(), CliError> {
    if !(0.0..=0.9).contains(&fraction) {
        return Err(CliError::Usage(format!(
            "--holdout must lie in [0, 0.9], got {fraction}"
        )));
    }
    Ok(())
}

fn default_eval_path(model: &Path) -> PathBuf {
    model.with_extension("eval.json")
}

pub fn train(args: &TrainArgs) -> Result<Outcome, CliError> {
    validate_train_args(args)?;
    let schema = load_schema(&args.schema)?;
    let records = load_records(&args.data)?;
    let full = encode_dataset(&records, &schema).map_err(data_err(&args.data))?;

    let (mut training, evaluation_set, holdout) = if args.holdout > 0.0 {
        let (train_set, test_set) =
            split_holdout(&full, args.holdout, args.seed).map_err(CliError::Data)?;
        (train_set, test_set, true)
    } else {
        (full.clone(), full, false)
    };
    if args.standardize {
        training = standardize(&training).map_err(data_err(&args.data))?;
    }

    let params = TrainParams {
        c: args.c,
        tol: args.tol,
        max_passes: args.max_passes,
    };
    let artifact = if args.tree {
        let tree = train_partition_tree(
            &training,
            &TreeParams {
                svm: params,
                max_depth: args.max_depth,
                min_leaf_size: args.min_leaf,
            },
        )
        .map_err(|e| CliError::Data(e.to_string()))?;
        ModelArtifact::Tree(tree)
    } else {
        let model =
            train_svm(&training, &params).map_err(|e| CliError::Data(e.to_string()))?;
        ModelArtifact::Linear(model)
    };

    // Evaluation always runs on raw vectors; a standardized model applies its
    // stored transform internally.
    let matrix =
        confusion(&artifact, &evaluation_set).map_err(|e| CliError::Data(e.to_string()))?;
    let summary = summarize(&matrix).map_err(|e| CliError::Data(e.to_string()))?;
    let document = if holdout {
        EvaluationDocument::holdout(summary, args.holdout, args.seed)
    } else {
        EvaluationDocument::resubstitution(summary)
    };

    save_model(&artifact, &args.model).map_err(data_err(&args.model))?;
    let eval_path = args
        .out
        .clone()
        .unwrap_or_else(|| default_eval_path(&args.model));
    write_output(&eval_path, &document.to_json())?;
    print!("{}", document.render_table());

    if artifact.converged() {
        Ok(Outcome::Success)
    } else {
        Ok(Outcome::SolverDidNotConverge)
    }
}

pub fn evaluate(args: &EvaluateArgs) -> Result<Outcome, CliError> {
    validate_holdout(args.holdout)?;
    let artifact = load_model(&args.model).map_err(data_err(&args.model))?;
    let schema = load_schema(&args.schema)?;
    let records = load_records(&args.data)?;
    let full = encode_dataset(&records, &schema).map_err(data_err(&args.data))?;
    let (evaluation_set, document_for) = if args.holdout > 0.0 {
        let (_, test_set) =
            split_holdout(&full, args.holdout, args.seed).map_err(CliError::Data)?;
        (test_set, true)
    } else {
        (full, false)
    };
    let matrix =
        confusion(&artifact, &evaluation_set).map_err(|e| CliError::Data(e.to_string()))?;
    let summary = summarize(&matrix).map_err(|e| CliError::Data(e.to_string()))?;
    let document = if document_for {
        EvaluationDocument::holdout(summary, args.holdout, args.seed)
    } else {
        EvaluationDocument::resubstitution(summary)
    };
    if let Some(path) = &args.out {
        let rendered = if wants_json(path) {
            document.to_json()
        } else {
            document.render_table()
        };
        write_output(path, &rendered)?;
    }
    print!("{}", document.render_table());
    Ok(Outcome::Success)
}

fn parse_vector_literal(text: &str) -> Result<FeatureVector, CliError> {
    let trimmed = text
        .trim()
        .trim_start_matches(['(', '['])
        .trim_end_matches([')', ']']);
    let components = trimmed
        .split(',')
        .map(|cell| cell.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| CliError::Usage(format!("--vector {text:?} is not a numeric vector")))?;
    if components.is_empty() {
        return Err(CliError::Usage("--vector is empty".into()));
    }
    FeatureVector::new(components).map_err(|e| CliError::Usage(e.to_string()))
}

pub fn predict(args: &PredictArgs) -> Result<Outcome, CliError> {
    let inputs = match (&args.vector, &args.data) {
        (Some(literal), None) => {
            parse_vector_literal(literal).map(|v| vec![v])
        }
        (None, Some(data)) => {
            let schema_path = args.schema.as_ref().ok_or_else(|| {
                CliError::Usage("--data requires --schema to encode the records".into())
            })?;
            let schema = load_schema(schema_path)?;
            let records = load_records(data)?;
            records
                .iter()
                .enumerate()
                .map(|(i, record)| {
                    encode_record(record, &schema)
                        .map_err(|e| CliError::Data(format!("record {i}: {e}")))
                })
                .collect()
        }
        _ => Err(CliError::Usage(
            "pass exactly one of --vector or --data".into(),
        )),
    }?;

    let artifact = load_model(&args.model).map_err(data_err(&args.model))?;
    let mut calls: Vec<(Label, f64)> = Vec::with_capacity(inputs.len());
    for (i, x) in inputs.iter().enumerate() {
        let pair = artifact
            .classify(x)
            .map_err(|e| CliError::Data(format!("input {i}: {e}")))?;
        calls.push(pair);
    }

    match &args.out {
        Some(path) if wants_json(path) => {
            let rows: Vec<serde_json::Value> = calls
                .iter()
                .map(|(label, decision)| {
                    serde_json::json!({
                        "prediction": i8::from(*label),
                        "decision_value": decision,
                    })
                })
                .collect();
            let mut text = serde_json::to_string_pretty(&rows).expect("rows serialize");
            text.push('\n');
            write_output(path, &text)?;
        }
        Some(path) => {
            let mut text = String::from("prediction,decision_value\n");
            for (label, decision) in &calls {
                text.push_str(&format!("{label},{decision}\n"));
            }
            write_output(path, &text)?;
        }
        None => {
            for (label, _) in &calls {
                println!("{label}");
            }
        }
    }
    Ok(Outcome::Success)
}

pub fn report(args: &ReportArgs) -> Result<Outcome, CliError> {
    let registry = ModelRegistry::load(&args.registry).map_err(data_err(&args.registry))?;
    let records = load_records(&args.data)?;
    if records.len() != 1 {
        return Err(CliError::Data(format!(
            "{}: expected exactly one record row, found {}",
            args.data.display(),
            records.len()
        )));
    }
    let report = diagnose(&registry, &records[0]).map_err(|e| CliError::Data(e.to_string()))?;
    if let Some(path) = &args.out {
        let rendered = if wants_json(path) {
            report.to_json()
        } else {
            report.render_table()
        };
        write_output(path, &rendered)?;
    }
    print!("{}", report.render_table());
    Ok(Outcome::Success)
}

pub fn synth(args: &SynthArgs) -> Result<Outcome, CliError> {
    let params = SynthParams {
        n_per_class: args.n_per_class,
        dims: args.dims,
        separation: args.separation,
        overlap: args.overlap,
        seed: args.seed,
    };
    params.validate().map_err(CliError::Usage)?;
    write_output(&args.out, &generate_cohort(&params))?;
    if let Some(schema_path) = &args.schema {
        write_output(schema_path, &cohort_schema(args.dims).to_json())?;
    }
    Ok(Outcome::Success)
}
