//! `flowforge classify`: offline classification of CSV flow records.

use std::path::PathBuf;

use anyhow::anyhow;
use flowforge_core::export::{read_records_csv, render_csv};
use flowforge_core::metrics::{evaluate, ClassMetrics};

use crate::config::Settings;
use crate::CliError;

use super::{load_model_file, read_named, write_out, Overrides};

#[derive(Debug, clap::Args)]
pub struct ClassifyArgs {
    /// dtm-1 model to apply.
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// Flow records CSV; a `label` column, when present, is treated as
    /// ground truth and scored against.
    #[arg(long, value_name = "FILE")]
    pub records: PathBuf,
    /// Write the predictions CSV here; metrics then go to stdout instead
    /// of stderr.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

fn class_json(m: &ClassMetrics) -> serde_json::Value {
    serde_json::json!({
        "precision": m.precision,
        "recall": m.recall,
        "f1": m.f1,
        "support": m.support,
    })
}

pub fn run(args: &ClassifyArgs, mut settings: Settings) -> Result<(), CliError> {
    args.overrides.apply(&mut settings)?;
    let model = load_model_file(&args.model)?;
    let text = read_named("--records", &args.records)?;
    let flows = read_records_csv(&text)
        .map_err(|e| anyhow!("--records {}: {e}", args.records.display()))?;
    if !flows.mask.is_superset_of(model.feature_mask()) {
        let missing = model
            .feature_mask()
            .iter()
            .find(|f| !flows.mask.contains(*f))
            .expect("not a superset");
        return Err(CliError::Runtime(anyhow!(
            "--records {}: the model reads {} but the CSV has no such column",
            args.records.display(),
            missing.name()
        )));
    }

    let mut records = flows.records;
    let mut predicted = Vec::with_capacity(records.len());
    for rec in &mut records {
        predicted.push(model.classify(rec).label);
    }

    // The label column of the output carries the predictions.
    let rendered = render_csv(&records, flows.mask, true);
    write_out(args.out.as_deref(), &rendered)?;

    if let Some(truth) = &flows.labels {
        let eval = evaluate(truth.iter().copied().zip(predicted.iter().copied()));
        let metrics = serde_json::json!({
            "class0": class_json(&eval.class0),
            "class1": class_json(&eval.class1),
            "accuracy": eval.accuracy,
            "total": eval.total,
        });
        if args.out.is_some() {
            println!("{metrics}");
        } else {
            eprintln!("{metrics}");
        }
    }
    Ok(())
}
