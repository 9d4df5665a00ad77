use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use mctn::data::{load_dataset_with, read_modalities, LoadOptions, MultimodalDataset, Split};
use mctn::models::ModelBundle;
use mctn::train::{evaluate, Evaluation};
use serde::Serialize;

use super::train::summary;
use crate::run::{write_embeddings, write_json, write_predictions, SplitReport, EMBEDDINGS_FILE, PREDICTIONS_FILE, REPORT_FILE};

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Checkpoint manifest written by `train`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// train, valid or test.
    #[arg(long, default_value = "test")]
    pub split: Split,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = crate::run::EVAL_BATCH)]
    pub batch_size: usize,
    #[arg(long)]
    pub export_embeddings: bool,
}

#[derive(Serialize)]
struct EvalReport {
    split: Split,
    #[serde(flatten)]
    result: SplitReport,
}

/// Loads the source modalities, plus the target modalities when their files
/// are all present and dims match. Predictions only ever read the source.
fn load(bundle: &ModelBundle, args: &EvalArgs) -> Result<MultimodalDataset> {
    let (_, infos) = read_modalities(&args.dataset)?;
    let dims = infos.iter().map(|m| (m.name.clone(), m.dim)).collect();
    let source = bundle.inference_modalities();
    bundle.check_dims(&dims, &source)?;
    let mut all: Vec<String> = Vec::new();
    for key in bundle.train_keys() {
        for m in mctn::data::split_key(&key) {
            if !all.iter().any(|x| x == m) {
                all.push(m.to_string());
            }
        }
    }
    if all.len() > source.len() && bundle.check_dims(&dims, &all).is_ok() {
        if let Ok(ds) = load_dataset_with(&args.dataset, &LoadOptions { modalities: Some(all) }) {
            return Ok(ds);
        }
    }
    Ok(load_dataset_with(&args.dataset, &LoadOptions { modalities: Some(source) })?)
}

pub fn evaluate_checkpoint(args: &EvalArgs) -> Result<Evaluation> {
    let bundle = ModelBundle::load(&args.checkpoint)
        .with_context(|| format!("loading checkpoint {}", args.checkpoint.display()))?;
    let ds = load(&bundle, args)?;
    Ok(evaluate(&bundle, &ds, args.split, args.batch_size)?)
}

pub fn run(args: &EvalArgs) -> Result<()> {
    let ev = evaluate_checkpoint(args)?;
    fs::create_dir_all(&args.out)?;
    write_json(&args.out.join(REPORT_FILE), &EvalReport { split: args.split, result: SplitReport::from(&ev) })?;
    write_predictions(&args.out.join(PREDICTIONS_FILE), &ev)?;
    if args.export_embeddings {
        write_embeddings(&args.out.join(EMBEDDINGS_FILE), &ev)?;
    }
    println!("{:<5} {}", args.split, summary(&ev.report));
    match &ev.diagnostics {
        Some(d) => {
            for (name, v) in d {
                println!("  {name} {v:.6}");
            }
        }
        None => println!("  translation diagnostics unavailable: target modalities not loaded"),
    }
    Ok(())
}
