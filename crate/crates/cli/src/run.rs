//! One training session: fit, checkpoint, per-split reports.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use mctn::data::{MultimodalDataset, Split};
use mctn::metrics::{export_embeddings_2d, write_embeddings_csv, EmbeddingPoint, MetricsReport};
use mctn::models::{ModelBundle, VariantSpec};
use mctn::train::{evaluate, fit, write_epochs_jsonl, Evaluation, FitOutcome};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const EPOCHS_FILE: &str = "epochs.jsonl";
pub const REPORT_FILE: &str = "report.json";
pub const EMBEDDINGS_FILE: &str = "embeddings.csv";
pub const PREDICTIONS_FILE: &str = "predictions.jsonl";
pub const EVAL_BATCH: usize = 64;

/// Metrics of one split plus free-running translation losses (`null` when
/// no target modality was available).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub report: MetricsReport,
    pub diagnostics: Option<BTreeMap<String, f64>>,
}

impl From<&Evaluation> for SplitReport {
    fn from(ev: &Evaluation) -> Self {
        SplitReport { report: ev.report.clone(), diagnostics: ev.diagnostics.clone() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainReport {
    pub variant: String,
    pub direction: String,
    pub params: usize,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_l_p: f64,
    pub stopped_early: bool,
    pub splits: BTreeMap<String, SplitReport>,
}

pub struct RunResult {
    pub bundle: ModelBundle,
    pub outcome: FitOutcome,
    pub report: TrainReport,
    pub test: Evaluation,
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn embeddings(ev: &Evaluation) -> Result<Vec<EmbeddingPoint>> {
    let reps: Vec<(String, Vec<Vec<f64>>)> =
        ev.predictions.iter().zip(&ev.representations).map(|(p, r)| (p.id.clone(), r.rows())).collect();
    let labels: Vec<f64> = ev.predictions.iter().map(|p| p.label).collect();
    Ok(export_embeddings_2d(&reps, &labels)?)
}

pub fn write_embeddings(path: &Path, ev: &Evaluation) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    write_embeddings_csv(&embeddings(ev)?, file)?;
    Ok(())
}

pub fn write_predictions(path: &Path, ev: &Evaluation) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for p in &ev.predictions {
        serde_json::to_writer(&mut out, p)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Trains `spec` on `ds` and evaluates every split. With `out` set, writes
/// the epoch log, checkpoint pair and report there.
pub fn train_variant(
    spec: &VariantSpec,
    ds: &MultimodalDataset,
    cfg: &RunConfig,
    out: Option<&Path>,
) -> Result<RunResult> {
    let mut bundle = ModelBundle::build(spec, &ds.dims(), ds.task, ds.num_classes(), &cfg.model_config())?;
    let outcome = fit(&mut bundle, ds, &cfg.train_config())?;
    let mut splits = BTreeMap::new();
    let mut test = None;
    for split in [Split::Train, Split::Valid, Split::Test] {
        let ev = evaluate(&bundle, ds, split, EVAL_BATCH)?;
        splits.insert(split.to_string(), SplitReport::from(&ev));
        if split == Split::Test {
            test = Some(ev);
        }
    }
    let report = TrainReport {
        variant: spec.id.to_string(),
        direction: spec.direction_label(),
        params: bundle.num_params(),
        epochs_run: outcome.epochs.len(),
        best_epoch: outcome.best_epoch,
        best_val_l_p: outcome.best_val_l_p,
        stopped_early: outcome.stopped_early,
        splits,
    };
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        let mut log = BufWriter::new(File::create(dir.join(EPOCHS_FILE))?);
        write_epochs_jsonl(&outcome.epochs, &mut log)?;
        log.flush()?;
        bundle.save(dir)?;
        write_json(&dir.join(REPORT_FILE), &report)?;
    }
    Ok(RunResult { bundle, outcome, report, test: test.expect("test split evaluated") })
}
