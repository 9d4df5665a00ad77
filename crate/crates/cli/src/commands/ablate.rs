use std::fs;
use std::path::Path;

use anyhow::{bail, Result};
use clap::Args;
use mctn::data::{load_dataset, MultimodalDataset};
use mctn::metrics::{ablation_table, TableRow};
use mctn::models::{Roles, VariantId, VariantSpec};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Overrides, RunConfig};
use crate::run::{train_variant, write_json};

pub const TABLE_FILE: &str = "table.txt";
pub const SUMMARY_FILE: &str = "ablation.json";

#[derive(Args, Debug)]
pub struct AblateArgs {
    #[command(flatten)]
    pub overrides: Overrides,
    /// Concurrent runs. Each run is single-threaded and independent.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Restrict to these variant ids (comma separated); all by default.
    #[arg(long, value_delimiter = ',')]
    pub variants: Option<Vec<VariantId>>,
}

/// Every variant/role combination applicable to the dataset, bimodal first,
/// plus the reasons variant families were skipped.
pub fn enumerate(ds: &MultimodalDataset, only: Option<&[VariantId]>) -> Result<(Vec<VariantSpec>, Vec<String>)> {
    let names = ds.modality_names();
    if names.len() < 2 {
        bail!("ablation needs at least 2 modalities, dataset has {}", names.len());
    }
    let wanted = |id: VariantId| only.is_none_or(|o| o.contains(&id));
    let mut specs = Vec::new();
    let mut skipped = Vec::new();
    for id in VariantId::ALL.into_iter().filter(|id| wanted(*id)) {
        if id.is_trimodal() && names.len() < 3 {
            skipped.push(format!("variant {id} skipped: needs 3 modalities, dataset has {}", names.len()));
            continue;
        }
        for s in &names {
            for t1 in names.iter().filter(|t| *t != s) {
                if !id.is_trimodal() {
                    specs.push(VariantSpec::new(id, Roles::bimodal(s, t1))?);
                    continue;
                }
                for t2 in names.iter().filter(|t| *t != s && *t != t1) {
                    specs.push(VariantSpec::new(id, Roles::trimodal(s, t1, t2))?);
                }
            }
        }
    }
    Ok((specs, skipped))
}

pub fn run_dir(spec: &VariantSpec) -> String {
    format!("{}_{}", spec.id, spec.roles.names().join("_"))
}

#[derive(Serialize)]
struct Summary<'a> {
    rows: &'a [TableRow],
    skipped: &'a [String],
}

/// Bimodal and trimodal sections of the ablation table.
pub fn render(rows: &[TableRow], skipped: &[String]) -> String {
    let mut text = String::new();
    let (bi, tri): (Vec<TableRow>, Vec<TableRow>) = rows.iter().cloned().partition(|r| {
        r.variant.parse::<VariantId>().is_ok_and(|v| !v.is_trimodal())
    });
    for (title, part) in [("Bimodal", bi), ("Trimodal", tri)] {
        if !part.is_empty() {
            text += &format!("{title}\n{}\n", ablation_table(&part));
        }
    }
    for s in skipped {
        text += &format!("{s}\n");
    }
    text
}

pub fn ablate(ds: &MultimodalDataset, cfg: &RunConfig, out: &Path, jobs: usize, only: Option<&[VariantId]>) -> Result<Vec<TableRow>> {
    let (specs, skipped) = enumerate(ds, only)?;
    fs::create_dir_all(out)?;
    cfg.echo(out)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    let rows: Vec<TableRow> = pool.install(|| {
        specs
            .par_iter()
            .map(|spec| {
                let dir = out.join("runs").join(run_dir(spec));
                let result = train_variant(spec, ds, cfg, Some(&dir));
                let (report, error) = match result {
                    Ok(r) => (Some(r.report.splits["test"].report.clone()), None),
                    Err(e) => (None, Some(format!("{e:#}"))),
                };
                TableRow { variant: spec.id.to_string(), direction: spec.direction_label(), report, error }
            })
            .collect()
    });
    fs::write(out.join(TABLE_FILE), render(&rows, &skipped))?;
    write_json(&out.join(SUMMARY_FILE), &Summary { rows: &rows, skipped: &skipped })?;
    Ok(rows)
}

pub fn run(args: &AblateArgs) -> Result<()> {
    let cfg = RunConfig::resolve(&args.overrides, None)?;
    let out = cfg.out_dir()?.to_path_buf();
    let ds = load_dataset(cfg.dataset()?)?;
    let rows = ablate(&ds, &cfg, &out, args.jobs, args.variants.as_deref())?;
    print!("{}", fs::read_to_string(out.join(TABLE_FILE))?);
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        bail!("{failed} of {} runs failed", rows.len());
    }
    Ok(())
}
