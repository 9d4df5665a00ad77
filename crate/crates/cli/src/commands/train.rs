use std::fs;

use anyhow::Result;
use clap::Args;
use mctn::data::load_dataset;

use crate::config::{Overrides, RoleArgs, RunConfig};
use crate::run::{train_variant, write_embeddings, EMBEDDINGS_FILE};

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(flatten)]
    pub roles: RoleArgs,
    /// Also write a 2-D projection of the test-split representations.
    #[arg(long)]
    pub export_embeddings: bool,
}

pub fn run(args: &TrainArgs) -> Result<()> {
    let cfg = RunConfig::resolve(&args.overrides, Some(&args.roles))?;
    let out = cfg.out_dir()?.to_path_buf();
    let ds = load_dataset(cfg.dataset()?)?;
    let spec = cfg.variant_spec(&ds)?;
    fs::create_dir_all(&out)?;
    cfg.echo(&out)?;
    let r = train_variant(&spec, &ds, &cfg, Some(&out))?;
    if args.export_embeddings {
        write_embeddings(&out.join(EMBEDDINGS_FILE), &r.test)?;
    }
    println!(
        "variant {} {}: {} params, {} epochs (best {}, val L_p {:.6})",
        spec.id,
        spec.direction_label(),
        r.report.params,
        r.report.epochs_run,
        r.report.best_epoch,
        r.report.best_val_l_p
    );
    for (split, s) in &r.report.splits {
        println!("  {split:<5} {}", summary(&s.report));
    }
    println!("wrote {}", out.display());
    Ok(())
}

pub fn summary(r: &mctn::metrics::MetricsReport) -> String {
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
    format!("n={} acc={:.4} f1={} mae={} corr={}", r.n, r.acc, opt(r.f1), opt(r.mae), opt(r.corr))
}
