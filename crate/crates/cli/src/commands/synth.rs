use std::fs;
use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use mctn::data::{save_dataset, synth_generate, SynthSpec};

use crate::run::write_json;

pub const SPEC_FILE: &str = "synth.json";

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub n: usize,
    /// Sequence length.
    #[arg(long = "L", alias = "len")]
    pub len: usize,
    /// Per-modality feature dims, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub dims: Vec<usize>,
    /// Modality names; language, visual, acoustic, m3, ... by default.
    #[arg(long, value_delimiter = ',')]
    pub names: Option<Vec<String>>,
    #[arg(long, default_value_t = 0.5)]
    pub noise: f64,
    #[arg(long, default_value_t = 4)]
    pub latent_dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        names: args.names.clone(),
        latent_dim: args.latent_dim,
        ..SynthSpec::new(args.n, args.len, args.dims.clone(), args.noise, args.seed)
    };
    let out = synth_generate(&spec)?;
    fs::create_dir_all(&args.out)?;
    let manifest = save_dataset(&out.dataset, &args.out)?;
    write_json(&args.out.join(SPEC_FILE), &spec)?;
    println!("wrote {} ({} samples)", manifest.display(), out.dataset.len());
    for (name, r) in &out.readout_corr {
        println!("  {name}: linear readout corr {r:.3}");
    }
    Ok(())
}
