//! Run configuration: a flat JSON file whose keys can be overridden on the
//! command line.
//!
//! ```json
//! {
//!   "dataset": "data/synth",
//!   "out_dir": "runs/a",
//!   "variant": "a",
//!   "source": "language",
//!   "target1": "visual",
//!   "epochs": 30,
//!   "learning_rate": 0.001,
//!   "lambda_c": 0.5
//! }
//! ```
//!
//! Keys: `dataset`, `out_dir`, `variant`, `source`, `target1`, `target2`,
//! `concat_form`, `epochs`, `batch_size`, `learning_rate`, `optimizer`,
//! `seed`, `patience`, `teacher_forcing`, `max_grad_norm`, `lambda_t`,
//! `lambda_c`, `lambda_t1`, `lambda_c1`, `lambda_t2`, `model_dim`,
//! `hidden_dim`, `head_hidden`. Unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use mctn::data::MultimodalDataset;
use mctn::models::{ConcatForm, ModelConfig, Roles, VariantId, VariantSpec};
use mctn::train::{LossWeights, TrainConfig};
use mctn_autodiff::OptimizerKind;
use serde::{Deserialize, Serialize};

pub const ECHO_FILE: &str = "config.echo.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub variant: Option<VariantId>,
    pub source: Option<String>,
    pub target1: Option<String>,
    pub target2: Option<String>,
    pub concat_form: Option<ConcatForm>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub patience: usize,
    pub teacher_forcing: bool,
    pub max_grad_norm: Option<f64>,
    pub lambda_t: f64,
    pub lambda_c: f64,
    pub lambda_t1: f64,
    pub lambda_c1: f64,
    pub lambda_t2: f64,
    pub model_dim: usize,
    pub hidden_dim: usize,
    pub head_hidden: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        let m = ModelConfig::default();
        RunConfig {
            dataset: None,
            out_dir: None,
            variant: None,
            source: None,
            target1: None,
            target2: None,
            concat_form: None,
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            optimizer: t.optimizer,
            seed: t.seed,
            patience: t.patience,
            teacher_forcing: t.teacher_forcing,
            max_grad_norm: t.max_grad_norm,
            lambda_t: t.weights.lambda_t,
            lambda_c: t.weights.lambda_c,
            lambda_t1: t.weights.lambda_t1,
            lambda_c1: t.weights.lambda_c1,
            lambda_t2: t.weights.lambda_t2,
            model_dim: m.model_dim,
            hidden_dim: m.hidden_dim,
            head_hidden: m.head_hidden,
        }
    }
}

/// Command-line overrides shared by `train` and `ablate`.
#[derive(Args, Clone, Debug, Default)]
pub struct Overrides {
    /// JSON config file; flags below take precedence over its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// sgd or adam.
    #[arg(long)]
    pub optimizer: Option<OptimizerKind>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Epochs without validation improvement before stopping (0 disables).
    #[arg(long)]
    pub patience: Option<usize>,
    /// Feed generated frames instead of ground truth to forward decoders.
    #[arg(long)]
    pub no_teacher_forcing: bool,
    #[arg(long)]
    pub max_grad_norm: Option<f64>,
    #[arg(long)]
    pub lambda_t: Option<f64>,
    #[arg(long)]
    pub lambda_c: Option<f64>,
    #[arg(long)]
    pub lambda_t1: Option<f64>,
    #[arg(long)]
    pub lambda_c1: Option<f64>,
    #[arg(long)]
    pub lambda_t2: Option<f64>,
    #[arg(long)]
    pub model_dim: Option<usize>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub head_hidden: Option<usize>,
}

/// Variant and role flags of `train`.
#[derive(Args, Clone, Debug, Default)]
pub struct RoleArgs {
    /// Variant id, a through i.
    #[arg(long)]
    pub variant: Option<VariantId>,
    #[arg(long)]
    pub source: Option<String>,
    #[arg(long)]
    pub target1: Option<String>,
    #[arg(long)]
    pub target2: Option<String>,
    /// Layout of variant h: pair_to_target, source_to_pair or pair_to_pair.
    #[arg(long)]
    pub concat_form: Option<ConcatForm>,
}

macro_rules! set {
    ($cfg:ident, $src:ident; $($field:ident),*) => {
        $(if let Some(v) = $src.$field.clone() { $cfg.$field = v.into(); })*
    };
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// File values (if a file is given) overlaid with flags.
    pub fn resolve(o: &Overrides, roles: Option<&RoleArgs>) -> Result<Self> {
        let mut c = match &o.config {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        set!(c, o; dataset, epochs, batch_size, learning_rate, optimizer, seed, patience);
        set!(c, o; lambda_t, lambda_c, lambda_t1, lambda_c1, lambda_t2, model_dim, hidden_dim, head_hidden);
        if let Some(out) = &o.out {
            c.out_dir = Some(out.clone());
        }
        if let Some(n) = o.max_grad_norm {
            c.max_grad_norm = Some(n);
        }
        if o.no_teacher_forcing {
            c.teacher_forcing = false;
        }
        if let Some(r) = roles {
            if let Some(v) = r.variant {
                c.variant = Some(v);
            }
            set!(c, r; source, target1, target2);
            if let Some(f) = r.concat_form {
                c.concat_form = Some(f);
            }
        }
        c.train_config().validate()?;
        Ok(c)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            optimizer: self.optimizer,
            seed: self.seed,
            patience: self.patience,
            teacher_forcing: self.teacher_forcing,
            weights: LossWeights {
                lambda_t: self.lambda_t,
                lambda_c: self.lambda_c,
                lambda_t1: self.lambda_t1,
                lambda_c1: self.lambda_c1,
                lambda_t2: self.lambda_t2,
            },
            max_grad_norm: self.max_grad_norm,
        }
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            model_dim: self.model_dim,
            hidden_dim: self.hidden_dim,
            head_hidden: self.head_hidden,
            seed: self.seed,
        }
    }

    pub fn dataset(&self) -> Result<&Path> {
        match &self.dataset {
            Some(p) => Ok(p),
            None => bail!("no dataset given (use --dataset or the \"dataset\" config key)"),
        }
    }

    pub fn out_dir(&self) -> Result<&Path> {
        match &self.out_dir {
            Some(p) => Ok(p),
            None => bail!("no output directory given (use --out or the \"out_dir\" config key)"),
        }
    }

    /// Variant spec from the configured id and roles, checked against the dataset.
    pub fn variant_spec(&self, ds: &MultimodalDataset) -> Result<VariantSpec> {
        let Some(id) = self.variant else { bail!("no variant given (use --variant a..i)") };
        let (Some(source), Some(target1)) = (&self.source, &self.target1) else {
            bail!("variant {id} needs --source and --target1");
        };
        let roles = Roles { source: source.clone(), target1: target1.clone(), target2: self.target2.clone() };
        let mut spec = VariantSpec::new(id, roles)?;
        if let Some(form) = self.concat_form {
            spec = spec.with_concat_form(form)?;
        }
        for name in spec.roles.names() {
            if ds.dim(name).is_none() {
                bail!("modality '{name}' is not in the dataset (has {:?})", ds.modality_names());
            }
        }
        Ok(spec)
    }

    pub fn echo(&self, dir: &Path) -> Result<()> {
        fs::write(dir.join(ECHO_FILE), serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}
