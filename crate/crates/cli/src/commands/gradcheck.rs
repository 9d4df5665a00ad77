use anyhow::{bail, Result};
use clap::Args;
use mctn::data::{synth_generate, Batch, Split, SynthSpec};
use mctn::models::{ModelBundle, ModelConfig, Roles, VariantId, VariantSpec};
use mctn::train::{batch_objective, LossWeights};
use mctn_autodiff::{grad_check_report, grad_check_store, Tape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const EPS: f64 = 1e-4;
pub const THRESHOLD: f64 = 1e-4;

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Model, hidden and head width of the variant graphs.
    #[arg(long, default_value_t = 3)]
    pub dim: usize,
    /// Padded sequence length of the variant graphs.
    #[arg(long = "L", default_value_t = 4)]
    pub len: usize,
}

#[derive(Clone, Debug)]
pub struct Component {
    pub name: String,
    pub params: usize,
    pub max_rel_error: f64,
}

type Build = fn(&mut Tape, &[Var]) -> mctn_autodiff::Result<Var>;

fn cross_entropy(t: &mut Tape, p: &[Var]) -> mctn_autodiff::Result<Var> {
    let probs = t.softmax(p[0])?;
    let mut onehot = Tensor::zeros(&[3, 4]);
    for (r, c) in [(0, 1), (1, 3), (2, 0)] {
        onehot.data_mut()[r * 4 + c] = 1.0;
    }
    let target = t.constant(onehot);
    t.cross_entropy(probs, target)
}

const PRIMITIVES: &[(&str, &[&[usize]], Build)] = &[
    ("matmul", &[&[3, 4], &[4, 2]], |t, p| t.matmul(p[0], p[1])),
    ("add", &[&[2, 3], &[2, 3]], |t, p| t.add(p[0], p[1])),
    ("sub", &[&[2, 3], &[2, 3]], |t, p| t.sub(p[0], p[1])),
    ("mul", &[&[2, 3], &[2, 3]], |t, p| t.mul(p[0], p[1])),
    ("add_bias", &[&[3, 2], &[1, 2]], |t, p| t.add_bias(p[0], p[1])),
    ("scale", &[&[4]], |t, p| t.scale(p[0], -2.5)),
    ("affine", &[&[4]], |t, p| t.affine(p[0], 0.5, 3.0)),
    ("tanh", &[&[2, 3]], |t, p| t.tanh(p[0])),
    ("sigmoid", &[&[2, 3]], |t, p| t.sigmoid(p[0])),
    ("softmax", &[&[2, 4]], |t, p| t.softmax(p[0])),
    ("concat", &[&[2, 1], &[2, 3]], |t, p| t.concat(&[p[0], p[1]], 1)),
    ("slice", &[&[3, 4]], |t, p| t.slice(p[0], 1, 1, 2)),
    ("repeat_cols", &[&[3, 1]], |t, p| t.repeat_cols(p[0], 4)),
    ("sum", &[&[2, 2]], |t, p| t.sum(p[0])),
    ("mse", &[&[2, 3], &[2, 3]], |t, p| t.mse(p[0], p[1])),
    ("mae", &[&[2, 3], &[2, 3]], |t, p| t.mae(p[0], p[1])),
    ("cross_entropy", &[&[3, 4]], cross_entropy),
];

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.5..1.5)).collect()).expect("shape")
}

/// Worst relative error of each primitive over a few random points. Non-scalar
/// outputs are reduced with fixed random weights.
pub fn primitives(seed: u64) -> Result<Vec<Component>> {
    let mut out = Vec::new();
    for &(name, shapes, build) in PRIMITIVES {
        let mut worst = 0.0f64;
        for k in 0..3 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(31).wrapping_add(k));
            let params: Vec<Tensor> = shapes.iter().map(|s| random(&mut rng, s)).collect();
            let report = grad_check_report(
                |t, p| {
                    let y = build(t, p)?;
                    if t.value(y).is_scalar() {
                        return Ok(y);
                    }
                    let mut wr = ChaCha8Rng::seed_from_u64(k ^ 0x5eed);
                    let w = t.constant(random(&mut wr, t.shape(y)));
                    let prod = t.mul(y, w)?;
                    t.sum(prod)
                },
                &params,
                EPS,
            )?;
            worst = worst.max(report.max_rel_error);
        }
        let params = shapes.iter().map(|s| s.iter().product::<usize>()).sum();
        out.push(Component { name: name.to_string(), params, max_rel_error: worst });
    }
    Ok(out)
}

/// Full coupled objective of a variant on a padded mini-batch.
pub fn variant_graph(id: VariantId, seed: u64, dim: usize, len: usize) -> Result<Component> {
    let dims = if id.is_trimodal() { vec![3, 2, 2] } else { vec![3, 2] };
    let mut ds = synth_generate(&SynthSpec::new(12, len, dims, 0.3, seed))?.dataset;
    // Shorten one sample so the batch carries padding.
    if len > 1 {
        let s = ds.samples.iter_mut().find(|s| s.split == Split::Train).expect("train sample");
        for seq in s.features.values_mut() {
            *seq = mctn::data::zero_pad(&seq.frames()[..len - 1], len)?;
        }
    }
    let roles = if id.is_trimodal() {
        Roles::trimodal("language", "visual", "acoustic")
    } else {
        Roles::bimodal("language", "visual")
    };
    let spec = VariantSpec::new(id, roles)?;
    let cfg = ModelConfig { model_dim: dim, hidden_dim: dim, head_hidden: dim, seed };
    let b = ModelBundle::build(&spec, &ds.dims(), ds.task, ds.num_classes(), &cfg)?;
    let train = ds.split(Split::Train);
    let batch = Batch::from_samples(&train[..3.min(train.len())], &b.train_keys())?;
    let w = LossWeights { lambda_t: 0.7, lambda_c: 1.3, lambda_t1: 0.9, lambda_c1: 1.1, lambda_t2: 0.8 };
    let report = grad_check_store(&b.store, |g| batch_objective(g, &b, &batch, &w, true).map(|r| r.0), EPS)?;
    Ok(Component { name: format!("variant {id}"), params: b.num_params(), max_rel_error: report.max_rel_error })
}

pub fn all_checks(seed: u64, dim: usize, len: usize) -> Result<Vec<Component>> {
    let mut out = primitives(seed)?;
    for id in [VariantId::A, VariantId::E] {
        out.push(variant_graph(id, seed, dim, len)?);
    }
    Ok(out)
}

pub fn run(args: &GradcheckArgs) -> Result<()> {
    let comps = all_checks(args.seed, args.dim, args.len)?;
    let mut bad = 0;
    for c in &comps {
        let ok = c.max_rel_error < THRESHOLD;
        bad += usize::from(!ok);
        println!("{:<16} params {:>5}  max rel error {:.3e}  {}", c.name, c.params, c.max_rel_error, if ok { "ok" } else { "FAIL" });
    }
    if bad > 0 {
        bail!("{bad} components exceed relative error {THRESHOLD:e}");
    }
    Ok(())
}
