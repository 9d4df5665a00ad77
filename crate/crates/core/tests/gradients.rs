mod common;

use common::*;
use mctn::data::{Batch, FeatureSequence, Split, Task};
use mctn::models::{masked_mse, VariantId};
use mctn::seq2seq::{constants, Init, Seq2SeqModel};
use mctn::train::{batch_objective, LossWeights};
use mctn::MctnError;
use mctn_autodiff::{grad_check_store, ParamStore};

const EPS: f64 = 1e-4;
const TOL: f64 = 1e-4;

fn check_variant(id: VariantId, dims: Vec<usize>, task: Task) {
    let mut ds = ragged(12, 4, dims, 3);
    if task == Task::Classification {
        ds.task = task;
        for s in &mut ds.samples {
            s.label = if s.label >= 0.0 { 1.0 } else { 0.0 };
        }
    }
    let b = bundle(id, &ds, &tiny_config(5));
    assert!(b.num_params() <= 2000, "{} params", b.num_params());
    let train = ds.split(Split::Train);
    let batch = Batch::from_samples(&train[..3], &b.train_keys()).unwrap();
    assert!(!batch.all_valid(batch.steps() - 1), "batch should contain padding");
    let w = LossWeights { lambda_t: 0.7, lambda_c: 1.3, lambda_t1: 0.9, lambda_c1: 1.1, lambda_t2: 0.8 };
    let report = grad_check_store(&b.store, |g| batch_objective(g, &b, &batch, &w, true).map(|r| r.0), EPS).unwrap();
    assert!(report.max_rel_error < TOL, "variant {id}: {report:?}");
}

#[test]
fn encode_attend_decode_teacher_forced() {
    let mut store = ParamStore::new();
    let m = Seq2SeqModel::new(&mut store, &Init::new(2), "m", &[("s".into(), 3), ("t".into(), 2)], 4, 4);
    assert!(store.num_scalars() <= 2000);
    let src: Vec<Vec<f64>> = (0..4).map(|i| vec![0.1 * i as f64, -0.3, 0.5 - 0.2 * i as f64]).collect();
    let tgt: Vec<Vec<f64>> = (0..4).map(|i| vec![(i as f64).sin(), 0.2]).collect();
    let xs = Batch::from_sequence("s", &FeatureSequence::from_frames(&src).unwrap()).unwrap();
    let xt = Batch::from_sequence("t", &FeatureSequence::from_frames(&tgt).unwrap()).unwrap();
    let report = grad_check_store(
        &store,
        |g| -> Result<_, MctnError> {
            let enc = m.encode_batch(g, &xs, "s")?;
            let target = constants(g, xt.feature("t")?);
            let out = m.decode(g, &enc, "t", 4, Some(&target))?;
            masked_mse(g, &out, &target, &[4])
        },
        EPS,
    )
    .unwrap();
    assert!(report.max_rel_error < TOL, "{report:?}");
}

#[test]
fn variant_a_full_graph() {
    check_variant(VariantId::A, vec![3, 2], Task::Regression);
}

#[test]
fn variant_a_classification_graph() {
    check_variant(VariantId::A, vec![3, 2], Task::Classification);
}

#[test]
fn variant_e_full_graph() {
    check_variant(VariantId::E, vec![3, 2, 2], Task::Regression);
}

#[test]
fn remaining_variants() {
    for id in [VariantId::C, VariantId::D, VariantId::G, VariantId::H, VariantId::I] {
        let dims = if id.is_trimodal() { vec![3, 2, 2] } else { vec![3, 2] };
        check_variant(id, dims, Task::Regression);
    }
}
