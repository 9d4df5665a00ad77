mod common;

use common::*;
use mctn::data::{synth_generate, Split, SynthSpec};
use mctn::models::{ModelBundle, VariantId};
use mctn::train::{coupled_objective, fit, write_epochs_jsonl, Arity, LossWeights, TrainConfig};
use mctn::MctnError;

fn quick(epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig { epochs, batch_size: 8, learning_rate: 5e-3, seed, patience: 0, ..Default::default() }
}

fn jsonl(records: &[mctn::train::EpochRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    write_epochs_jsonl(records, &mut out).unwrap();
    out
}

#[test]
fn reruns_are_byte_identical() {
    let ds = ragged(30, 5, vec![3, 2], 1);
    let run = || {
        let mut b = bundle(VariantId::A, &ds, &tiny_config(1));
        let out = fit(&mut b, &ds, &quick(4, 1)).unwrap();
        (jsonl(&out.epochs), b.store.tensors().to_vec())
    };
    let (log1, p1) = run();
    let (log2, p2) = run();
    assert_eq!(log1, log2);
    assert_eq!(p1, p2);
    let text = String::from_utf8(log1).unwrap();
    assert_eq!(text.lines().count(), 4);
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    for key in ["epoch", "l_t", "l_c", "l_p", "total", "val_l_p"] {
        assert!(first.get(key).is_some(), "{key}");
    }
}

#[test]
fn zero_learning_rate_changes_nothing() {
    let ds = ragged(30, 5, vec![3, 2], 2);
    let mut b = bundle(VariantId::A, &ds, &tiny_config(2));
    let before = b.store.tensors().to_vec();
    let cfg = TrainConfig { learning_rate: 0.0, ..quick(3, 2) };
    let out = fit(&mut b, &ds, &cfg).unwrap();
    assert_eq!(b.store.tensors(), &before[..]);
    let e0 = &out.epochs[0];
    for e in &out.epochs[1..] {
        for (x, y) in [(e.l_t, e0.l_t), (e.l_c, e0.l_c), (e.l_p, e0.l_p), (e.total, e0.total)] {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
        assert_eq!(e.val_l_p, e0.val_l_p);
    }
}

#[test]
fn logged_total_is_the_weighted_sum() {
    let ds = ragged(30, 5, vec![3, 2, 2], 3);
    let w = LossWeights { lambda_t: 0.4, lambda_c: 2.5, lambda_t1: 0.3, lambda_c1: 1.7, lambda_t2: 0.6 };
    for (id, arity) in [(VariantId::A, Arity::Bimodal), (VariantId::C, Arity::Bimodal), (VariantId::E, Arity::Trimodal), (VariantId::G, Arity::Trimodal)] {
        let mut b = bundle(id, &ds, &tiny_config(3));
        let out = fit(&mut b, &ds, &TrainConfig { weights: w, ..quick(2, 3) }).unwrap();
        for s in &out.steps {
            let sum = coupled_objective(&s.losses, &w, arity).unwrap();
            assert!((sum - s.losses.total).abs() <= 1e-9, "{id} step {s:?}");
        }
        for e in &out.epochs {
            let sum = coupled_objective(&e.breakdown(), &w, arity).unwrap();
            assert!((sum - e.total).abs() <= 1e-9, "{id} epoch {e:?}");
        }
        if arity == Arity::Trimodal {
            let e = &out.epochs[0];
            assert_eq!(e.l_t, e.l_t1.unwrap() + e.l_t2.unwrap());
            assert_eq!(e.l_c, e.l_c1.unwrap());
        }
    }
}

#[test]
fn zero_translation_weights_reduce_to_prediction_only() {
    let ds = ragged(30, 5, vec![3, 2], 4);
    let cfg = tiny_config(4);
    let tc = TrainConfig { weights: LossWeights { lambda_t: 0.0, lambda_c: 0.0, ..Default::default() }, ..quick(3, 4) };
    let mut a = bundle(VariantId::A, &ds, &cfg);
    let mut p = ModelBundle::prediction_only(LANGUAGE, &ds.dims(), ds.task, 1, &cfg).unwrap();
    let (ra, rp) = (fit(&mut a, &ds, &tc).unwrap(), fit(&mut p, &ds, &tc).unwrap());
    for (x, y) in ra.epochs.iter().zip(&rp.epochs) {
        assert_eq!(x.l_p.to_bits(), y.l_p.to_bits());
        assert_eq!(x.total.to_bits(), y.total.to_bits());
        assert_eq!(x.val_l_p.to_bits(), y.val_l_p.to_bits());
        assert_eq!((x.l_t, x.l_c), (0.0, 0.0));
    }
    for (name, t) in p.store.named() {
        assert_eq!(a.store.get(a.store.find(name).unwrap()), t, "{name}");
    }
}

#[test]
fn cycle_weight_zero_matches_variant_b() {
    let ds = ragged(30, 5, vec![3, 2], 5);
    let cfg = tiny_config(5);
    let tc = TrainConfig { weights: LossWeights { lambda_c: 0.0, ..Default::default() }, ..quick(3, 5) };
    let mut a = bundle(VariantId::A, &ds, &cfg);
    let mut b = bundle(VariantId::B, &ds, &cfg);
    let (ra, rb) = (fit(&mut a, &ds, &tc).unwrap(), fit(&mut b, &ds, &tc).unwrap());
    assert_eq!(jsonl(&ra.epochs), jsonl(&rb.epochs));
    assert_eq!(a.store.tensors(), b.store.tensors());
}

#[test]
fn variant_b_overfits_one_sample() {
    let mut ds = synth_generate(&SynthSpec::new(3, 4, vec![3, 2], 0.1, 6)).unwrap().dataset;
    ds.samples[0].split = Split::Train;
    ds.samples[1].split = Split::Valid;
    ds.samples[2].split = Split::Test;
    let mut b = bundle(VariantId::B, &ds, &tiny_config(6));
    let out = fit(&mut b, &ds, &TrainConfig { learning_rate: 1e-2, ..quick(200, 6) }).unwrap();
    let l_t: Vec<f64> = out.epochs.iter().map(|e| e.l_t).collect();
    let (first, last) = (l_t[0], *l_t.last().unwrap());
    assert!(last < first, "{first} -> {last}");
    // Decreasing on average: each quarter of the run ends lower than it started.
    for q in l_t.chunks(50) {
        assert!(q.last().unwrap() < q.first().unwrap(), "{q:?}");
    }
}

#[test]
fn early_stopping_restores_the_best_epoch() {
    let ds = ragged(30, 5, vec![3, 2], 7);
    let mut b = bundle(VariantId::B, &ds, &tiny_config(7));
    let cfg = TrainConfig { learning_rate: 0.2, patience: 2, ..quick(40, 7) };
    let out = fit(&mut b, &ds, &cfg).unwrap();
    let best = out.epochs.iter().map(|e| e.val_l_p).fold(f64::INFINITY, f64::min);
    assert_eq!(out.best_val_l_p, best);
    assert_eq!(out.epochs[out.best_epoch - 1].val_l_p, best);
    if out.stopped_early {
        assert_eq!(out.epochs.len(), out.best_epoch + 2);
    }
    let val = mctn::train::split_prediction_loss(&b, &ds.split(Split::Valid), 8).unwrap();
    assert!((val - best).abs() < 1e-4 * best.max(1.0), "{val} vs {best}");
}

#[test]
fn failures_are_reported() {
    let ds = ragged(30, 5, vec![3, 2], 8);
    let mut b = bundle(VariantId::A, &ds, &tiny_config(8));
    b.store.tensors_mut()[0].data_mut()[0] = f64::NAN;
    let r = fit(&mut b, &ds, &quick(1, 8));
    assert!(matches!(r, Err(MctnError::NonFiniteLoss { epoch: 1, batch: 0 })), "{r:?}");

    let mut empty = ds.clone();
    empty.samples.retain(|s| s.split != Split::Valid);
    let mut b = bundle(VariantId::A, &ds, &tiny_config(8));
    assert!(matches!(fit(&mut b, &empty, &quick(1, 8)), Err(MctnError::EmptySplit(_))));

    for bad in [
        TrainConfig { epochs: 0, ..quick(1, 0) },
        TrainConfig { batch_size: 0, ..quick(1, 0) },
        TrainConfig { learning_rate: -1.0, ..quick(1, 0) },
        TrainConfig { weights: LossWeights { lambda_c: -0.5, ..Default::default() }, ..quick(1, 0) },
    ] {
        assert!(matches!(fit(&mut b, &ds, &bad), Err(MctnError::Config(_))));
    }
}
