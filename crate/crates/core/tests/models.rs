mod common;

use common::*;
use mctn::data::{load_dataset_with, save_dataset, sample_feature, LoadOptions, Split};
use mctn::models::{
    cyclic_translate, hierarchical_forward, joint_representation, ConcatForm, LossSlot, ModelBundle, Provenance,
    Roles, VariantId, VariantSpec,
};
use mctn::train::{evaluate, translation_loss};

#[test]
fn loss_plans_per_variant() {
    let ds = ragged(9, 4, vec![3, 2, 2], 0);
    let names = |id| bundle(id, &ds, &tiny_config(0)).loss_plan.term_names();
    assert_eq!(names(VariantId::A), ["L_t", "L_c", "L_p"]);
    assert_eq!(names(VariantId::B), ["L_t", "L_p"]);
    assert_eq!(names(VariantId::C), ["L_t(s->t)", "L_t(t->s)", "L_p"]);
    assert_eq!(names(VariantId::D), ["L_t(s->t)", "L_t(t->s)", "L_p"]);
    assert_eq!(names(VariantId::E), ["L_t1", "L_c1", "L_t2", "L_p"]);
    assert_eq!(names(VariantId::F), ["L_t1", "L_t2", "L_p"]);
    assert_eq!(names(VariantId::G), ["L_t1(s->t1)", "L_t1(t1->s)", "L_t2", "L_p"]);
    assert_eq!(names(VariantId::H), ["L_t1", "L_p"]);
    assert_eq!(names(VariantId::I), ["L_t1", "L_t2", "L_p"]);
    let e = bundle(VariantId::E, &ds, &tiny_config(0));
    assert!(e.loss_plan.has_slot(LossSlot::C1) && !e.loss_plan.has_slot(LossSlot::C));
}

#[test]
fn parameter_counts() {
    let ds = ragged(9, 4, vec![5, 4, 3], 0);
    let cfg = tiny_config(0);
    let (a, b, c, d) = (
        bundle(VariantId::A, &ds, &cfg),
        bundle(VariantId::B, &ds, &cfg),
        bundle(VariantId::C, &ds, &cfg),
        bundle(VariantId::D, &ds, &cfg),
    );
    // a, b and c share one translator; the cycle adds no parameters.
    assert_eq!(a.num_params(), b.num_params());
    assert_eq!(a.num_params(), c.num_params());
    // d has two translators of a's size; its head reads 2h-wide states.
    assert_eq!(d.translators.len(), 2);
    assert_eq!(d.translator_params(0), a.translator_params(0));
    assert_eq!(d.translator_params(1), a.translator_params(0));
    // Closed-form count for one translator: encoder GRU, decoder GRU,
    // attention, and an input/output projection per modality.
    let (md, h, ds_, dt) = (3, 3, 5, 4);
    let gru = |i: usize| 3 * ((i + h) * h + h);
    let expected = gru(md) + gru(md + h) + (h * h + h * h + h) + (ds_ * md + md) + (dt * md + md) + (h * ds_ + ds_) + (h * dt + dt);
    assert_eq!(a.translator_params(0), expected);
    let e = bundle(VariantId::E, &ds, &cfg);
    assert_eq!(e.translator_params(0), a.translator_params(0));
}

#[test]
fn prediction_uses_forward_encoder_states() {
    let ds = ragged(9, 5, vec![3, 2], 1);
    let b = bundle(VariantId::A, &ds, &tiny_config(1));
    let x = ds.samples[1].feature(LANGUAGE).unwrap();
    let rep = b.represent(x).unwrap();
    let m = &b.translators[0];
    let enc = m.encode_sequence(&b.store, x, LANGUAGE).unwrap();
    assert_eq!(rep.states, enc.states);
    assert_eq!(rep.provenance, Provenance::Bimodal);
    assert_eq!(rep, joint_representation(&enc));
    assert_eq!(b.infer(x).unwrap(), b.head.predict(&b.store, &rep).unwrap());
    // Eager cyclic translation shares the same forward encoding.
    let cyc = cyclic_translate(&b.store, m, x, LANGUAGE, VISUAL, None).unwrap();
    assert_eq!(cyc.forward, rep);
    assert_eq!(cyc.x_t_hat.len(), x.len());
    assert!(translation_loss(&cyc.x_s_hat, x).unwrap() >= 0.0);
}

#[test]
fn hierarchical_representation_replays() {
    let ds = ragged(9, 4, vec![3, 2, 2], 2);
    let b = bundle(VariantId::E, &ds, &tiny_config(2));
    for s in &ds.samples[..3] {
        let x = s.feature(LANGUAGE).unwrap();
        let out = hierarchical_forward(&b.store, &b.translators[0], &b.translators[1], x, LANGUAGE, VISUAL, ACOUSTIC)
            .unwrap();
        let rep = b.represent(x).unwrap();
        assert_eq!(rep.states, out.e2.states);
        assert_eq!(rep.provenance, Provenance::Trimodal);
        assert_eq!(out.x_t2_hat.len(), x.len());
        assert_eq!(out.x_t2_hat.dim(), 2);
    }
    assert!(hierarchical_forward(&b.store, &b.translators[1], &b.translators[0], ds.samples[0].feature(LANGUAGE).unwrap(), LANGUAGE, VISUAL, ACOUSTIC).is_err());
}

#[test]
fn concatenated_variant_reads_the_pair() {
    let ds = ragged(9, 4, vec![3, 2, 2], 3);
    let roles = Roles::trimodal(LANGUAGE, VISUAL, ACOUSTIC);
    for form in ConcatForm::ALL {
        let spec = VariantSpec::new(VariantId::H, roles.clone()).unwrap().with_concat_form(form).unwrap();
        let b = ModelBundle::build(&spec, &ds.dims(), ds.task, 1, &tiny_config(3)).unwrap();
        let key = b.source_key();
        let x = sample_feature(&ds.samples[0], &key).unwrap();
        assert_eq!(x.dim(), key.split('+').map(|k| ds.dim(k).unwrap()).sum::<usize>());
        assert_eq!(b.infer(&x).unwrap().len(), 1);
    }
}

#[test]
fn inference_never_reads_target_modalities() {
    let ds = ragged(30, 5, vec![3, 2, 2], 4);
    let dir = tempfile::tempdir().unwrap();
    save_dataset(&ds, dir.path()).unwrap();
    for id in VariantId::ALL {
        let b = bundle(id, &ds, &tiny_config(4));
        let full = evaluate(&b, &ds, Split::Test, 4).unwrap();
        let only = LoadOptions { modalities: Some(b.inference_modalities()) };
        let source_only = load_dataset_with(dir.path(), &only).unwrap();
        let partial = evaluate(&b, &source_only, Split::Test, 4).unwrap();
        assert_eq!(full.predictions, partial.predictions, "variant {id}");
        assert!(full.diagnostics.is_some(), "variant {id}");
        if id != VariantId::H {
            assert!(partial.diagnostics.is_none(), "variant {id}");
        }
    }
}

#[test]
fn checkpoint_round_trip() {
    let ds = ragged(12, 4, vec![3, 2, 2], 5);
    let dir = tempfile::tempdir().unwrap();
    for id in [VariantId::A, VariantId::G, VariantId::I] {
        let b = bundle(id, &ds, &tiny_config(5));
        let manifest = b.save(&dir.path().join(id.to_string())).unwrap();
        let loaded = ModelBundle::load(&manifest).unwrap();
        assert_eq!(loaded.store.tensors(), b.store.tensors());
        let x = ds.samples[0].feature(LANGUAGE).unwrap();
        assert_eq!(loaded.infer(x).unwrap(), b.infer(x).unwrap());
    }
    let mut dims = ds.dims();
    dims.insert(VISUAL.into(), 9);
    let a = bundle(VariantId::A, &ds, &tiny_config(5));
    let err = a.check_dims(&dims, &[LANGUAGE.into(), VISUAL.into()]).unwrap_err().to_string();
    assert!(err.contains("visual") && err.contains('9'), "{err}");
}

#[test]
fn prediction_only_bundle_has_no_decoder() {
    let ds = ragged(9, 4, vec![3, 2], 6);
    let cfg = tiny_config(6);
    let p = ModelBundle::prediction_only(LANGUAGE, &ds.dims(), ds.task, 1, &cfg).unwrap();
    let a = bundle(VariantId::A, &ds, &cfg);
    assert!(p.is_prediction_only() && p.loss_plan.terms.is_empty());
    assert!(p.translators[0].decoder.is_none());
    for (name, t) in p.store.named() {
        let id = a.store.find(name).unwrap_or_else(|| panic!("{name} missing from variant a"));
        assert_eq!(a.store.get(id), t, "{name}");
    }
}
