//! Three independent evaluations of every tree must agree: the packed
//! in-memory classifier, a walk over the raw model JSON, and an interpreter
//! executing the emitted P4 text.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use flowforge_core::catalog::{FeatureId, FeatureMask};
use flowforge_core::flowtable::FlowRecord;
use flowforge_core::nids::{compile_to_p4, load_model};
use flowforge_core::testutil::{
    classify_reference, interpret_emitted_p4, random_model_json, random_record,
    LISTING_FRAGMENT_DTM, LISTING_FRAGMENT_P4,
};

#[test]
fn fragment_compiles_to_the_handwritten_p4() {
    let model = load_model(LISTING_FRAGMENT_DTM).unwrap();
    let p4 = compile_to_p4(&model, FeatureMask::ALL).unwrap();
    assert_eq!(p4, LISTING_FRAGMENT_P4);
}

#[test]
fn fragment_agrees_across_all_three_evaluators() {
    let model = load_model(LISTING_FRAGMENT_DTM).unwrap();
    let p4 = compile_to_p4(&model, FeatureMask::ALL).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..500 {
        let mut rec = random_record(&mut rng);
        let packed = model.classify(&mut rec).label;
        let json_walk = classify_reference(LISTING_FRAGMENT_DTM, &rec);
        let p4_run = interpret_emitted_p4(&p4, &rec);
        assert_eq!(packed, json_walk, "packed vs json walk on {rec:?}");
        assert_eq!(packed, p4_run, "packed vs emitted text on {rec:?}");
        assert_eq!(rec.malicious_flag, packed);
    }
}

#[test]
fn random_models_agree_across_all_three_evaluators() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for round in 0..40 {
        let depth = rng.random_range(1..=8);
        let json = random_model_json(&mut rng, FeatureMask::ALL, depth);
        let model = load_model(&json).unwrap();
        let p4 = compile_to_p4(&model, FeatureMask::ALL).unwrap();
        for _ in 0..100 {
            let rec = random_record(&mut rng);
            let packed = model.classify_label(&rec);
            assert_eq!(
                packed,
                classify_reference(&json, &rec),
                "round {round}: packed vs json walk\nmodel: {json}"
            );
            assert_eq!(
                packed,
                interpret_emitted_p4(&p4, &rec),
                "round {round}: packed vs emitted text\nmodel: {json}\np4:\n{p4}"
            );
        }
    }
}

#[test]
fn verdict_path_replays_to_the_same_leaf() {
    let mut rng = ChaCha8Rng::seed_from_u64(123);
    for _ in 0..20 {
        let json = random_model_json(&mut rng, FeatureMask::PRESET_12, 6);
        let model = load_model(&json).unwrap();
        for _ in 0..50 {
            let mut rec = random_record(&mut rng);
            let verdict = model.classify(&mut rec);
            // Each step's comparison must be reproducible from the record.
            for step in &verdict.path {
                assert_eq!(step.went_left, rec.feature(step.feature) <= step.threshold);
            }
            assert!(verdict.path.len() <= model.depth() as usize);
        }
    }
}

#[test]
fn narrow_mask_compilation_agrees_with_reference() {
    // Models restricted to the 7-feature preset compile against that mask
    // and still agree everywhere.
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..20 {
        let json = random_model_json(&mut rng, FeatureMask::PRESET_7, 5);
        let model = load_model(&json).unwrap();
        assert!(FeatureMask::PRESET_7.is_superset_of(model.feature_mask()));
        let p4 = compile_to_p4(&model, FeatureMask::PRESET_7).unwrap();
        for _ in 0..50 {
            let rec = random_record(&mut rng);
            assert_eq!(model.classify_label(&rec), interpret_emitted_p4(&p4, &rec));
        }
    }
}

proptest! {
    /// Arbitrary feature vectors, clamped into each field's width, classify
    /// identically under the packed model and the JSON walk of the fragment.
    #[test]
    fn fragment_classification_is_width_stable(raw in prop::collection::vec(any::<u64>(), 22)) {
        let mut rec = FlowRecord::blank();
        for (f, v) in FeatureId::all().zip(raw.iter()) {
            rec.set_feature(f, v % (f.max_value().saturating_add(1).max(1)));
        }
        let model = load_model(LISTING_FRAGMENT_DTM).unwrap();
        prop_assert_eq!(model.classify_label(&rec), classify_reference(LISTING_FRAGMENT_DTM, &rec));
    }
}
