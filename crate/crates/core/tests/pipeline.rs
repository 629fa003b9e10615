use mistaken_core::gen::{dataset_priors, dataset_stats, derive_labels, generate_dataset, GenTargets};
use mistaken_core::learn::{forward, read_model, write_model, ModelFile, ModelParams, TrainConfig};
use mistaken_core::repr::{featurize_sequence, read_feature_cache, write_feature_cache, Variant, FEATURE_DIM};
use mistaken_core::scene::{decode_scene, encode_scene, validate_scene, NUM_FRAMES};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Tiny datasets cannot hit the default priors, so widen the bands.
fn loose() -> GenTargets {
    GenTargets { fraction_tolerance: 1.0, characters_tolerance: 4.0, ..GenTargets::default() }
}

#[test]
fn generated_scenes_survive_the_codec_and_stay_valid() {
    let d = generate_dataset(60, 4, loose()).unwrap();
    for scene in &d.scenes {
        assert_eq!(validate_scene(scene), Vec::<String>::new());
        assert_eq!(derive_labels(scene), scene.labels);
        let text = encode_scene(scene).unwrap();
        let back = decode_scene(&text).unwrap();
        assert_eq!(&back, scene);
        assert_eq!(encode_scene(&back).unwrap(), text);
    }
}

#[test]
fn stats_rates_agree_with_priors() {
    let d = generate_dataset(200, 2, GenTargets::default()).unwrap();
    let (fraction, _) = dataset_priors(&d.scenes);
    let stats = dataset_stats(&d);
    let (present, mistaken) = stats.by_frame.iter().fold((0, 0), |(p, m), r| (p + r.present, m + r.mistaken));
    assert_eq!(stats.by_frame.len(), NUM_FRAMES);
    assert!((mistaken as f64 / present as f64 - fraction).abs() < 1e-12);
    assert_eq!(stats.positions.len(), present);
}

#[test]
fn features_and_models_roundtrip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = generate_dataset(5, 8, loose()).unwrap();
    let scene = &d.scenes[0];
    let seq = featurize_sequence(scene, scene.cast()[0], Variant::Standard).unwrap();
    let cache = dir.path().join("f.bin");
    write_feature_cache(&cache, &seq).unwrap();
    let cached = read_feature_cache(&cache).unwrap();
    assert_eq!((cached.t, cached.d), (NUM_FRAMES, FEATURE_DIM));
    assert_eq!(cached.data, seq.data);

    let params = ModelParams::init(7, FEATURE_DIM, &mut ChaCha8Rng::seed_from_u64(3));
    let path = dir.path().join("m.json");
    write_model(&path, &ModelFile::new(&params, seq.kind, &TrainConfig::default(), &[])).unwrap();
    let back = read_model(&path).unwrap().params();
    assert_eq!(back, params);
    assert_eq!(forward(&back, &seq).unwrap(), forward(&params, &seq).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_label_belongs_to_a_present_character(seed in 0u64..10_000) {
        let d = generate_dataset(4, seed, loose()).unwrap();
        for scene in &d.scenes {
            for c in scene.cast() {
                for t in 0..NUM_FRAMES {
                    prop_assert!(!scene.labels.get(c, t) || scene.frames[t].is_present(c));
                }
            }
        }
    }
}
