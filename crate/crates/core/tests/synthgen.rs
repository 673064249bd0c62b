use affect_core::bvh::{parse_bvh, write_bvh};
use affect_core::dataset::{load_samples, save_samples};
use affect_core::features::{global_features, FeatureSchema, JointRangeTable};
use affect_core::synthgen::{generate_dataset, inseparable_profiles, SynthConfig};
use affect_core::AffectLabel;

fn config(per_class: usize) -> SynthConfig {
    SynthConfig {
        samples_per_class: per_class,
        ..SynthConfig::default()
    }
}

#[test]
fn same_seed_same_bytes() {
    let a = generate_dataset(&config(3)).unwrap();
    let b = generate_dataset(&config(3)).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(write_bvh(&x.skeleton, &x.motion), write_bvh(&y.skeleton, &y.motion));
    }
    let c = generate_dataset(&SynthConfig { seed: 1, ..config(3) }).unwrap();
    assert_ne!(a[0].motion, c[0].motion);
}

#[test]
fn shape_and_labels() {
    let samples = generate_dataset(&config(4)).unwrap();
    assert_eq!(samples.len(), 16);
    for label in AffectLabel::ALL {
        assert_eq!(samples.iter().filter(|s| s.label == label).count(), 4);
    }
    for s in &samples {
        assert_eq!(s.skeleton.rotation_channel_count(), 51);
        assert_eq!(s.motion.frame_count(), 101);
        assert_eq!(s.key_frame, 50);
        assert!(!s.is_synthetic());
    }
}

#[test]
fn triumphant_moves_faster_than_concentrating() {
    let samples = generate_dataset(&config(30)).unwrap();
    let schema = FeatureSchema::default();
    let limbs = schema.limb_joints.len();
    let mean_speed = |s: &affect_core::dataset::Sample| {
        let g = global_features(&s.skeleton, &s.motion, &schema).unwrap();
        let base = schema.posture_descriptors.len() * schema.stats.len();
        (0..limbs).map(|k| g[base + k * schema.stats.len()]).sum::<f64>() / limbs as f64
    };
    let of = |label| -> Vec<f64> {
        samples.iter().filter(|s| s.label == label).map(mean_speed).collect()
    };
    let slowest_triumph = of(AffectLabel::Triumphant).into_iter().fold(f64::INFINITY, f64::min);
    let fastest_focus = of(AffectLabel::Concentrating).into_iter().fold(0.0, f64::max);
    assert!(slowest_triumph > fastest_focus, "{slowest_triumph} <= {fastest_focus}");
}

#[test]
fn inseparable_profiles_give_identical_motion() {
    let samples = generate_dataset(&SynthConfig {
        profiles: inseparable_profiles(),
        ..config(5)
    })
    .unwrap();
    for s in &samples[1..] {
        assert_eq!(s.motion, samples[0].motion);
    }
}

#[test]
fn angles_respect_the_range_table() {
    let ranges = JointRangeTable::default();
    for s in generate_dataset(&config(5)).unwrap() {
        for frame in s.motion.frames() {
            for (j, col, ch) in s.skeleton.rotation_columns() {
                let [lo, hi] = ranges.get(&s.skeleton.joint(j).name).axis(ch.axis());
                assert!(lo <= frame[col] && frame[col] <= hi);
            }
        }
    }
}

#[test]
fn files_round_trip_through_the_parser() {
    let samples = generate_dataset(&config(2)).unwrap();
    for s in &samples {
        let (skel, motion) = parse_bvh(&write_bvh(&s.skeleton, &s.motion)).unwrap();
        assert_eq!(skel.len(), s.skeleton.len());
        for (a, b) in motion.data().iter().zip(s.motion.data()) {
            assert!((a - b).abs() < 1e-9);
        }
    }
    let dir = tempfile::tempdir().unwrap();
    save_samples(dir.path(), &samples).unwrap();
    let mut back = load_samples(&dir.path().join("manifest.tsv")).unwrap();
    let mut samples = samples;
    back.sort_by(|a, b| a.id.cmp(&b.id));
    samples.sort_by(|a, b| a.id.cmp(&b.id));
    assert_eq!(back.len(), samples.len());
    for (a, b) in back.iter().zip(&samples) {
        assert_eq!((&a.id, a.label, a.key_frame), (&b.id, b.label, b.key_frame));
        for (x, y) in a.motion.data().iter().zip(b.motion.data()) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}
