use affect_core::bvh::{forward_kinematics, JointSpec, Motion, Skeleton};
use affect_core::features::{
    build_feature_window, global_features, local_features, posture_descriptors, ExtractConfig,
    FeatureSchema, JointRangeTable, LocalVariant,
};
use affect_core::synthgen::{canonical_skeleton, generate_dataset, SynthConfig};
use affect_core::AffectLabel;
use proptest::prelude::*;

fn specs_of(s: &Skeleton) -> Vec<JointSpec> {
    s.joints()
        .iter()
        .map(|j| JointSpec {
            name: j.name.clone(),
            parent: j.parent,
            offset: j.offset,
            channels: j.channels.clone(),
            end_site: j.end_site,
        })
        .collect()
}

fn frozen(skeleton: &Skeleton, frames: usize) -> Motion {
    let mut row = vec![0.0; skeleton.channel_count()];
    row[1] = 90.0;
    Motion::from_frames(1.0 / 30.0, &vec![row; frames]).unwrap()
}

/// `mean, population std, min, max` by two passes.
fn stats(v: &[f64]) -> [f64; 4] {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    [mean, var.sqrt(), min, max]
}

fn angle_delta(a: f64, b: f64) -> f64 {
    let mut d = (b - a) % 360.0;
    if d > 180.0 {
        d -= 360.0;
    } else if d < -180.0 {
        d += 360.0;
    }
    d
}

/// Global vector rebuilt from per-frame descriptors and joint angles.
fn oracle_global(skeleton: &Skeleton, window: &Motion, schema: &FeatureSchema) -> Vec<f64> {
    let poses: Vec<_> = window.frames().map(|f| forward_kinematics(skeleton, f)).collect();
    let desc: Vec<Vec<f64>> = poses
        .iter()
        .map(|p| posture_descriptors(skeleton, schema, p, &poses[0]).unwrap())
        .collect();
    let t = poses.len();
    let limbs: Vec<usize> = schema
        .limb_joints
        .iter()
        .map(|n| skeleton.index_of(n).unwrap())
        .collect();
    let mut speed = vec![vec![0.0; limbs.len()]; t];
    let mut delta = vec![vec![0.0; desc[0].len()]; t];
    for i in 0..t {
        let a = i.min(t - 2);
        for (k, &j) in limbs.iter().enumerate() {
            speed[i][k] = (0..3)
                .map(|x| angle_delta(poses[a].rotations[j][x], poses[a + 1].rotations[j][x]).abs())
                .sum();
        }
        for k in 0..desc[0].len() {
            delta[i][k] = desc[a + 1][k] - desc[a][k];
        }
    }
    let mut out = Vec::new();
    for block in [&desc, &speed, &delta] {
        for k in 0..block[0].len() {
            let col: Vec<f64> = block.iter().map(|r| r[k]).collect();
            out.extend(stats(&col));
        }
    }
    out
}

fn synth_samples() -> Vec<affect_core::dataset::Sample> {
    generate_dataset(&SynthConfig {
        samples_per_class: 2,
        ..SynthConfig::default()
    })
    .unwrap()
}

#[test]
fn default_dimensions() {
    let cfg = ExtractConfig::new("R1+M1,M0".parse().unwrap());
    for s in synth_samples() {
        let w = build_feature_window(&s.skeleton, &s.motion, s.key_frame, s.label, &s.id, &cfg).unwrap();
        let local = w.local.unwrap();
        assert_eq!(local.shape(), (101, 84));
        assert_eq!(w.global.unwrap().len(), 132);
        assert!(local.as_slice().iter().all(|v| v.is_finite()));
    }
    assert_eq!(FeatureSchema::default().global_width(), 132);
}

#[test]
fn m0_only_has_no_local_block() {
    let cfg = ExtractConfig::new("M0".parse().unwrap());
    let s = &synth_samples()[0];
    let w = build_feature_window(&s.skeleton, &s.motion, s.key_frame, s.label, &s.id, &cfg).unwrap();
    assert!(w.local.is_none());
    assert_eq!(w.global.unwrap().len(), 132);
}

#[test]
fn global_matches_brute_force() {
    let schema = FeatureSchema::default();
    for s in synth_samples() {
        let window = s.motion.window_around(s.key_frame, 50).unwrap();
        let got = global_features(&s.skeleton, &window, &schema).unwrap();
        let want = oracle_global(&s.skeleton, &window, &schema);
        assert_eq!(got.len(), want.len());
        for (i, (a, b)) in got.iter().zip(&want).enumerate() {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{}[{i}]: {a} vs {b}", s.id);
        }
    }
}

#[test]
fn frozen_window_has_no_motion() {
    let skel = canonical_skeleton();
    let schema = FeatureSchema::default();
    let m = frozen(&skel, 7);
    let g = global_features(&skel, &m, &schema).unwrap();
    for stat in g.chunks(4) {
        assert_eq!(stat[1], 0.0);
        assert_eq!(stat[0], stat[2]);
        assert_eq!(stat[2], stat[3]);
    }
    let local = local_features(&skel, &m, &schema, &JointRangeTable::default(), LocalVariant::M1).unwrap();
    for row in local.iter_rows() {
        assert!(row[12..].iter().all(|&v| v == 0.0));
    }
}

#[test]
fn elbow_angular_speed_toy() {
    let skel = canonical_skeleton();
    let schema = FeatureSchema::default();
    let elbow = skel.require("LeftElbow").unwrap();
    let col = skel.joint(elbow).channel_start;
    let mut m = frozen(&skel, 3);
    m.frame_mut(1)[col] = 10.0;
    m.frame_mut(2)[col] = 30.0;
    let local = local_features(&skel, &m, &schema, &JointRangeTable::default(), LocalVariant::M1).unwrap();
    let k = schema.limb_joints.iter().position(|n| n == "LeftElbow").unwrap();
    let speeds: Vec<f64> = (0..3).map(|t| local.get(t, 24 + k)).collect();
    assert_eq!(speeds, vec![10.0, 20.0, 20.0]);

    let g = global_features(&skel, &m, &schema).unwrap();
    let base = 12 * 4 + k * 4;
    let want = stats(&[10.0, 20.0, 20.0]);
    assert!((g[base] - 50.0 / 3.0).abs() < 1e-12);
    for i in 0..4 {
        assert!((g[base + i] - want[i]).abs() < 1e-12);
    }
}

#[test]
fn symmetric_pose_descriptors() {
    let skel = canonical_skeleton();
    let schema = FeatureSchema::default();
    let m = frozen(&skel, 1);
    let pose = forward_kinematics(&skel, m.frame(0));
    let d = posture_descriptors(&skel, &schema, &pose, &pose).unwrap();
    assert!(d[7].abs() < 1e-12, "pose difference to itself");
    assert!(d[8].abs() < 1e-12, "pose symmetry");
    assert!((d[9] + d[10]).abs() < 1e-12, "directed symmetry");
}

#[test]
fn arms_shoulders_openness_on_t_pose() {
    let mut specs = specs_of(&canonical_skeleton());
    for spec in &mut specs {
        let side = if spec.name.starts_with("Left") { 1.0 } else { -1.0 };
        match spec.name.trim_start_matches("Left").trim_start_matches("Right") {
            "Shoulder" => spec.offset = [0.25 * side, 0.0, 0.0],
            "Elbow" | "Wrist" => spec.offset = [0.375 * side, 0.0, 0.0],
            _ => {}
        }
    }
    let skel = Skeleton::new(specs).unwrap();
    let schema = FeatureSchema::default();
    let pose = forward_kinematics(&skel, frozen(&skel, 1).frame(0));
    let lw = pose.position(skel.require("LeftWrist").unwrap());
    let rw = pose.position(skel.require("RightWrist").unwrap());
    assert!((lw[0] - rw[0] - 2.0).abs() < 1e-12);
    let d = posture_descriptors(&skel, &schema, &pose, &pose).unwrap();
    assert!((d[11] - 4.0).abs() < 1e-12, "{}", d[11]);
}

#[test]
fn collapsed_shoulders_are_degenerate() {
    let mut specs = specs_of(&canonical_skeleton());
    for spec in &mut specs {
        if spec.name.ends_with("Shoulder") {
            spec.offset = [0.0; 3];
        }
    }
    let skel = Skeleton::new(specs).unwrap();
    let pose = forward_kinematics(&skel, frozen(&skel, 1).frame(0));
    assert!(matches!(
        posture_descriptors(&skel, &FeatureSchema::default(), &pose, &pose),
        Err(affect_core::Error::DegenerateSkeleton(_))
    ));
}

#[test]
fn unknown_rotation_joint_is_reported() {
    let mut schema = FeatureSchema::default();
    schema.rotation_joints.push("Tail".into());
    let skel = canonical_skeleton();
    let r = local_features(&skel, &frozen(&skel, 3), &schema, &JointRangeTable::default(), LocalVariant::R0);
    assert!(matches!(r, Err(affect_core::Error::UnknownJoint(_))));
}

#[test]
fn sample_order_does_not_change_features() {
    let samples = synth_samples();
    let cfg = ExtractConfig::new("R0+M1,M0".parse().unwrap());
    let fwd = affect_core::experiment::extract_windows(&samples, &cfg).unwrap();
    let mut rev_samples = samples.clone();
    rev_samples.reverse();
    let mut rev = affect_core::experiment::extract_windows(&rev_samples, &cfg).unwrap();
    rev.reverse();
    assert_eq!(fwd, rev);
}

#[test]
fn reversal_keeps_descriptor_extremes_and_means() {
    let schema = FeatureSchema::default();
    let s = &synth_samples()[3];
    let window = s.motion.window_around(s.key_frame, 50).unwrap();
    let frames: Vec<Vec<f64>> = window.frames().rev().map(<[f64]>::to_vec).collect();
    let reversed = Motion::from_frames(window.frame_time(), &frames).unwrap();
    let a = global_features(&s.skeleton, &window, &schema).unwrap();
    let b = global_features(&s.skeleton, &reversed, &schema).unwrap();
    let want = oracle_global(&s.skeleton, &reversed, &schema);
    for (x, y) in b.iter().zip(&want) {
        assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
    }
    // Pose difference (descriptor 8) is measured against the first frame,
    // which reversal changes.
    for d in (0..12).filter(|&d| d != 7) {
        for stat in [0, 1, 2, 3] {
            let (x, y) = (a[d * 4 + stat], b[d * 4 + stat]);
            assert!((x - y).abs() < 1e-9 * x.abs().max(1.0), "descriptor {d} stat {stat}");
        }
    }
}

fn arb_motion(frames: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    let channels = canonical_skeleton().channel_count();
    prop::collection::vec(prop::collection::vec(-400.0f64..400.0, channels), frames)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn root_translation_leaves_motion_features(rows in arb_motion(4), d in prop::array::uniform3(-200.0f64..200.0)) {
        let skel = canonical_skeleton();
        let schema = FeatureSchema::default();
        let ranges = JointRangeTable::default();
        let m = Motion::from_frames(1.0 / 30.0, &rows).unwrap();
        let mut moved = m.clone();
        moved.translate_root(&skel, d);
        let g0 = global_features(&skel, &m, &schema).unwrap();
        let g1 = global_features(&skel, &moved, &schema).unwrap();
        for (a, b) in g0.iter().zip(&g1) {
            prop_assert!((a - b).abs() < 1e-7 * a.abs().max(1.0), "{} vs {}", a, b);
        }
        let l0 = local_features(&skel, &m, &schema, &ranges, LocalVariant::M1).unwrap();
        let l1 = local_features(&skel, &moved, &schema, &ranges, LocalVariant::M1).unwrap();
        for (a, b) in l0.as_slice().iter().zip(l1.as_slice()) {
            prop_assert!((a - b).abs() < 1e-7 * a.abs().max(1.0));
        }
    }

    #[test]
    fn r1_stays_in_unit_interval(rows in arb_motion(3)) {
        let skel = canonical_skeleton();
        let m = Motion::from_frames(1.0 / 30.0, &rows).unwrap();
        let l = local_features(&skel, &m, &FeatureSchema::default(), &JointRangeTable::default(), LocalVariant::R1).unwrap();
        prop_assert_eq!(l.cols(), 51);
        prop_assert!(l.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn r1_endpoints() {
    let ranges = JointRangeTable::default();
    let r = ranges.get("LeftElbow").axis(0);
    assert_eq!(ranges.normalize("LeftElbow", 0, r[0]), 0.0);
    assert_eq!(ranges.normalize("LeftElbow", 0, r[1]), 1.0);
}

#[test]
fn label_is_carried() {
    let s = &synth_samples()[0];
    let cfg = ExtractConfig::new("R0".parse().unwrap());
    let w = build_feature_window(&s.skeleton, &s.motion, s.key_frame, AffectLabel::Defeated, "x", &cfg).unwrap();
    assert_eq!(w.label, AffectLabel::Defeated);
    assert_eq!(w.local.unwrap().cols(), 51);
}
