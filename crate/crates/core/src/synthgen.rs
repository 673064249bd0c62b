//! Labelled synthetic motion with class-dependent dynamics.
//!
//! Each class profile drives sinusoidal joint trajectories on the canonical
//! 17-joint skeleton: `base_amplitude` scales the oscillation, `frequency`
//! sets cycles per clip, `arm_raise_bias` lifts both arms from the hanging
//! rest pose (negative values also slump the trunk and head forward) and
//! `jitter` is the std of per-frame noise. Per-sample amplitude, tempo and
//! phase vary around the profile. All angles are clamped to the default
//! joint range table.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bvh::{Channel, JointSpec, Motion, Skeleton};
use crate::dataset::Sample;
use crate::features::JointRangeTable;
use crate::rng::{key_of, stream};
use crate::{AffectLabel, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthClassProfile {
    pub label: AffectLabel,
    pub base_amplitude: f64,
    pub frequency: f64,
    pub arm_raise_bias: f64,
    pub jitter: f64,
}

impl SynthClassProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_amplitude >= 0.0 && self.jitter >= 0.0 && self.frequency >= 0.0) {
            return Err(Error::Config(format!(
                "profile {}: amplitude, frequency and jitter must be non-negative",
                self.label
            )));
        }
        if !self.arm_raise_bias.is_finite() {
            return Err(Error::Config(format!("profile {}: bad arm bias", self.label)));
        }
        Ok(())
    }
}

/// Static concentration, large raised-arm triumph, agitated frustration and
/// slumped, slow defeat.
pub fn default_profiles() -> Vec<SynthClassProfile> {
    let p = |label, base_amplitude, frequency, arm_raise_bias, jitter| SynthClassProfile {
        label,
        base_amplitude,
        frequency,
        arm_raise_bias,
        jitter,
    };
    vec![
        p(AffectLabel::Concentrating, 3.0, 0.5, 10.0, 0.2),
        p(AffectLabel::Triumphant, 35.0, 2.0, 110.0, 0.8),
        p(AffectLabel::Frustrated, 18.0, 3.0, 35.0, 1.2),
        p(AffectLabel::Defeated, 6.0, 0.8, -15.0, 0.4),
    ]
}

/// Every class gets the same motionless pose: labels carry no signal.
pub fn inseparable_profiles() -> Vec<SynthClassProfile> {
    AffectLabel::ALL
        .iter()
        .map(|&label| SynthClassProfile {
            label,
            base_amplitude: 0.0,
            frequency: 1.0,
            arm_raise_bias: 0.0,
            jitter: 0.0,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub profiles: Vec<SynthClassProfile>,
    pub samples_per_class: usize,
    pub frames: usize,
    pub frame_time: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            profiles: default_profiles(),
            samples_per_class: 30,
            frames: 101,
            frame_time: 1.0 / 30.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        for label in AffectLabel::ALL {
            let n = self.profiles.iter().filter(|p| p.label == label).count();
            if n != 1 {
                return Err(Error::Config(format!(
                    "expected exactly one profile for {label}, found {n}"
                )));
            }
        }
        for p in &self.profiles {
            p.validate()?;
        }
        if self.frames == 0 || !(self.frame_time > 0.0) {
            return Err(Error::Config("frames and frame_time must be positive".into()));
        }
        Ok(())
    }

    fn profile(&self, label: AffectLabel) -> &SynthClassProfile {
        self.profiles.iter().find(|p| p.label == label).expect("validated")
    }
}

const ROOT_HEIGHT: f64 = 90.0;

/// The 17-joint hierarchy used throughout: Y up, Z forward, +X towards the
/// subject's left, arms along ±X in the rest pose, lengths in centimetres.
pub fn canonical_skeleton() -> Skeleton {
    use Channel::*;
    let rot = || vec![Zrotation, Xrotation, Yrotation];
    let mut specs: Vec<JointSpec> = Vec::new();
    let mut add = |name: &str, parent: Option<usize>, offset: [f64; 3], end: Option<[f64; 3]>| {
        specs.push(JointSpec {
            name: name.into(),
            parent,
            offset,
            channels: if parent.is_none() {
                vec![Xposition, Yposition, Zposition, Zrotation, Xrotation, Yrotation]
            } else {
                rot()
            },
            end_site: end,
        });
        specs.len() - 1
    };
    let hips = add("Hips", None, [0.0, 0.0, 0.0], None);
    let chest = add("Chest", Some(hips), [0.0, 20.0, 0.0], None);
    let collar = add("Collar", Some(chest), [0.0, 25.0, 0.0], None);
    let neck = add("Neck", Some(collar), [0.0, 10.0, 0.0], None);
    add("Head", Some(neck), [0.0, 10.0, 0.0], Some([0.0, 15.0, 0.0]));
    for side in [1.0, -1.0] {
        let name = |j: &str| format!("{}{j}", if side > 0.0 { "Left" } else { "Right" });
        let shoulder = add(&name("Shoulder"), Some(collar), [15.0 * side, 0.0, 0.0], None);
        let elbow = add(&name("Elbow"), Some(shoulder), [28.0 * side, 0.0, 0.0], None);
        add(&name("Wrist"), Some(elbow), [25.0 * side, 0.0, 0.0], Some([8.0 * side, 0.0, 0.0]));
    }
    for side in [1.0, -1.0] {
        let name = |j: &str| format!("{}{j}", if side > 0.0 { "Left" } else { "Right" });
        let hip = add(&name("Hip"), Some(hips), [9.0 * side, 0.0, 0.0], None);
        let knee = add(&name("Knee"), Some(hip), [0.0, -42.0, 0.0], None);
        add(&name("Ankle"), Some(knee), [0.0, -40.0, 0.0], Some([0.0, -8.0, 12.0]));
    }
    Skeleton::new(specs).expect("canonical skeleton is valid")
}

/// One animated channel: `base + weight * amplitude * sin(...)`.
struct Track {
    joint: &'static str,
    axis: usize,
    base: f64,
    weight: f64,
}

fn tracks(profile: &SynthClassProfile) -> Vec<Track> {
    let bias = profile.arm_raise_bias;
    let slump = (-bias).max(0.0);
    let t = |joint, axis, base, weight| Track {
        joint,
        axis,
        base,
        weight,
    };
    vec![
        t("Hips", 1, 0.0, 0.3),
        t("Chest", 0, slump, 0.2),
        t("Chest", 1, 0.0, 0.4),
        t("Neck", 0, 0.5 * slump, 0.2),
        t("Head", 0, 0.8 * slump, 0.4),
        t("Head", 1, 0.0, 0.6),
        t("LeftShoulder", 2, -80.0 + bias, 1.0),
        t("LeftShoulder", 0, 0.0, 0.5),
        t("RightShoulder", 2, 80.0 - bias, 1.0),
        t("RightShoulder", 0, 0.0, 0.5),
        t("LeftElbow", 1, -30.0, 0.8),
        t("RightElbow", 1, 30.0, 0.8),
        t("LeftHip", 0, -5.0, 0.1),
        t("RightHip", 0, -5.0, 0.1),
        t("LeftKnee", 0, 5.0, 0.1),
        t("RightKnee", 0, 5.0, 0.1),
    ]
}

/// Column of the rotation channel `axis` of `joint`.
fn column(skeleton: &Skeleton, joint: &str, axis: usize) -> usize {
    let j = skeleton.joint(skeleton.index_of(joint).expect("canonical joint"));
    j.rotation_channels()
        .find(|(_, c)| c.axis() == axis)
        .map(|(col, _)| col)
        .expect("canonical joint rotates on every axis")
}

fn generate_one(
    cfg: &SynthConfig,
    skeleton: &Skeleton,
    ranges: &JointRangeTable,
    label: AffectLabel,
    index: usize,
) -> Result<Sample> {
    let profile = cfg.profile(label);
    let mut rng = stream(cfg.seed, &[key_of("synth"), label.index() as u64, index as u64]);
    let amplitude = profile.base_amplitude * rng.random_range(0.75..1.25);
    let frequency = profile.frequency * rng.random_range(0.9..1.1);
    let tracks = tracks(profile);
    let phases: Vec<f64> = tracks.iter().map(|_| rng.random_range(0.0..TAU)).collect();
    let columns: Vec<usize> = tracks
        .iter()
        .map(|t| column(skeleton, t.joint, t.axis))
        .collect();
    let span = (cfg.frames.max(2) - 1) as f64;
    let mut data = vec![0.0; cfg.frames * skeleton.channel_count()];
    for (t, frame) in data.chunks_exact_mut(skeleton.channel_count()).enumerate() {
        frame[1] = ROOT_HEIGHT;
        let time = t as f64 / span;
        for ((track, &phase), &col) in tracks.iter().zip(&phases).zip(&columns) {
            let wave = (TAU * frequency * time + phase).sin();
            let noise: f64 = rng.sample(StandardNormal);
            let angle = track.base + track.weight * amplitude * wave + profile.jitter * noise;
            frame[col] = ranges.clamp(track.joint, track.axis, angle);
        }
    }
    let motion = Motion::new(cfg.frame_time, skeleton.channel_count(), data)?;
    Ok(Sample::original(
        format!("{}_{index:03}", label.name()),
        label,
        cfg.frames / 2,
        skeleton.clone(),
        motion,
    ))
}

/// `samples_per_class` clips per class on the canonical skeleton, ordered by
/// class then index. The key frame is the clip centre.
pub fn generate_dataset(cfg: &SynthConfig) -> Result<Vec<Sample>> {
    cfg.validate()?;
    let skeleton = canonical_skeleton();
    let ranges = JointRangeTable::default();
    let jobs: Vec<(AffectLabel, usize)> = AffectLabel::ALL
        .iter()
        .flat_map(|&l| (0..cfg.samples_per_class).map(move |i| (l, i)))
        .collect();
    jobs.par_iter()
        .map(|&(label, i)| generate_one(cfg, &skeleton, &ranges, label, i))
        .collect()
}
