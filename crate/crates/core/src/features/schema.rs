use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

/// Per-frame posture descriptors, in the order they are emitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Descriptor {
    HandHandDistance,
    LeftHandHeadDistance,
    RightHandHeadDistance,
    LeftHandHipDistance,
    RightHandHipDistance,
    /// Angle between pelvis->neck and world vertical, degrees.
    TorsoLean,
    /// Diagonal of the joint-position bounding box.
    BodyOpenness,
    /// Mean joint distance to the neutral (first) frame of the window.
    PoseDifference,
    /// Mean distance between left joints and mirrored right joints.
    PoseSymmetry,
    /// Signed distance of the left hand from the sagittal plane.
    LeftArmDirectedSymmetry,
    RightArmDirectedSymmetry,
    /// Hand-hand distance over shoulder-shoulder distance.
    ArmsShouldersOpenness,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stat {
    Mean,
    /// Population standard deviation.
    Std,
    Min,
    Max,
}

impl Stat {
    pub fn apply(self, values: &[f64]) -> f64 {
        let n = values.len() as f64;
        // Sums run over offsets from the first value, so a constant series
        // has exactly its value as mean and zero spread.
        let shift = values.first().copied().unwrap_or(0.0);
        let offset_mean = values.iter().map(|v| v - shift).sum::<f64>() / n;
        match self {
            Stat::Mean => shift + offset_mean,
            Stat::Std => (values
                .iter()
                .map(|v| (v - shift - offset_mean).powi(2))
                .sum::<f64>()
                / n)
                .sqrt(),
            Stat::Min => values.iter().copied().fold(f64::INFINITY, f64::min),
            Stat::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Named body landmarks the descriptors are computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landmarks {
    pub head: String,
    pub neck: String,
    pub pelvis: String,
    pub left_hand: String,
    pub right_hand: String,
    pub left_shoulder: String,
    pub right_shoulder: String,
    pub left_hip: String,
    pub right_hip: String,
}

/// Which descriptors, joints and statistics make up the feature vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub posture_descriptors: Vec<Descriptor>,
    /// Joints whose angular speed is tracked.
    pub limb_joints: Vec<String>,
    pub stats: Vec<Stat>,
    /// Joints whose Euler angles form the R0/R1 blocks.
    pub rotation_joints: Vec<String>,
    pub landmarks: Landmarks,
    /// Left/right joint pairs used by the pose-symmetry descriptor.
    pub symmetric_pairs: Vec<(String, String)>,
}

impl Default for FeatureSchema {
    fn default() -> Self {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        FeatureSchema {
            posture_descriptors: vec![
                Descriptor::HandHandDistance,
                Descriptor::LeftHandHeadDistance,
                Descriptor::RightHandHeadDistance,
                Descriptor::LeftHandHipDistance,
                Descriptor::RightHandHipDistance,
                Descriptor::TorsoLean,
                Descriptor::BodyOpenness,
                Descriptor::PoseDifference,
                Descriptor::PoseSymmetry,
                Descriptor::LeftArmDirectedSymmetry,
                Descriptor::RightArmDirectedSymmetry,
                Descriptor::ArmsShouldersOpenness,
            ],
            limb_joints: s(&[
                "LeftShoulder",
                "LeftElbow",
                "RightShoulder",
                "RightElbow",
                "LeftHip",
                "LeftKnee",
                "RightHip",
                "RightKnee",
                "Head",
            ]),
            stats: vec![Stat::Mean, Stat::Std, Stat::Min, Stat::Max],
            rotation_joints: s(&[
                "Hips",
                "Chest",
                "Collar",
                "Neck",
                "Head",
                "LeftShoulder",
                "LeftElbow",
                "LeftWrist",
                "RightShoulder",
                "RightElbow",
                "RightWrist",
                "LeftHip",
                "LeftKnee",
                "LeftAnkle",
                "RightHip",
                "RightKnee",
                "RightAnkle",
            ]),
            landmarks: Landmarks {
                head: "Head".into(),
                neck: "Neck".into(),
                pelvis: "Hips".into(),
                left_hand: "LeftWrist".into(),
                right_hand: "RightWrist".into(),
                left_shoulder: "LeftShoulder".into(),
                right_shoulder: "RightShoulder".into(),
                left_hip: "LeftHip".into(),
                right_hip: "RightHip".into(),
            },
            symmetric_pairs: [
                ("LeftShoulder", "RightShoulder"),
                ("LeftElbow", "RightElbow"),
                ("LeftWrist", "RightWrist"),
                ("LeftHip", "RightHip"),
                ("LeftKnee", "RightKnee"),
                ("LeftAnkle", "RightAnkle"),
            ]
            .iter()
            .map(|(l, r)| (l.to_string(), r.to_string()))
            .collect(),
        }
    }
}

impl FeatureSchema {
    /// Width of the per-frame M1 block: descriptors, their deltas, limb speeds.
    pub fn motion_width(&self) -> usize {
        2 * self.posture_descriptors.len() + self.limb_joints.len()
    }

    pub fn rotation_width(&self) -> usize {
        3 * self.rotation_joints.len()
    }

    pub fn global_width(&self) -> usize {
        self.motion_width() * self.stats.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.posture_descriptors.is_empty() || self.stats.is_empty() {
            return Err(Error::Config(
                "feature schema needs at least one descriptor and one statistic".into(),
            ));
        }
        Ok(())
    }

    /// Stable content hash; saved models record it so features built from a
    /// different schema are refused.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("schema serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let schema: FeatureSchema =
            toml::from_str(text).map_err(|e| Error::Config(format!("feature schema: {e}")))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("schema serializes")
    }
}
