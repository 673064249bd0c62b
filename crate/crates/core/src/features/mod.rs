//! Temporal local (per-frame) and temporal global (per-window) features.
//!
//! Local rows are `[R block | M1 block]` where the R block holds the Euler
//! angles of the schema's rotation joints (raw for R0, range-normalized for
//! R1) and the M1 block holds the posture descriptors, their frame-to-frame
//! deltas and the limb angular speeds. The global vector (M0) holds
//! statistics of the M1 series over the whole window.

mod descriptors;
pub mod io;
mod ranges;
mod schema;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use descriptors::posture_descriptors;
pub use ranges::{JointRange, JointRangeTable};
pub use schema::{Descriptor, FeatureSchema, Landmarks, Stat};

use crate::bvh::{forward_kinematics, Motion, Skeleton};
use crate::matrix::Matrix;
use crate::{AffectLabel, Error, Result};
use descriptors::ResolvedSchema;

/// Frames before and after the key pose.
pub const DEFAULT_RADIUS: usize = 50;

/// Content of the per-frame (recurrent branch) input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LocalVariant {
    R0,
    R1,
    M1,
    R0M1,
    R1M1,
}

impl LocalVariant {
    /// `Some(normalized)` if the variant carries a rotation block.
    pub fn rotations(self) -> Option<bool> {
        match self {
            LocalVariant::R0 | LocalVariant::R0M1 => Some(false),
            LocalVariant::R1 | LocalVariant::R1M1 => Some(true),
            LocalVariant::M1 => None,
        }
    }

    pub fn has_motion(self) -> bool {
        matches!(self, LocalVariant::M1 | LocalVariant::R0M1 | LocalVariant::R1M1)
    }

    pub fn width(self, schema: &FeatureSchema) -> usize {
        self.rotations().map_or(0, |_| schema.rotation_width())
            + if self.has_motion() {
                schema.motion_width()
            } else {
                0
            }
    }

    pub fn name(self) -> &'static str {
        match self {
            LocalVariant::R0 => "R0",
            LocalVariant::R1 => "R1",
            LocalVariant::M1 => "M1",
            LocalVariant::R0M1 => "R0+M1",
            LocalVariant::R1M1 => "R1+M1",
        }
    }
}

impl FromStr for LocalVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_uppercase().as_str() {
            "R0" => LocalVariant::R0,
            "R1" => LocalVariant::R1,
            "M1" => LocalVariant::M1,
            "R0+M1" => LocalVariant::R0M1,
            "R1+M1" => LocalVariant::R1M1,
            other => return Err(Error::Config(format!("unknown local feature variant `{other}`"))),
        })
    }
}

/// Which feature blocks a sample carries: an optional local variant for
/// the recurrent branch and/or the global vector for the MLP branch.
/// Serialized as its display name, e.g. `"R1+M1,M0"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FeatureSet {
    pub local: Option<LocalVariant>,
    pub global: bool,
}

impl FeatureSet {
    pub fn new(local: Option<LocalVariant>, global: bool) -> Result<Self> {
        if local.is_none() && !global {
            return Err(Error::Config("feature set selects no features".into()));
        }
        Ok(FeatureSet { local, global })
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.local, self.global) {
            (Some(l), true) => write!(f, "{},M0", l.name()),
            (Some(l), false) => f.write_str(l.name()),
            (None, _) => f.write_str("M0"),
        }
    }
}

impl TryFrom<String> for FeatureSet {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FeatureSet> for String {
    fn from(set: FeatureSet) -> String {
        set.to_string()
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut local = None;
        let mut global = false;
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part.eq_ignore_ascii_case("M0") {
                global = true;
            } else if local.replace(part.parse()?).is_some() {
                return Err(Error::Config(format!("feature set `{s}` names two local variants")));
            }
        }
        FeatureSet::new(local, global)
    }
}

/// Features of one labelled sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureWindow {
    pub source_id: String,
    pub label: AffectLabel,
    pub set: FeatureSet,
    /// `T x d_local`, present when the set has a local variant.
    pub local: Option<Matrix>,
    /// Present when the set includes M0.
    pub global: Option<Vec<f64>>,
}

/// Per-frame series over a window, computed once and shared by the local
/// and global feature builders.
struct Series {
    descriptors: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
    speeds: Vec<Vec<f64>>,
    /// Euler angles (X, Y, Z) of the rotation joints, per frame.
    rotations: Vec<Vec<[f64; 3]>>,
}

fn wrapped_delta(from: f64, to: f64) -> f64 {
    let d = to - from;
    d - 360.0 * (d / 360.0).round()
}

impl Series {
    fn compute(skeleton: &Skeleton, window: &Motion, schema: &FeatureSchema) -> Result<Self> {
        let t_len = window.frame_count();
        if t_len < 2 {
            return Err(Error::ShapeMismatch(format!(
                "feature window needs at least 2 frames, got {t_len}"
            )));
        }
        if window.channel_count() != skeleton.channel_count() {
            return Err(Error::ShapeMismatch(
                "motion channel count differs from the skeleton".into(),
            ));
        }
        let resolved = ResolvedSchema::new(schema, skeleton)?;
        let poses: Vec<_> = window
            .frames()
            .map(|f| forward_kinematics(skeleton, f))
            .collect();
        let descriptors = poses
            .iter()
            .map(|p| resolved.descriptors(schema, p, &poses[0]))
            .collect::<Result<Vec<_>>>()?;

        let mut deltas = Vec::with_capacity(t_len);
        let mut speeds = Vec::with_capacity(t_len);
        for t in 0..t_len - 1 {
            deltas.push(
                descriptors[t + 1]
                    .iter()
                    .zip(&descriptors[t])
                    .map(|(b, a)| b - a)
                    .collect::<Vec<_>>(),
            );
            speeds.push(
                resolved
                    .limbs
                    .iter()
                    .map(|&j| {
                        (0..3)
                            .map(|a| {
                                wrapped_delta(poses[t].rotations[j][a], poses[t + 1].rotations[j][a])
                                    .abs()
                            })
                            .sum::<f64>()
                    })
                    .collect::<Vec<_>>(),
            );
        }
        // the last frame has no successor; it repeats the previous pair's values
        deltas.push(deltas[t_len - 2].clone());
        speeds.push(speeds[t_len - 2].clone());

        let rotations = poses
            .iter()
            .map(|p| resolved.rotation_joints.iter().map(|&j| p.rotations[j]).collect())
            .collect();
        Ok(Series {
            descriptors,
            deltas,
            speeds,
            rotations,
        })
    }

    fn local(&self, schema: &FeatureSchema, ranges: &JointRangeTable, variant: LocalVariant) -> Matrix {
        let width = variant.width(schema);
        let mut out = Matrix::zeros(self.descriptors.len(), width);
        for t in 0..self.descriptors.len() {
            let row = out.row_mut(t);
            let mut k = 0;
            if let Some(normalized) = variant.rotations() {
                for (name, angles) in schema.rotation_joints.iter().zip(&self.rotations[t]) {
                    for (axis, &deg) in angles.iter().enumerate() {
                        row[k] = if normalized {
                            ranges.normalize(name, axis, deg)
                        } else {
                            deg
                        };
                        k += 1;
                    }
                }
            }
            if variant.has_motion() {
                for v in self.descriptors[t]
                    .iter()
                    .chain(&self.deltas[t])
                    .chain(&self.speeds[t])
                {
                    row[k] = *v;
                    k += 1;
                }
            }
            debug_assert_eq!(k, width);
        }
        out
    }

    fn global(&self, schema: &FeatureSchema) -> Vec<f64> {
        let mut out = Vec::with_capacity(schema.global_width());
        for block in [&self.descriptors, &self.speeds, &self.deltas] {
            let width = block[0].len();
            for f in 0..width {
                let column: Vec<f64> = block.iter().map(|row| row[f]).collect();
                out.extend(schema.stats.iter().map(|s| s.apply(&column)));
            }
        }
        out
    }
}

/// Per-frame feature rows of `window` for the given variant.
pub fn local_features(
    skeleton: &Skeleton,
    window: &Motion,
    schema: &FeatureSchema,
    ranges: &JointRangeTable,
    variant: LocalVariant,
) -> Result<Matrix> {
    Ok(Series::compute(skeleton, window, schema)?.local(schema, ranges, variant))
}

/// Window-level statistics: descriptors, limb angular speeds, then
/// descriptor deltas, each followed by the schema's statistics.
pub fn global_features(skeleton: &Skeleton, window: &Motion, schema: &FeatureSchema) -> Result<Vec<f64>> {
    Ok(Series::compute(skeleton, window, schema)?.global(schema))
}

#[derive(Debug, Clone)]
pub struct ExtractConfig {
    pub schema: FeatureSchema,
    pub ranges: JointRangeTable,
    pub radius: usize,
    pub set: FeatureSet,
}

impl ExtractConfig {
    pub fn new(set: FeatureSet) -> Self {
        ExtractConfig {
            schema: FeatureSchema::default(),
            ranges: JointRangeTable::default(),
            radius: DEFAULT_RADIUS,
            set,
        }
    }
}

/// Windows `motion` around `key_frame` and extracts the configured features.
pub fn build_feature_window(
    skeleton: &Skeleton,
    motion: &Motion,
    key_frame: usize,
    label: AffectLabel,
    source_id: &str,
    config: &ExtractConfig,
) -> Result<FeatureWindow> {
    let window = motion.window_around(key_frame, config.radius)?;
    let series = Series::compute(skeleton, &window, &config.schema)?;
    Ok(FeatureWindow {
        source_id: source_id.to_string(),
        label,
        set: config.set,
        local: config
            .set
            .local
            .map(|v| series.local(&config.schema, &config.ranges, v)),
        global: config.set.global.then(|| series.global(&config.schema)),
    })
}
