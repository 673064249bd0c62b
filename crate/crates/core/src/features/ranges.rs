use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bvh::{Motion, Skeleton};
use crate::{Error, Result};

/// Movement range of one joint, `[min, max]` degrees per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointRange {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub z: [f64; 2],
}

impl JointRange {
    pub const FULL: JointRange = JointRange {
        x: [-180.0, 180.0],
        y: [-180.0, 180.0],
        z: [-180.0, 180.0],
    };

    pub fn axis(&self, axis: usize) -> [f64; 2] {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    fn axis_mut(&mut self, axis: usize) -> &mut [f64; 2] {
        match axis {
            0 => &mut self.x,
            1 => &mut self.y,
            _ => &mut self.z,
        }
    }
}

/// Per-joint rotation limits. Joints without an entry use the fallback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointRangeTable {
    #[serde(default = "full_range")]
    pub fallback: JointRange,
    pub joints: BTreeMap<String, JointRange>,
}

fn full_range() -> JointRange {
    JointRange::FULL
}

impl Default for JointRangeTable {
    fn default() -> Self {
        JointRangeTable::from_toml(include_str!("../../data/joint_ranges.toml"))
            .expect("shipped joint range table is valid")
    }
}

impl JointRangeTable {
    pub fn from_toml(text: &str) -> Result<Self> {
        let table: JointRangeTable =
            toml::from_str(text).map_err(|e| Error::Config(format!("joint ranges: {e}")))?;
        table.validate()?;
        Ok(table)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("range table serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let entries = std::iter::once(("<fallback>", &self.fallback))
            .chain(self.joints.iter().map(|(k, v)| (k.as_str(), v)));
        for (name, r) in entries {
            for axis in 0..3 {
                let [lo, hi] = r.axis(axis);
                if !(lo < hi) {
                    return Err(Error::Config(format!(
                        "joint range for `{name}` axis {axis} is empty ({lo} .. {hi})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, joint: &str) -> &JointRange {
        self.joints.get(joint).unwrap_or(&self.fallback)
    }

    /// Maps an angle into [0, 1] over the joint's range, clamping outliers.
    pub fn normalize(&self, joint: &str, axis: usize, degrees: f64) -> f64 {
        let [lo, hi] = self.get(joint).axis(axis);
        ((degrees - lo) / (hi - lo)).clamp(0.0, 1.0)
    }

    pub fn clamp(&self, joint: &str, axis: usize, degrees: f64) -> f64 {
        let [lo, hi] = self.get(joint).axis(axis);
        degrees.clamp(lo, hi)
    }

    /// Observed min/max of every rotation channel over `motions`, intended
    /// for training splits only. Constant channels are widened by `margin`
    /// on each side so every range stays non-empty.
    pub fn from_motions<'a>(
        skeleton: &Skeleton,
        motions: impl IntoIterator<Item = &'a Motion>,
        margin: f64,
    ) -> Result<Self> {
        let mut joints: BTreeMap<String, JointRange> = BTreeMap::new();
        let mut seen = false;
        for motion in motions {
            if motion.channel_count() != skeleton.channel_count() {
                return Err(Error::ShapeMismatch(
                    "motion does not belong to the skeleton".into(),
                ));
            }
            for frame in motion.frames() {
                for (j, col, channel) in skeleton.rotation_columns() {
                    let name = &skeleton.joint(j).name;
                    let entry = joints.entry(name.clone()).or_insert(JointRange {
                        x: [f64::INFINITY, f64::NEG_INFINITY],
                        y: [f64::INFINITY, f64::NEG_INFINITY],
                        z: [f64::INFINITY, f64::NEG_INFINITY],
                    });
                    let slot = entry.axis_mut(channel.axis());
                    slot[0] = slot[0].min(frame[col]);
                    slot[1] = slot[1].max(frame[col]);
                }
                seen = true;
            }
        }
        if !seen {
            return Err(Error::TooFewSamples("no frames to derive joint ranges from".into()));
        }
        for range in joints.values_mut() {
            for axis in 0..3 {
                let slot = range.axis_mut(axis);
                if !slot[0].is_finite() {
                    *slot = [-180.0, 180.0];
                } else {
                    slot[0] -= margin;
                    slot[1] += margin;
                    if slot[0] >= slot[1] {
                        slot[0] -= 1.0;
                        slot[1] += 1.0;
                    }
                }
            }
        }
        let table = JointRangeTable {
            fallback: JointRange::FULL,
            joints,
        };
        table.validate()?;
        Ok(table)
    }
}
