//! BVH (BioVision Hierarchy) skeletons and motion.
//!
//! A document is parsed into a [`Skeleton`] (joint tree, offsets, channel
//! layout) and a [`Motion`] (one row of channel values per frame). Angles stay
//! in degrees; [`forward_kinematics`] turns a row into world joint positions.

mod fk;
mod parse;
mod write;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

pub use fk::{forward_kinematics, rotation_matrix, Mat3};
pub use parse::{parse_bvh, read_bvh};
pub use write::{write_bvh, write_bvh_file};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Xposition,
    Yposition,
    Zposition,
    Xrotation,
    Yrotation,
    Zrotation,
}

impl Channel {
    /// 0 = X, 1 = Y, 2 = Z.
    pub fn axis(self) -> usize {
        match self {
            Channel::Xposition | Channel::Xrotation => 0,
            Channel::Yposition | Channel::Yrotation => 1,
            Channel::Zposition | Channel::Zrotation => 2,
        }
    }

    pub fn is_rotation(self) -> bool {
        matches!(
            self,
            Channel::Xrotation | Channel::Yrotation | Channel::Zrotation
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::Xposition => "Xposition",
            Channel::Yposition => "Yposition",
            Channel::Zposition => "Zposition",
            Channel::Xrotation => "Xrotation",
            Channel::Yrotation => "Yrotation",
            Channel::Zrotation => "Zrotation",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Channel {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "xposition" => Channel::Xposition,
            "yposition" => Channel::Yposition,
            "zposition" => Channel::Zposition,
            "xrotation" => Channel::Xrotation,
            "yrotation" => Channel::Yrotation,
            "zrotation" => Channel::Zrotation,
            _ => return Err(()),
        })
    }
}

/// One joint of the hierarchy.
#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub name: String,
    pub parent: Option<usize>,
    /// Offset from the parent joint, in BVH length units.
    pub offset: [f64; 3],
    /// Channels in declaration order; rotation order defines Euler composition.
    pub channels: Vec<Channel>,
    pub children: Vec<usize>,
    pub end_site: Option<[f64; 3]>,
    /// Column of this joint's first channel within a motion row.
    pub channel_start: usize,
}

impl Joint {
    pub fn rotation_channels(&self) -> impl Iterator<Item = (usize, Channel)> + '_ {
        self.channels
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_rotation())
            .map(move |(i, &c)| (self.channel_start + i, c))
    }

    pub fn position_channels(&self) -> impl Iterator<Item = (usize, Channel)> + '_ {
        self.channels
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_rotation())
            .map(move |(i, &c)| (self.channel_start + i, c))
    }
}

/// Joint tree in depth-first declaration order; index 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    joints: Vec<Joint>,
    channel_count: usize,
}

/// Joint description used to assemble a [`Skeleton`] programmatically.
#[derive(Debug, Clone)]
pub struct JointSpec {
    pub name: String,
    pub parent: Option<usize>,
    pub offset: [f64; 3],
    pub channels: Vec<Channel>,
    pub end_site: Option<[f64; 3]>,
}

impl Skeleton {
    /// Builds a skeleton, filling in children and channel columns and
    /// checking the hierarchy invariants.
    pub fn new(specs: Vec<JointSpec>) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::InvalidHierarchy("no joints".into()));
        }
        let mut names = HashSet::new();
        let mut joints: Vec<Joint> = Vec::with_capacity(specs.len());
        let mut column = 0;
        for (i, spec) in specs.into_iter().enumerate() {
            match (i, spec.parent) {
                (0, None) => {}
                (0, Some(_)) => {
                    return Err(Error::InvalidHierarchy("root joint has a parent".into()))
                }
                (_, None) => {
                    return Err(Error::InvalidHierarchy(format!(
                        "second root `{}`",
                        spec.name
                    )))
                }
                (_, Some(p)) if p >= i => {
                    return Err(Error::InvalidHierarchy(format!(
                        "joint `{}` declared before its parent",
                        spec.name
                    )))
                }
                _ => {}
            }
            if !names.insert(spec.name.clone()) {
                return Err(Error::InvalidHierarchy(format!(
                    "duplicate joint name `{}`",
                    spec.name
                )));
            }
            let n = spec.channels.len();
            let positions = spec.channels.iter().filter(|c| !c.is_rotation()).count();
            let valid = match (i, n) {
                (0, 6) => positions == 3,
                (_, 3) => positions == 0,
                _ => false,
            };
            if !valid {
                return Err(Error::InvalidHierarchy(format!(
                    "joint `{}` has an invalid channel layout ({n} channels, {positions} positional)",
                    spec.name
                )));
            }
            let mut axes = [false; 6];
            for c in &spec.channels {
                let slot = c.axis() + if c.is_rotation() { 3 } else { 0 };
                if std::mem::replace(&mut axes[slot], true) {
                    return Err(Error::InvalidHierarchy(format!(
                        "joint `{}` repeats channel {c}",
                        spec.name
                    )));
                }
            }
            if let Some(p) = spec.parent {
                joints[p].children.push(i);
            }
            joints.push(Joint {
                name: spec.name,
                parent: spec.parent,
                offset: spec.offset,
                channels: spec.channels,
                children: Vec::new(),
                end_site: spec.end_site,
                channel_start: column,
            });
            column += n;
        }
        Ok(Skeleton {
            joints,
            channel_count: column,
        })
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn joint(&self, index: usize) -> &Joint {
        &self.joints[index]
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    pub fn root(&self) -> &Joint {
        &self.joints[0]
    }

    pub fn channel_count(&self) -> usize {
        self.channel_count
    }

    pub fn rotation_channel_count(&self) -> usize {
        self.joints
            .iter()
            .map(|j| j.rotation_channels().count())
            .sum()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.index_of(name)
            .ok_or_else(|| Error::UnknownJoint(name.to_string()))
    }

    /// Column indices of every rotation channel, with the owning joint.
    pub fn rotation_columns(&self) -> impl Iterator<Item = (usize, usize, Channel)> + '_ {
        self.joints
            .iter()
            .enumerate()
            .flat_map(|(j, joint)| joint.rotation_channels().map(move |(col, c)| (j, col, c)))
    }
}

/// Per-frame channel values, row-major (`frames x channels`).
#[derive(Debug, Clone, PartialEq)]
pub struct Motion {
    frame_time: f64,
    channels: usize,
    data: Vec<f64>,
}

impl Motion {
    pub fn new(frame_time: f64, channels: usize, data: Vec<f64>) -> Result<Self> {
        if !(frame_time > 0.0) || !frame_time.is_finite() {
            return Err(Error::ShapeMismatch(format!(
                "frame time must be positive, got {frame_time}"
            )));
        }
        if channels == 0 || data.is_empty() || data.len() % channels != 0 {
            return Err(Error::ShapeMismatch(format!(
                "{} values do not form whole frames of {channels} channels",
                data.len()
            )));
        }
        Ok(Motion {
            frame_time,
            channels,
            data,
        })
    }

    pub fn from_frames(frame_time: f64, frames: &[Vec<f64>]) -> Result<Self> {
        let channels = frames.first().map_or(0, Vec::len);
        if frames.iter().any(|f| f.len() != channels) {
            return Err(Error::ShapeMismatch("ragged frames".into()));
        }
        Motion::new(frame_time, channels, frames.concat())
    }

    pub fn frame_time(&self) -> f64 {
        self.frame_time
    }

    pub fn channel_count(&self) -> usize {
        self.channels
    }

    pub fn frame_count(&self) -> usize {
        self.data.len() / self.channels
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.channels..(t + 1) * self.channels]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.data[t * self.channels..(t + 1) * self.channels]
    }

    pub fn frames(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.channels)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// `2 * radius + 1` frames centred on `center`; indices past either end
    /// repeat the first or last frame.
    pub fn window_around(&self, center: usize, radius: usize) -> Result<Motion> {
        let n = self.frame_count();
        if center >= n {
            return Err(Error::ShapeMismatch(format!(
                "key frame {center} outside a {n}-frame sequence"
            )));
        }
        let mut data = Vec::with_capacity((2 * radius + 1) * self.channels);
        for k in 0..=2 * radius {
            let t = (center + k).saturating_sub(radius).min(n - 1);
            data.extend_from_slice(self.frame(t));
        }
        Ok(Motion {
            frame_time: self.frame_time,
            channels: self.channels,
            data,
        })
    }

    /// Adds `delta` to the root translation channels of every frame.
    pub fn translate_root(&mut self, skeleton: &Skeleton, delta: [f64; 3]) {
        let cols: Vec<(usize, usize)> = skeleton
            .root()
            .position_channels()
            .map(|(col, c)| (col, c.axis()))
            .collect();
        for t in 0..self.frame_count() {
            let row = self.frame_mut(t);
            for &(col, axis) in &cols {
                row[col] += delta[axis];
            }
        }
    }
}

/// World-space joint positions and per-joint Euler angles for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseFrame {
    pub positions: Vec<[f64; 3]>,
    /// Degrees about X, Y and Z (zero for axes without a channel).
    pub rotations: Vec<[f64; 3]>,
}

impl PoseFrame {
    pub fn position(&self, joint: usize) -> [f64; 3] {
        self.positions[joint]
    }
}
