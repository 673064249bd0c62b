use super::schema::{Descriptor, FeatureSchema};
use crate::bvh::{PoseFrame, Skeleton};
use crate::{Error, Result};

type V3 = [f64; 3];

fn sub(a: V3, b: V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: V3) -> f64 {
    dot(a, a).sqrt()
}

fn dist(a: V3, b: V3) -> f64 {
    norm(sub(a, b))
}

/// Schema joint names resolved to skeleton indices.
#[derive(Debug, Clone)]
pub(crate) struct ResolvedSchema {
    head: usize,
    neck: usize,
    pelvis: usize,
    left_hand: usize,
    right_hand: usize,
    left_shoulder: usize,
    right_shoulder: usize,
    left_hip: usize,
    right_hip: usize,
    pairs: Vec<(usize, usize)>,
    pub(crate) limbs: Vec<usize>,
    pub(crate) rotation_joints: Vec<usize>,
}

impl ResolvedSchema {
    pub(crate) fn new(schema: &FeatureSchema, skeleton: &Skeleton) -> Result<Self> {
        let l = &schema.landmarks;
        let find = |name: &str| skeleton.require(name);
        Ok(ResolvedSchema {
            head: find(&l.head)?,
            neck: find(&l.neck)?,
            pelvis: find(&l.pelvis)?,
            left_hand: find(&l.left_hand)?,
            right_hand: find(&l.right_hand)?,
            left_shoulder: find(&l.left_shoulder)?,
            right_shoulder: find(&l.right_shoulder)?,
            left_hip: find(&l.left_hip)?,
            right_hip: find(&l.right_hip)?,
            pairs: schema
                .symmetric_pairs
                .iter()
                .map(|(a, b)| Ok((find(a)?, find(b)?)))
                .collect::<Result<_>>()?,
            limbs: schema
                .limb_joints
                .iter()
                .map(|n| find(n))
                .collect::<Result<_>>()?,
            rotation_joints: schema
                .rotation_joints
                .iter()
                .map(|n| find(n))
                .collect::<Result<_>>()?,
        })
    }

    /// Sagittal plane as (point, unit normal): through the hip midpoint,
    /// normal along right hip -> left hip.
    fn sagittal(&self, pose: &PoseFrame) -> Result<(V3, V3)> {
        let l = pose.position(self.left_hip);
        let r = pose.position(self.right_hip);
        let axis = sub(l, r);
        let len = norm(axis);
        if len == 0.0 {
            return Err(Error::DegenerateSkeleton(
                "left and right hips coincide; sagittal plane undefined".into(),
            ));
        }
        let mid = [(l[0] + r[0]) / 2.0, (l[1] + r[1]) / 2.0, (l[2] + r[2]) / 2.0];
        Ok((mid, [axis[0] / len, axis[1] / len, axis[2] / len]))
    }

    pub(crate) fn descriptors(
        &self,
        schema: &FeatureSchema,
        pose: &PoseFrame,
        neutral: &PoseFrame,
    ) -> Result<Vec<f64>> {
        let p = |j: usize| pose.position(j);
        schema
            .posture_descriptors
            .iter()
            .map(|d| {
                Ok(match d {
                    Descriptor::HandHandDistance => dist(p(self.left_hand), p(self.right_hand)),
                    Descriptor::LeftHandHeadDistance => dist(p(self.left_hand), p(self.head)),
                    Descriptor::RightHandHeadDistance => dist(p(self.right_hand), p(self.head)),
                    Descriptor::LeftHandHipDistance => dist(p(self.left_hand), p(self.left_hip)),
                    Descriptor::RightHandHipDistance => {
                        dist(p(self.right_hand), p(self.right_hip))
                    }
                    Descriptor::TorsoLean => {
                        let spine = sub(p(self.neck), p(self.pelvis));
                        let len = norm(spine);
                        if len == 0.0 {
                            0.0
                        } else {
                            (spine[1] / len).clamp(-1.0, 1.0).acos().to_degrees()
                        }
                    }
                    Descriptor::BodyOpenness => {
                        let mut lo = [f64::INFINITY; 3];
                        let mut hi = [f64::NEG_INFINITY; 3];
                        for q in &pose.positions {
                            for a in 0..3 {
                                lo[a] = lo[a].min(q[a]);
                                hi[a] = hi[a].max(q[a]);
                            }
                        }
                        dist(hi, lo)
                    }
                    Descriptor::PoseDifference => {
                        pose.positions
                            .iter()
                            .zip(&neutral.positions)
                            .map(|(a, b)| dist(*a, *b))
                            .sum::<f64>()
                            / pose.positions.len() as f64
                    }
                    Descriptor::PoseSymmetry => {
                        let (mid, n) = self.sagittal(pose)?;
                        if self.pairs.is_empty() {
                            0.0
                        } else {
                            self.pairs
                                .iter()
                                .map(|&(l, r)| {
                                    let q = p(r);
                                    let s = 2.0 * dot(sub(q, mid), n);
                                    let mirrored = [q[0] - s * n[0], q[1] - s * n[1], q[2] - s * n[2]];
                                    dist(p(l), mirrored)
                                })
                                .sum::<f64>()
                                / self.pairs.len() as f64
                        }
                    }
                    Descriptor::LeftArmDirectedSymmetry => {
                        let (mid, n) = self.sagittal(pose)?;
                        dot(sub(p(self.left_hand), mid), n)
                    }
                    Descriptor::RightArmDirectedSymmetry => {
                        let (mid, n) = self.sagittal(pose)?;
                        dot(sub(p(self.right_hand), mid), n)
                    }
                    Descriptor::ArmsShouldersOpenness => {
                        let shoulders = dist(p(self.left_shoulder), p(self.right_shoulder));
                        if shoulders == 0.0 {
                            return Err(Error::DegenerateSkeleton(
                                "shoulder-shoulder distance is zero".into(),
                            ));
                        }
                        dist(p(self.left_hand), p(self.right_hand)) / shoulders
                    }
                })
            })
            .collect()
    }
}

/// Posture descriptors of `pose`, in schema order. `neutral` is the reference
/// pose for the pose-difference descriptor.
pub fn posture_descriptors(
    skeleton: &Skeleton,
    schema: &FeatureSchema,
    pose: &PoseFrame,
    neutral: &PoseFrame,
) -> Result<Vec<f64>> {
    ResolvedSchema::new(schema, skeleton)?.descriptors(schema, pose, neutral)
}
