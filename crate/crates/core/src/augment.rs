//! Synthetic samples from small rotation offsets near the key posture.
//!
//! Every rotation channel of every frame within `affected_radius` of the key
//! frame receives an independent offset, and the result is clamped to the
//! joint's range. Root translation is never touched. Class balancing draws
//! origins round-robin and gives each synthetic its own random stream, so the
//! output does not depend on generation order.

use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bvh::{Motion, Skeleton};
use crate::dataset::{class_counts, Sample};
use crate::features::JointRangeTable;
use crate::rng::{key_of, stream};
use crate::{AffectLabel, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Normal with std `sigma_deg`, redrawn until inside `±max_offset_deg`.
    TruncatedGaussian,
    /// Uniform on `[-max_offset_deg, max_offset_deg]`.
    Uniform,
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "truncated_gaussian" | "gaussian" => Ok(NoiseKind::TruncatedGaussian),
            "uniform" => Ok(NoiseKind::Uniform),
            other => Err(Error::Config(format!("unknown noise kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub max_offset_deg: f64,
    pub sigma_deg: f64,
    pub target_total: usize,
    pub seed: u64,
    pub affected_radius: usize,
    pub noise: NoiseKind,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            max_offset_deg: 5.0,
            sigma_deg: 2.5,
            target_total: 250,
            seed: 0,
            affected_radius: 50,
            noise: NoiseKind::TruncatedGaussian,
        }
    }
}

impl AugmentConfig {
    /// `sigma_deg == 0` is accepted and yields unperturbed copies.
    pub fn validate(&self) -> Result<()> {
        if !(self.max_offset_deg > 0.0) || !self.max_offset_deg.is_finite() {
            return Err(Error::Config("max_offset_deg must be positive".into()));
        }
        if !(self.sigma_deg >= 0.0) || !self.sigma_deg.is_finite() {
            return Err(Error::Config("sigma_deg must be non-negative".into()));
        }
        Ok(())
    }

    /// One offset in degrees.
    pub fn draw_offset<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.noise {
            NoiseKind::Uniform => rng.random_range(-self.max_offset_deg..=self.max_offset_deg),
            NoiseKind::TruncatedGaussian => {
                if self.sigma_deg == 0.0 {
                    return 0.0;
                }
                let normal = Normal::new(0.0, self.sigma_deg).expect("validated sigma");
                loop {
                    let v: f64 = normal.sample(rng);
                    if v.abs() <= self.max_offset_deg {
                        return v;
                    }
                }
            }
        }
    }
}

/// Perturbs the rotation channels of frames within the affected radius of
/// `key_frame`, then clamps them to `ranges`.
pub fn perturb_sequence<R: Rng + ?Sized>(
    skeleton: &Skeleton,
    motion: &Motion,
    key_frame: usize,
    cfg: &AugmentConfig,
    ranges: &JointRangeTable,
    rng: &mut R,
) -> Result<Motion> {
    cfg.validate()?;
    let frames = motion.frame_count();
    if key_frame >= frames {
        return Err(Error::Config(format!(
            "key frame {key_frame} outside {frames} frames"
        )));
    }
    let columns: Vec<(usize, &str, usize)> = skeleton
        .rotation_columns()
        .map(|(j, col, ch)| (col, skeleton.joint(j).name.as_str(), ch.axis()))
        .collect();
    let mut out = motion.clone();
    let first = key_frame.saturating_sub(cfg.affected_radius);
    let last = (key_frame + cfg.affected_radius).min(frames - 1);
    for t in first..=last {
        let frame = out.frame_mut(t);
        for &(col, joint, axis) in &columns {
            let shifted = frame[col] + cfg.draw_offset(rng);
            frame[col] = ranges.clamp(joint, axis, shifted);
        }
    }
    Ok(out)
}

/// Synthetic count per class so that class totals reach `target_total` and
/// differ by at most one. Leftover units go to the classes with the most
/// originals (ties to the lower class index).
pub fn balance_plan(
    counts: [usize; AffectLabel::COUNT],
    target_total: usize,
) -> Result<[usize; AffectLabel::COUNT]> {
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::EmptyClass(AffectLabel::ALL[c].to_string()));
    }
    let total: usize = counts.iter().sum();
    if target_total < total {
        return Err(Error::Unbalanceable(format!(
            "target total {target_total} is below the {total} originals"
        )));
    }
    let k = AffectLabel::COUNT;
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by_key(|&c| (std::cmp::Reverse(counts[c]), c));
    let mut targets = [target_total / k; AffectLabel::COUNT];
    for &c in order.iter().take(target_total % k) {
        targets[c] += 1;
    }
    let mut plan = [0; AffectLabel::COUNT];
    for c in 0..k {
        if counts[c] > targets[c] {
            return Err(Error::Unbalanceable(format!(
                "class {} has {} originals but its target is {}",
                AffectLabel::ALL[c],
                counts[c],
                targets[c]
            )));
        }
        plan[c] = targets[c] - counts[c];
    }
    Ok(plan)
}

/// Id of the `replica`-th synthetic derived from `origin`.
pub fn synthetic_id(origin: &str, replica: usize) -> String {
    format!("{origin}~syn{replica}")
}

/// Synthetics that balance `originals` to `cfg.target_total`, sorted by
/// origin id then replica.
pub fn balance_dataset(
    originals: &[Sample],
    cfg: &AugmentConfig,
    ranges: &JointRangeTable,
) -> Result<Vec<Sample>> {
    cfg.validate()?;
    if let Some(s) = originals.iter().find(|s| s.is_synthetic()) {
        return Err(Error::Config(format!("`{}` is not an original sample", s.id)));
    }
    let plan = balance_plan(class_counts(originals), cfg.target_total)?;
    let mut jobs: Vec<(&Sample, usize)> = Vec::new();
    for label in AffectLabel::ALL {
        let mut pool: Vec<&Sample> = originals.iter().filter(|s| s.label == label).collect();
        pool.sort_by(|a, b| a.id.cmp(&b.id));
        for j in 0..plan[label.index()] {
            jobs.push((pool[j % pool.len()], j / pool.len()));
        }
    }
    jobs.sort_by(|a, b| (a.0.id.as_str(), a.1).cmp(&(b.0.id.as_str(), b.1)));
    jobs.par_iter()
        .map(|&(origin, replica)| {
            let mut rng = stream(cfg.seed, &[key_of(&origin.id), replica as u64]);
            let motion = perturb_sequence(
                &origin.skeleton,
                &origin.motion,
                origin.key_frame,
                cfg,
                ranges,
                &mut rng,
            )?;
            Ok(Sample {
                id: synthetic_id(&origin.id, replica),
                origin: origin.id.clone(),
                label: origin.label,
                key_frame: origin.key_frame,
                skeleton: origin.skeleton.clone(),
                motion,
            })
        })
        .collect()
}
