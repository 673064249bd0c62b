use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::Sample;
use crate::rng::{key_of, stream};
use crate::{AffectLabel, Error, Result};

/// Assignment of originals to `k` folds; synthetics follow their origin.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Vec<String>>,
    /// Synthetic id to the fold of its origin.
    pub synthetic_assignment: BTreeMap<String, usize>,
}

/// Role of one sample when a given fold is held out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Test,
    Train,
    /// Synthetic whose origin is under test.
    Excluded,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    /// Fold holding an original, or the fold a synthetic is tied to.
    pub fn fold_of(&self, id: &str) -> Option<usize> {
        self.synthetic_assignment.get(id).copied().or_else(|| {
            self.folds
                .iter()
                .position(|f| f.binary_search_by(|x| x.as_str().cmp(id)).is_ok())
        })
    }

    pub fn is_synthetic(&self, id: &str) -> bool {
        self.synthetic_assignment.contains_key(id)
    }

    pub fn role(&self, id: &str, test_fold: usize) -> Option<Role> {
        let fold = self.fold_of(id)?;
        Some(match (self.is_synthetic(id), fold == test_fold) {
            (false, true) => Role::Test,
            (true, true) => Role::Excluded,
            (_, false) => Role::Train,
        })
    }
}

/// Stratified random partition of the originals in `samples` into `k` folds.
///
/// Each class is shuffled, classes are concatenated in label order and the
/// result is dealt round-robin, so per-class and total fold sizes both differ
/// by at most one.
pub fn plan_folds(samples: &[Sample], k: usize, seed: u64) -> Result<FoldPlan> {
    let originals: Vec<&Sample> = samples.iter().filter(|s| !s.is_synthetic()).collect();
    if k < 2 || originals.len() < k {
        return Err(Error::TooFewSamples(format!(
            "{} originals cannot fill {k} folds",
            originals.len()
        )));
    }
    let mut rng = stream(seed, &[key_of("folds")]);
    let mut dealt: Vec<&str> = Vec::with_capacity(originals.len());
    for label in AffectLabel::ALL {
        let mut ids: Vec<&str> = originals
            .iter()
            .filter(|s| s.label == label)
            .map(|s| s.id.as_str())
            .collect();
        if ids.is_empty() {
            return Err(Error::EmptyClass(label.to_string()));
        }
        ids.sort_unstable();
        ids.shuffle(&mut rng);
        dealt.extend(ids);
    }
    let mut folds = vec![Vec::new(); k];
    let mut origin_fold = BTreeMap::new();
    for (p, id) in dealt.into_iter().enumerate() {
        folds[p % k].push(id.to_string());
        origin_fold.insert(id, p % k);
    }
    for f in &mut folds {
        f.sort();
    }
    let mut synthetic_assignment = BTreeMap::new();
    for s in samples.iter().filter(|s| s.is_synthetic()) {
        let fold = *origin_fold.get(s.origin.as_str()).ok_or_else(|| {
            Error::Config(format!("{}: origin `{}` is not an original", s.id, s.origin))
        })?;
        synthetic_assignment.insert(s.id.clone(), fold);
    }
    Ok(FoldPlan {
        folds,
        synthetic_assignment,
    })
}
