use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cv::{extract_windows, run_cross_validation, NeuralClassifier};
use super::folds::FoldPlan;
use super::metrics::EvalReport;
use crate::dataset::Sample;
use crate::features::{ExtractConfig, FeatureSet, FeatureWindow};
use crate::neural::{BranchMode, CellKind, TrainConfig};
use crate::Result;

/// One configuration of the comparison grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridCell {
    pub cell: CellKind,
    pub branches: BranchMode,
    pub features: FeatureSet,
    pub augmented: bool,
}

impl fmt::Display for GridCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {}",
            self.cell.name().to_ascii_uppercase(),
            self.branches,
            self.features,
            if self.augmented { "augmented" } else { "base" }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub cell: GridCell,
    pub report: EvalReport,
}

/// Cross-validates every grid cell over one shared fold plan. Base cells
/// drop the synthetic samples; augmented cells keep them for training.
pub fn ablation_matrix(
    samples: &[Sample],
    grid: &[GridCell],
    base: &TrainConfig,
    extract: &ExtractConfig,
    plan: &FoldPlan,
) -> Result<Vec<AblationRow>> {
    let mut cache: BTreeMap<String, Vec<FeatureWindow>> = BTreeMap::new();
    for cell in grid {
        let key = cell.features.to_string();
        if !cache.contains_key(&key) {
            let config = ExtractConfig {
                set: cell.features,
                ..extract.clone()
            };
            cache.insert(key, extract_windows(samples, &config)?);
        }
    }
    grid.par_iter()
        .map(|cell| {
            let all = &cache[&cell.features.to_string()];
            let windows: Vec<FeatureWindow> = all
                .iter()
                .filter(|w| cell.augmented || !plan.is_synthetic(&w.source_id))
                .cloned()
                .collect();
            let classifier = NeuralClassifier {
                config: TrainConfig {
                    cell: cell.cell,
                    branches: cell.branches,
                    ..base.clone()
                },
            };
            Ok(AblationRow {
                cell: *cell,
                report: run_cross_validation(&windows, plan, &classifier)?,
            })
        })
        .collect()
}
