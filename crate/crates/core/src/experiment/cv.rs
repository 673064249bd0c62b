use rayon::prelude::*;

use super::folds::{FoldPlan, Role};
use super::metrics::{EvalReport, PredictionRecord};
use crate::dataset::Sample;
use crate::features::{build_feature_window, ExtractConfig, FeatureWindow};
use crate::neural::{fit, TrainConfig};
use crate::rng::derive_seed;
use crate::{AffectLabel, Error, Result};

/// Trains on one fold's training items and labels its test items.
pub trait Classifier: Sync {
    fn fit_predict(
        &self,
        fold: usize,
        train: &[&FeatureWindow],
        test: &[&FeatureWindow],
    ) -> Result<Vec<AffectLabel>>;
}

/// The two-branch network; each fold trains from a seed derived from the
/// configured seed and the fold index.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralClassifier {
    pub config: TrainConfig,
}

impl Classifier for NeuralClassifier {
    fn fit_predict(
        &self,
        fold: usize,
        train: &[&FeatureWindow],
        test: &[&FeatureWindow],
    ) -> Result<Vec<AffectLabel>> {
        let config = TrainConfig {
            seed: derive_seed(self.config.seed, &[fold as u64]),
            ..self.config.clone()
        };
        let model = fit(train, &config)?;
        Ok(model
            .predict(test)?
            .iter()
            .map(|p| AffectLabel::from_index(p.argmax()).expect("four classes"))
            .collect())
    }
}

/// Feature windows for every sample, in input order.
pub fn extract_windows(samples: &[Sample], config: &ExtractConfig) -> Result<Vec<FeatureWindow>> {
    samples
        .par_iter()
        .map(|s| build_feature_window(&s.skeleton, &s.motion, s.key_frame, s.label, &s.id, config))
        .collect()
}

/// Runs `f` on a pool of `workers` threads (0 = rayon's default).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Trains one model per fold and pools the test predictions.
///
/// Only originals are ever tested. A synthetic trains only in folds where its
/// origin is not under test. Every window must be listed in `plan`.
pub fn run_cross_validation<C: Classifier>(
    windows: &[FeatureWindow],
    plan: &FoldPlan,
    classifier: &C,
) -> Result<EvalReport> {
    for w in windows {
        if plan.fold_of(&w.source_id).is_none() {
            return Err(Error::Config(format!(
                "`{}` is not part of the fold plan",
                w.source_id
            )));
        }
    }
    let per_fold: Vec<Vec<PredictionRecord>> = (0..plan.k())
        .into_par_iter()
        .map(|fold| {
            let mut train = Vec::new();
            let mut test = Vec::new();
            for w in windows {
                match plan.role(&w.source_id, fold) {
                    Some(Role::Train) => train.push(w),
                    Some(Role::Test) => test.push(w),
                    _ => {}
                }
            }
            if test.is_empty() {
                return Ok(Vec::new());
            }
            let predicted = classifier.fit_predict(fold, &train, &test)?;
            if predicted.len() != test.len() {
                return Err(Error::ShapeMismatch(
                    "classifier returned the wrong number of predictions".into(),
                ));
            }
            Ok(test
                .iter()
                .zip(predicted)
                .map(|(w, p)| PredictionRecord {
                    id: w.source_id.clone(),
                    fold,
                    truth: w.label,
                    predicted: p,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(EvalReport::from_predictions(per_fold.concat()))
}
