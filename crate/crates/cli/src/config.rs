//! One TOML file drives every command; flags override individual keys.

use std::path::{Path, PathBuf};

use affect_core::augment::AugmentConfig;
use affect_core::experiment::GridCell;
use affect_core::features::{
    ExtractConfig, FeatureSchema, FeatureSet, JointRangeTable, LocalVariant, DEFAULT_RADIUS,
};
use affect_core::neural::{BranchMode, CellKind, TrainConfig};
use affect_core::synthgen::{inseparable_profiles, SynthConfig};
use affect_core::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Dataset manifest (`manifest.tsv`) of originals.
    pub manifest: Option<PathBuf>,
    pub folds: usize,
    /// Add balanced synthetics to the training folds.
    pub augment: bool,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            manifest: None,
            folds: 10,
            augment: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSection {
    pub set: FeatureSet,
    pub radius: usize,
    /// Alternative schema file; the built-in schema when absent.
    pub schema: Option<PathBuf>,
    /// Alternative joint range table; the built-in table when absent.
    pub ranges: Option<PathBuf>,
}

impl Default for FeatureSection {
    fn default() -> Self {
        FeatureSection {
            set: FeatureSet::new(Some(LocalVariant::R1M1), true).expect("non-empty set"),
            radius: DEFAULT_RADIUS,
            schema: None,
            ranges: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    /// Replace the profiles with the motionless control profiles.
    pub inseparable: bool,
    #[serde(rename = "generator")]
    pub config: SynthConfig,
}

impl Default for SynthSection {
    fn default() -> Self {
        SynthSection {
            inseparable: false,
            config: SynthConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblateSection {
    pub cells: Vec<CellKind>,
    pub branches: Vec<BranchMode>,
    pub features: Vec<FeatureSet>,
    pub augmented: Vec<bool>,
}

impl Default for AblateSection {
    fn default() -> Self {
        AblateSection {
            cells: vec![CellKind::Lstm],
            branches: vec![BranchMode::Both],
            features: vec![FeatureSection::default().set],
            augmented: vec![false, true],
        }
    }
}

impl AblateSection {
    pub fn grid(&self) -> Vec<GridCell> {
        let mut grid = Vec::new();
        for &cell in &self.cells {
            for &branches in &self.branches {
                for &features in &self.features {
                    for &augmented in &self.augmented {
                        grid.push(GridCell {
                            cell,
                            branches,
                            features,
                            augmented,
                        });
                    }
                }
            }
        }
        grid
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    /// Master seed; copied into every section that draws random numbers.
    pub seed: u64,
    pub data: DataSection,
    pub features: FeatureSection,
    pub train: TrainConfig,
    pub augment: AugmentConfig,
    pub synth: SynthSection,
    pub ablate: AblateSection,
}

/// Values given on the command line; each replaces the matching config key.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub variant: Option<String>,
    pub branches: Option<BranchMode>,
    pub cell: Option<CellKind>,
    pub augment: Option<bool>,
    pub data: Option<PathBuf>,
}

impl AppConfig {
    pub fn load(path: Option<&Path>) -> Result<AppConfig> {
        let Some(path) = path else {
            return Ok(AppConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: AppConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        // Relative paths inside the file are relative to the file.
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.data.manifest,
            &mut cfg.features.schema,
            &mut cfg.features.ranges,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(v) = &o.variant {
            self.features.set = if v.contains(',') || v.eq_ignore_ascii_case("M0") {
                v.parse()?
            } else {
                FeatureSet::new(Some(v.parse()?), self.features.set.global)?
            };
        }
        if let Some(b) = o.branches {
            self.train.branches = b;
        }
        if let Some(c) = o.cell {
            self.train.cell = c;
        }
        if let Some(a) = o.augment {
            self.data.augment = a;
        }
        if let Some(d) = &o.data {
            self.data.manifest = Some(d.clone());
        }
        // Absolute paths keep the resolved config valid wherever it is saved.
        for p in [
            &mut self.data.manifest,
            &mut self.features.schema,
            &mut self.features.ranges,
        ]
        .into_iter()
        .flatten()
        {
            *p = std::path::absolute(&*p).map_err(|e| Error::io(&*p, e))?;
        }
        self.train.seed = self.seed;
        self.augment.seed = self.seed;
        self.synth.config.seed = self.seed;
        if self.synth.inseparable {
            self.synth.config.profiles = inseparable_profiles();
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.augment.validate()?;
        self.synth.config.validate()?;
        if self.data.folds < 2 {
            return Err(Error::Config("data.folds must be at least 2".into()));
        }
        Ok(())
    }

    /// Short content hash of the resolved configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(&Sha256::digest(json.as_bytes())[..6])
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn extract(&self) -> Result<ExtractConfig> {
        let schema = match &self.features.schema {
            Some(p) => {
                FeatureSchema::from_toml(&std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?
            }
            None => FeatureSchema::default(),
        };
        Ok(ExtractConfig {
            schema,
            ranges: self.ranges()?,
            radius: self.features.radius,
            set: self.features.set,
        })
    }

    pub fn ranges(&self) -> Result<JointRangeTable> {
        match &self.features.ranges {
            Some(p) => JointRangeTable::from_toml(
                &std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            ),
            None => Ok(JointRangeTable::default()),
        }
    }

    pub fn manifest(&self) -> Result<&Path> {
        self.data
            .manifest
            .as_deref()
            .ok_or_else(|| Error::Config("no dataset: pass --data or set data.manifest".into()))
    }
}
