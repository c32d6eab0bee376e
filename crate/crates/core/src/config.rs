//! Run configuration: one TOML file, overridable from the command line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cost::{self, standard_tiers, TierSpec, DEFAULT_ALPHA};
use crate::data::SynthParams;
use crate::detectors::{default_hyper, standard_specs, ModelSpec};
use crate::error::{Error, Result};
use crate::nn::TrainHyper;
use crate::policy::PolicyTrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DataSource {
    /// Generated by `gen-data` into `<out>/data/`.
    Synthetic(SynthParams),
    /// One value per line; optional labels file with one 0/1 per day.
    Csv {
        path: PathBuf,
        #[serde(default)]
        labels: Option<PathBuf>,
    },
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic(SynthParams::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub learning_rate: f64,
    pub l2_lambda: f64,
    pub dropout_rate: f64,
    /// Epoch budget for AE-IoT, AE-Edge, AE-Cloud.
    pub epochs: [usize; 3],
}

impl Default for DetectorConfig {
    fn default() -> Self {
        let h = default_hyper(1, 0);
        let specs = standard_specs();
        Self {
            learning_rate: h.learning_rate,
            l2_lambda: h.l2_lambda,
            dropout_rate: h.dropout_rate,
            epochs: [specs[0].epochs, specs[1].epochs, specs[2].epochs],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Master seed for detector initialization, splits and policy training.
    /// Synthetic data has its own `data.seed`.
    pub seed: u64,
    pub alpha: f64,
    pub out_dir: PathBuf,
    pub data: DataSource,
    pub tiers: Vec<TierSpec>,
    pub detectors: DetectorConfig,
    pub policy: PolicyTrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            alpha: DEFAULT_ALPHA,
            out_dir: PathBuf::from("hec-run"),
            data: DataSource::default(),
            tiers: standard_tiers().to_vec(),
            detectors: DetectorConfig::default(),
            policy: PolicyTrainConfig::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub alpha: Option<f64>,
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Reads `path` if given (defaults otherwise) and applies overrides.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg: RunConfig = match path {
            Some(p) => crate::io::read_toml(p)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = overrides.seed {
            cfg.seed = seed;
        }
        if let Some(alpha) = overrides.alpha {
            cfg.alpha = alpha;
        }
        if let Some(out) = &overrides.out_dir {
            cfg.out_dir = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        cost::validate_alpha(self.alpha)?;
        cost::validate_tiers(&self.tiers)?;
        if self.tiers.len() != 3 {
            return Err(Error::InvalidArgument(format!(
                "three tiers are required (one per detector), got {}",
                self.tiers.len()
            )));
        }
        self.policy.validate()?;
        for k in 0..3 {
            self.detector_hyper(k).validate()?;
        }
        if let DataSource::Synthetic(p) = &self.data {
            if p.anomalous_weeks > p.weeks || p.weeks == 0 {
                return Err(Error::InvalidArgument(
                    "invalid synthetic week counts".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn detector_specs(&self) -> [ModelSpec; 3] {
        let mut specs = standard_specs();
        for (spec, &epochs) in specs.iter_mut().zip(&self.detectors.epochs) {
            spec.epochs = epochs;
        }
        specs
    }

    pub fn detector_hyper(&self, k: usize) -> TrainHyper {
        TrainHyper {
            learning_rate: self.detectors.learning_rate,
            l2_lambda: self.detectors.l2_lambda,
            dropout_rate: self.detectors.dropout_rate,
            epochs: self.detectors.epochs[k],
            seed: self.seed.wrapping_mul(1_000_003).wrapping_add(k as u64),
        }
    }

    /// Policy settings with `policy.seed` offset by the master seed.
    pub fn policy_config(&self) -> PolicyTrainConfig {
        PolicyTrainConfig {
            seed: self.policy.seed.wrapping_add(self.seed),
            ..self.policy
        }
    }

    pub fn synth_params(&self) -> Option<SynthParams> {
        match &self.data {
            DataSource::Synthetic(p) => Some(*p),
            DataSource::Csv { .. } => None,
        }
    }

    pub fn split_seed(&self) -> u64 {
        self.seed
    }

    pub fn tiers(&self) -> Vec<TierSpec> {
        self.tiers.clone()
    }
}
