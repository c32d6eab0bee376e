//! The three autoencoder detectors, one per tier, and their training.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{WeekWindow, WEEK_LEN};
use crate::error::{Error, Result};
use crate::nn::{self, Activation, LayerSpec, Network, TrainHyper};
use crate::scoring::{DayVerdict, ErrorModel};

/// Inference FLOP charged per parameter. With this constant the printed
/// architectures land within 1% of the published FLOP figures
/// (1.35M / 2.93M / 5.41M).
pub const FLOP_PER_PARAM: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DetectorKind {
    #[serde(rename = "AE-IoT")]
    AeIot,
    #[serde(rename = "AE-Edge")]
    AeEdge,
    #[serde(rename = "AE-Cloud")]
    AeCloud,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 3] = [
        DetectorKind::AeIot,
        DetectorKind::AeEdge,
        DetectorKind::AeCloud,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::AeIot => "AE-IoT",
            DetectorKind::AeEdge => "AE-Edge",
            DetectorKind::AeCloud => "AE-Cloud",
        }
    }

    /// Directory name of the persisted bundle.
    pub fn slug(self) -> &'static str {
        match self {
            DetectorKind::AeIot => "ae-iot",
            DetectorKind::AeEdge => "ae-edge",
            DetectorKind::AeCloud => "ae-cloud",
        }
    }

    /// Zero-based tier the detector is deployed on.
    pub fn tier(self) -> usize {
        match self {
            DetectorKind::AeIot => 0,
            DetectorKind::AeEdge => 1,
            DetectorKind::AeCloud => 2,
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DetectorKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s) || k.slug() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown detector {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: DetectorKind,
    /// Units per layer, input first.
    pub dims: Vec<usize>,
    pub epochs: usize,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dims.len() < 2 {
            return Err(Error::Spec(
                "an autoencoder needs at least two layers of units".into(),
            ));
        }
        if self.dims[0] != WEEK_LEN || self.dims[self.dims.len() - 1] != WEEK_LEN {
            return Err(Error::Spec(format!(
                "autoencoder input and output must have {WEEK_LEN} units"
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Spec("epochs must be positive".into()));
        }
        nn::validate_spec(&self.layer_specs())
    }

    /// `tanh` on every hidden layer, identity output.
    pub fn layer_specs(&self) -> Vec<LayerSpec> {
        nn::chain(&self.dims, Activation::Tanh, Activation::Identity)
    }

    pub fn param_count(&self) -> usize {
        nn::param_count(&self.layer_specs())
    }

    pub fn flop(&self) -> usize {
        flop_estimate(self)
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }
}

pub fn flop_estimate(spec: &ModelSpec) -> usize {
    FLOP_PER_PARAM * spec.param_count()
}

/// AE-IoT, AE-Edge and AE-Cloud with their full epoch budgets.
pub fn standard_specs() -> [ModelSpec; 3] {
    [
        ModelSpec {
            kind: DetectorKind::AeIot,
            dims: vec![672, 201, 672],
            epochs: 4000,
        },
        ModelSpec {
            kind: DetectorKind::AeEdge,
            dims: vec![672, 336, 201, 336, 672],
            epochs: 6000,
        },
        ModelSpec {
            kind: DetectorKind::AeCloud,
            dims: vec![672, 470, 336, 201, 336, 470, 672],
            epochs: 8000,
        },
    ]
}

/// Default optimizer settings for the autoencoders.
pub fn default_hyper(epochs: usize, seed: u64) -> TrainHyper {
    TrainHyper {
        learning_rate: 0.01,
        l2_lambda: 1e-4,
        dropout_rate: 0.3,
        epochs,
        seed,
    }
}

/// Step decay: the rate halves after every quarter of the epoch budget.
pub fn learning_rate_at(hyper: &TrainHyper, epoch: usize) -> f64 {
    let quarter = (epoch * 4 / hyper.epochs.max(1)).min(3);
    hyper.learning_rate * 0.5f64.powi(quarter as i32)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub learning_rate: f64,
    /// Mean absolute error over the epoch's training passes (dropout active).
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedDetector {
    pub spec: ModelSpec,
    pub net: Network,
    pub error_model: ErrorModel,
}

pub fn train_detector(
    spec: &ModelSpec,
    train_windows: &[WeekWindow],
    hyper: &TrainHyper,
) -> Result<(TrainedDetector, Vec<EpochLog>)> {
    train_detector_with(spec, train_windows, hyper, |_| {})
}

/// Trains on normal weeks only, with inputs as targets, then fits the error
/// model on the same weeks. `on_epoch` sees every epoch's log row.
pub fn train_detector_with(
    spec: &ModelSpec,
    train_windows: &[WeekWindow],
    hyper: &TrainHyper,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<(TrainedDetector, Vec<EpochLog>)> {
    spec.validate()?;
    hyper.validate()?;
    if hyper.epochs != spec.epochs {
        return Err(Error::InvalidArgument(format!(
            "hyperparameters ask for {} epochs but {} is specified for {}",
            hyper.epochs, spec.epochs, spec.kind
        )));
    }
    if train_windows.is_empty() {
        return Err(Error::InvalidArgument("no training windows".into()));
    }
    for w in train_windows {
        if w.values.len() != WEEK_LEN {
            return Err(Error::Dimension {
                expected: WEEK_LEN,
                got: w.values.len(),
            });
        }
        if !w.is_normal() {
            return Err(Error::InvalidArgument(format!(
                "week {} contains an anomalous day; detectors train on normal weeks only",
                w.week
            )));
        }
    }

    let mut net = Network::init(&spec.layer_specs(), hyper.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..train_windows.len()).collect();
    let mut log = Vec::with_capacity(hyper.epochs);
    for epoch in 0..hyper.epochs {
        let lr = learning_rate_at(hyper, epoch);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let x = &train_windows[i].values;
            let trace = net.forward_train(x, hyper.dropout_rate, &mut rng)?;
            total += mean_abs_diff(trace.output(), x);
            net.train_step_mae(&trace, x, hyper.l2_lambda, lr)?;
        }
        let row = EpochLog {
            epoch,
            learning_rate: lr,
            loss: total / order.len() as f64,
        };
        on_epoch(&row);
        log.push(row);
    }
    if !net.is_finite() {
        return Err(Error::Degenerate(format!(
            "{} diverged during training; lower the learning rate",
            spec.kind
        )));
    }

    let mut errors = Vec::with_capacity(train_windows.len() * WEEK_LEN);
    for w in train_windows {
        let out = net.predict(&w.values)?;
        errors.extend(out.iter().zip(&w.values).map(|(a, b)| (a - b).abs()));
    }
    let error_model = ErrorModel::fit(&errors)?;
    Ok((
        TrainedDetector {
            spec: spec.clone(),
            net,
            error_model,
        },
        log,
    ))
}

pub fn mean_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

#[derive(Serialize, Deserialize)]
struct SpecFile {
    kind: DetectorKind,
    dims: Vec<usize>,
    epochs: usize,
    param_count: usize,
    flop: usize,
}

const SPEC_FILE: &str = "spec.toml";
const PARAMS_FILE: &str = "params.bin";
const ERROR_MODEL_FILE: &str = "error_model.toml";

impl TrainedDetector {
    pub fn kind(&self) -> DetectorKind {
        self.spec.kind
    }

    pub fn flop(&self) -> usize {
        self.spec.flop()
    }

    /// Inference-mode reconstruction of one week.
    pub fn reconstruct(&self, window: &[f64]) -> Result<Vec<f64>> {
        if window.len() != WEEK_LEN {
            return Err(Error::Dimension {
                expected: WEEK_LEN,
                got: window.len(),
            });
        }
        self.net.predict(window)
    }

    /// Per-step absolute reconstruction errors.
    pub fn errors(&self, window: &[f64]) -> Result<Vec<f64>> {
        let out = self.reconstruct(window)?;
        Ok(out.iter().zip(window).map(|(a, b)| (a - b).abs()).collect())
    }

    pub fn logpd(&self, window: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .errors(window)?
            .into_iter()
            .map(|e| self.error_model.logpd(e))
            .collect())
    }

    /// A day is anomalous when its lowest step score falls below the threshold.
    pub fn classify_days(&self, window: &[f64]) -> Result<DayVerdict> {
        self.error_model.classify_errors(&self.errors(window)?)
    }

    /// Writes `spec.toml`, `params.bin` and `error_model.toml` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let spec = SpecFile {
            kind: self.spec.kind,
            dims: self.spec.dims.clone(),
            epochs: self.spec.epochs,
            param_count: self.spec.param_count(),
            flop: self.spec.flop(),
        };
        crate::io::write_toml(&dir.join(SPEC_FILE), &spec)?;
        self.net.save(&dir.join(PARAMS_FILE))?;
        crate::io::write_toml(&dir.join(ERROR_MODEL_FILE), &self.error_model)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let spec_path = dir.join(SPEC_FILE);
        let file: SpecFile = crate::io::read_toml(&spec_path)?;
        let spec = ModelSpec {
            kind: file.kind,
            dims: file.dims,
            epochs: file.epochs,
        };
        spec.validate()?;
        if spec.param_count() != file.param_count || spec.flop() != file.flop {
            return Err(Error::format(
                &spec_path,
                "param_count/flop disagree with dims",
            ));
        }
        let params_path = dir.join(PARAMS_FILE);
        let net = Network::load(&params_path)?;
        if net.spec() != spec.layer_specs() {
            return Err(Error::format(
                &params_path,
                "parameter shapes disagree with spec.toml",
            ));
        }
        let em_path = dir.join(ERROR_MODEL_FILE);
        let error_model: ErrorModel = crate::io::read_toml(&em_path)?;
        if error_model.sigma.is_nan() || error_model.sigma <= 0.0 {
            return Err(Error::format(&em_path, "sigma must be positive"));
        }
        Ok(Self {
            spec,
            net,
            error_model,
        })
    }
}
