//! Subcommand implementations. Each reads what earlier steps wrote under
//! the output directory, so a run is `gen-data`, `train-detectors`,
//! `train-policy`, then `evaluate` or `sweep-alpha`.

use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};

use crate::config::{DataSource, RunConfig};
use crate::data::{self, make_splits, synthesize, LabeledSeries, SplitPlan, StandardizationStats};
use crate::detectors::{train_detector_with, TrainedDetector};
use crate::error::{Error, Result};
use crate::io::{read_toml, write_csv, write_json, write_toml};
use crate::policy::{train_policy, EpisodeLog, PolicyNet};
use crate::sim::{ComparisonRow, EvalReport, Evaluation, HecSystem, Scheme};

/// Default α grid: nine evenly spaced values over the published range.
pub const SWEEP_POINTS: usize = 9;

/// Artifact locations under the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn series_csv(&self) -> PathBuf {
        self.root.join("data/series.csv")
    }

    pub fn labels_csv(&self) -> PathBuf {
        self.root.join("data/labels.csv")
    }

    pub fn detectors_dir(&self) -> PathBuf {
        self.root.join("detectors")
    }

    pub fn detector_dir(&self, slug: &str) -> PathBuf {
        self.detectors_dir().join(slug)
    }

    pub fn standardization(&self) -> PathBuf {
        self.detectors_dir().join("standardization.toml")
    }

    pub fn splits(&self) -> PathBuf {
        self.detectors_dir().join("splits.toml")
    }

    pub fn training_log(&self) -> PathBuf {
        self.detectors_dir().join("training_log.csv")
    }

    pub fn policy_dir(&self) -> PathBuf {
        self.root.join("policy")
    }

    pub fn episode_log(&self) -> PathBuf {
        self.policy_dir().join("episodes.csv")
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.root.join("reports")
    }

    pub fn sweep_csv(&self) -> PathBuf {
        self.root.join("sweep/alpha_sweep.csv")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TrainingLogRow {
    model: String,
    epoch: usize,
    learning_rate: f64,
    loss: f64,
}

/// Dataset after standardization, with its split plan.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub series: LabeledSeries,
    pub splits: SplitPlan,
    pub stats: StandardizationStats,
}

/// Scheme tables written by `evaluate`.
#[derive(Debug, Clone)]
pub struct EvaluateOutput {
    /// Every week, including the policy's own training weeks.
    pub all_weeks: Vec<EvalReport>,
    /// Detector test split only.
    pub test_split: Vec<EvalReport>,
    /// Test split with the adaptive row cross-fitted: each week is scored
    /// by a policy trained without it.
    pub disjoint: Vec<EvalReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub accuracy_pct: f64,
    pub f1: f64,
    pub avg_delay_ms: f64,
    pub total_reward: f64,
}

fn echo_config(cfg: &RunConfig, command: &str) -> Result<()> {
    write_toml(&cfg.out_dir.join(format!("config.{command}.toml")), cfg)
}

/// Writes the synthetic series and its day labels.
pub fn gen_data(cfg: &RunConfig) -> Result<LabeledSeries> {
    let params = cfg.synth_params().ok_or_else(|| {
        Error::InvalidArgument(
            "gen-data needs a synthetic data source; the config points at a CSV file".into(),
        )
    })?;
    let series = synthesize(&params)?;
    let layout = Layout::new(&cfg.out_dir);
    data::write_series_csv(&layout.series_csv(), series.samples())?;
    data::write_labels(&layout.labels_csv(), series.day_labels())?;
    echo_config(cfg, "gen-data")?;
    info!(
        "wrote {} weeks ({} samples) to {}",
        series.weeks(),
        series.samples().len(),
        layout.series_csv().display()
    );
    Ok(series)
}

/// Raw (unstandardized) series named by the config.
pub fn load_series(cfg: &RunConfig) -> Result<LabeledSeries> {
    match &cfg.data {
        DataSource::Synthetic(_) => {
            let layout = Layout::new(&cfg.out_dir);
            let path = layout.series_csv();
            if !path.exists() {
                return Err(Error::MissingArtifact(path));
            }
            data::load_csv(&path, Some(&layout.labels_csv()))
        }
        DataSource::Csv { path, labels } => data::load_csv(path, labels.as_deref()),
    }
}

/// Splits the series and standardizes it with statistics of the detector
/// training weeks.
pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let raw = load_series(cfg)?;
    let splits = make_splits(&raw, cfg.split_seed())?;
    let stats = StandardizationStats::fit(&raw.samples_of(&splits.detector_train))?;
    Ok(Prepared {
        series: raw.standardized(&stats),
        splits,
        stats,
    })
}

/// Reloads the split and standardization that `train-detectors` recorded.
pub fn load_prepared(cfg: &RunConfig) -> Result<Prepared> {
    let layout = Layout::new(&cfg.out_dir);
    let splits: SplitPlan = read_toml(&layout.splits())?;
    let stats: StandardizationStats = read_toml(&layout.standardization())?;
    let raw = load_series(cfg)?;
    if let Some(&w) = splits.policy_test.iter().find(|&&w| w >= raw.weeks()) {
        return Err(Error::InvalidArgument(format!(
            "recorded split mentions week {w} but the dataset has {} weeks",
            raw.weeks()
        )));
    }
    Ok(Prepared {
        series: raw.standardized(&stats),
        splits,
        stats,
    })
}

pub fn train_detectors(cfg: &RunConfig) -> Result<Vec<TrainedDetector>> {
    let prepared = prepare(cfg)?;
    let layout = Layout::new(&cfg.out_dir);
    let train = prepared.series.select(&prepared.splits.detector_train);
    if let Some(w) = train.iter().find(|w| !w.is_normal()) {
        return Err(Error::InvalidArgument(format!(
            "week {} in the detector split contains anomalous days",
            w.week
        )));
    }
    let mut detectors = Vec::with_capacity(3);
    let mut log_rows = Vec::new();
    for (k, spec) in cfg.detector_specs().iter().enumerate() {
        let hyper = cfg.detector_hyper(k);
        info!(
            "training {} ({} params) for {} epochs on {} weeks",
            spec.kind,
            spec.param_count(),
            spec.epochs,
            train.len()
        );
        let (det, log) = train_detector_with(spec, &train, &hyper, |e| {
            if e.epoch % 100 == 0 {
                log::debug!("{} epoch {} loss {:.6}", spec.kind, e.epoch, e.loss);
            }
        })?;
        det.save(&layout.detector_dir(spec.kind.slug()))?;
        log_rows.extend(log.iter().map(|e| TrainingLogRow {
            model: spec.kind.name().to_string(),
            epoch: e.epoch,
            learning_rate: e.learning_rate,
            loss: e.loss,
        }));
        detectors.push(det);
    }
    write_toml(&layout.splits(), &prepared.splits)?;
    write_toml(&layout.standardization(), &prepared.stats)?;
    write_csv(&layout.training_log(), &log_rows)?;
    echo_config(cfg, "train-detectors")?;
    Ok(detectors)
}

pub fn load_detectors(cfg: &RunConfig) -> Result<Vec<TrainedDetector>> {
    let layout = Layout::new(&cfg.out_dir);
    cfg.detector_specs()
        .iter()
        .map(|spec| {
            let dir = layout.detector_dir(spec.kind.slug());
            if !dir.exists() {
                return Err(Error::MissingArtifact(dir));
            }
            TrainedDetector::load(&dir)
        })
        .collect()
}

/// Loads detectors and scores every week once.
pub fn load_evaluation(cfg: &RunConfig) -> Result<(Prepared, Evaluation)> {
    let prepared = load_prepared(cfg)?;
    let system = HecSystem::new(load_detectors(cfg)?, cfg.tiers(), cfg.alpha)?;
    let windows = prepared.series.select(&prepared.splits.policy_test);
    let evaluation = system.evaluate(&windows)?;
    Ok((prepared, evaluation))
}

/// Trains a policy on the policy-train weeks of `evaluation`.
pub fn fit_policy(
    cfg: &RunConfig,
    splits: &SplitPlan,
    evaluation: &Evaluation,
) -> Result<(PolicyNet, Vec<EpisodeLog>)> {
    let env = evaluation.subset(&splits.policy_train).bandit_env()?;
    train_policy(&env, &cfg.policy_config())
}

pub fn train_policy_cmd(cfg: &RunConfig) -> Result<(PolicyNet, Vec<EpisodeLog>)> {
    let (prepared, evaluation) = load_evaluation(cfg)?;
    let layout = Layout::new(&cfg.out_dir);
    info!(
        "training policy for {} episodes on {} weeks (alpha {})",
        cfg.policy.episodes,
        prepared.splits.policy_train.len(),
        cfg.alpha
    );
    let (policy, log) = fit_policy(cfg, &prepared.splits, &evaluation)?;
    policy.save(&layout.policy_dir())?;
    write_csv(&layout.episode_log(), &log)?;
    echo_config(cfg, "train-policy")?;
    Ok((policy, log))
}

fn report_set(
    evaluation: &Evaluation,
    schemes: &[Scheme],
    policy: Option<&PolicyNet>,
) -> Result<Vec<EvalReport>> {
    schemes.iter().map(|&s| evaluation.run(s, policy)).collect()
}

fn write_reports(dir: &Path, table: &str, reports: &[EvalReport]) -> Result<()> {
    let rows: Vec<ComparisonRow> = reports.iter().map(EvalReport::row).collect();
    write_csv(&dir.join(table), &rows)
}

/// Runs `schemes` (all six when empty). The adaptive scheme needs a trained
/// policy; the others do not.
pub fn evaluate(cfg: &RunConfig, schemes: &[Scheme]) -> Result<EvaluateOutput> {
    let schemes = if schemes.is_empty() {
        Scheme::standard()
    } else {
        schemes.to_vec()
    };
    let layout = Layout::new(&cfg.out_dir);
    let policy = if schemes.contains(&Scheme::Adaptive) {
        let dir = layout.policy_dir();
        if !dir.exists() {
            return Err(Error::MissingArtifact(dir));
        }
        Some(PolicyNet::load(&dir)?)
    } else {
        None
    };
    let (prepared, evaluation) = load_evaluation(cfg)?;
    let splits = &prepared.splits;
    let test_eval = evaluation.subset(&splits.test);
    let mut disjoint = report_set(&test_eval, &schemes, policy.as_ref())?;
    if let Some(slot) = disjoint
        .iter_mut()
        .find(|r| r.scheme == Scheme::Adaptive.name())
    {
        *slot = cross_fit_adaptive(cfg, splits, &evaluation, &test_eval)?;
    }
    let out = EvaluateOutput {
        all_weeks: report_set(&evaluation, &schemes, policy.as_ref())?,
        test_split: report_set(&test_eval, &schemes, policy.as_ref())?,
        disjoint,
    };
    let dir = layout.reports_dir();
    for r in &out.all_weeks {
        write_json(
            &dir.join(format!("{}.json", r.scheme.to_ascii_lowercase())),
            r,
        )?;
    }
    write_reports(&dir, "comparison.csv", &out.all_weeks)?;
    write_reports(&dir, "comparison_test.csv", &out.test_split)?;
    write_reports(&dir, "comparison_disjoint.csv", &out.disjoint)?;
    echo_config(cfg, "evaluate")?;
    for r in &out.all_weeks {
        info!(
            "{:<14} f1 {:.3} acc {:6.2}% reward {:8.3} delay {:8.3} ms",
            r.scheme,
            r.metrics.f1,
            100.0 * r.metrics.accuracy,
            r.total_reward,
            r.avg_delay_ms
        );
    }
    Ok(out)
}

/// Leave-one-week-out adaptive evaluation of `target`. Weeks outside the
/// policy-train set use the policy trained on all of it.
pub fn cross_fit_adaptive(
    cfg: &RunConfig,
    splits: &SplitPlan,
    evaluation: &Evaluation,
    target: &Evaluation,
) -> Result<EvalReport> {
    let (full, _) = fit_policy(cfg, splits, evaluation)?;
    let mut arms = Vec::with_capacity(target.windows().len());
    for w in target.windows() {
        let arm = if splits.policy_train.contains(&w.week) {
            let held_out = SplitPlan {
                policy_train: splits
                    .policy_train
                    .iter()
                    .copied()
                    .filter(|&x| x != w.week)
                    .collect(),
                ..splits.clone()
            };
            let (policy, _) = fit_policy(cfg, &held_out, evaluation)?;
            policy.greedy(&w.state).index
        } else {
            full.greedy(&w.state).index
        };
        arms.push(arm);
    }
    target.run_assigned("Adaptive (cross-fit)", &arms)
}

pub fn default_alpha_grid() -> Vec<f64> {
    let (lo, hi) = crate::cost::ALPHA_SWEEP_RANGE;
    (0..SWEEP_POINTS)
        .map(|i| {
            let a = lo + (hi - lo) * i as f64 / (SWEEP_POINTS - 1) as f64;
            (a * 1e8).round() / 1e8
        })
        .collect()
}

/// Retrains the policy for each α (same seed) and evaluates the adaptive
/// scheme on every week. Detectors are reused.
pub fn sweep_alpha(cfg: &RunConfig, alphas: &[f64]) -> Result<Vec<SweepRow>> {
    if alphas.is_empty() {
        return Err(Error::InvalidArgument("the alpha list is empty".into()));
    }
    for &a in alphas {
        crate::cost::validate_alpha(a)?;
    }
    let (prepared, evaluation) = load_evaluation(cfg)?;
    let mut rows = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let eval = evaluation.with_alpha(alpha)?;
        let (policy, _) = fit_policy(cfg, &prepared.splits, &eval)?;
        let r = eval.run_adaptive(&policy)?;
        info!(
            "alpha {alpha:.5}: acc {:.2}% delay {:.3} ms",
            100.0 * r.metrics.accuracy,
            r.avg_delay_ms
        );
        rows.push(SweepRow {
            alpha,
            accuracy_pct: 100.0 * r.metrics.accuracy,
            f1: r.metrics.f1,
            avg_delay_ms: r.avg_delay_ms,
            total_reward: r.total_reward,
        });
    }
    write_csv(&Layout::new(&cfg.out_dir).sweep_csv(), &rows)?;
    echo_config(cfg, "sweep-alpha")?;
    Ok(rows)
}
