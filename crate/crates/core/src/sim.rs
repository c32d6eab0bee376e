//! Hierarchical deployment simulator: runs the fixed, successive and
//! adaptive detection schemes over a set of weeks and scores them.
//!
//! Every detector is evaluated once per week up front ([`HecSystem::evaluate`]);
//! the schemes then only differ in which verdict they pick and which delay
//! they are charged.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{
    f_cost, t_comp, t_total, validate_alpha, validate_tiers, DelayBreakdown, TierSpec,
};
use crate::data::{WeekWindow, DAYS_PER_WEEK};
use crate::detectors::TrainedDetector;
use crate::error::{Error, Result};
use crate::features::{extract_state, PolicyState};
use crate::policy::{BanditEnv, PolicyNet};
use crate::scoring::DayVerdict;

/// Environment variable capping the evaluation thread count.
pub const THREADS_ENV: &str = "HEC_ADAPT_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Scheme {
    /// Always run on the given zero-based tier.
    Fixed(usize),
    /// Start at tier 1 and escalate until confident or at the top tier.
    Successive(f64),
    Adaptive,
}

impl Scheme {
    pub fn name(&self) -> String {
        match self {
            Scheme::Fixed(0) => "AE-IoT".into(),
            Scheme::Fixed(1) => "AE-Edge".into(),
            Scheme::Fixed(2) => "AE-Cloud".into(),
            Scheme::Fixed(k) => format!("Fixed-{}", k + 1),
            Scheme::Successive(f) => format!("Successive-{f}"),
            Scheme::Adaptive => "Adaptive".into(),
        }
    }

    /// The six schemes compared in the evaluation table.
    pub fn standard() -> Vec<Scheme> {
        vec![
            Scheme::Fixed(0),
            Scheme::Fixed(1),
            Scheme::Fixed(2),
            Scheme::Successive(2.0),
            Scheme::Successive(4.0),
            Scheme::Adaptive,
        ]
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "ae-iot" | "iot" | "fixed-1" => Ok(Scheme::Fixed(0)),
            "ae-edge" | "edge" | "fixed-2" => Ok(Scheme::Fixed(1)),
            "ae-cloud" | "cloud" | "fixed-3" => Ok(Scheme::Fixed(2)),
            "adaptive" => Ok(Scheme::Adaptive),
            _ => {
                if let Some(f) = lower.strip_prefix("successive-") {
                    let factor: f64 = f.parse().map_err(|_| {
                        Error::InvalidArgument(format!("bad successive factor in {s:?}"))
                    })?;
                    if factor.is_nan() || factor < 1.0 {
                        return Err(Error::InvalidArgument(
                            "successive factor must be >= 1".into(),
                        ));
                    }
                    Ok(Scheme::Successive(factor))
                } else if let Some(k) = lower.strip_prefix("fixed-") {
                    let k: usize = k
                        .parse()
                        .map_err(|_| Error::InvalidArgument(format!("bad tier in {s:?}")))?;
                    if k == 0 {
                        return Err(Error::InvalidArgument("tiers are numbered from 1".into()));
                    }
                    Ok(Scheme::Fixed(k - 1))
                } else {
                    Err(Error::InvalidArgument(format!("unknown scheme {s:?}")))
                }
            }
        }
    }
}

/// Day-level confusion counts with the anomalous class as positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tp: usize,
    pub f1: f64,
    /// Fraction in `[0, 1]`.
    pub accuracy: f64,
}

impl Metrics {
    pub fn from_counts(tn: usize, fp: usize, fn_: usize, tp: usize) -> Self {
        let f1_den = 2 * tp + fp + fn_;
        let total = tn + fp + fn_ + tp;
        Self {
            tn,
            fp,
            fn_,
            tp,
            f1: if f1_den == 0 {
                0.0
            } else {
                2.0 * tp as f64 / f1_den as f64
            },
            accuracy: if total == 0 {
                0.0
            } else {
                (tn + tp) as f64 / total as f64
            },
        }
    }

    pub fn total(&self) -> usize {
        self.tn + self.fp + self.fn_ + self.tp
    }
}

pub fn compute_metrics(predictions: &[bool], labels: &[bool]) -> Result<Metrics> {
    if predictions.len() != labels.len() {
        return Err(Error::Dimension {
            expected: labels.len(),
            got: predictions.len(),
        });
    }
    let (mut tn, mut fp, mut fn_, mut tp) = (0, 0, 0, 0);
    for (&p, &l) in predictions.iter().zip(labels) {
        match (p, l) {
            (false, false) => tn += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (true, true) => tp += 1,
        }
    }
    Ok(Metrics::from_counts(tn, fp, fn_, tp))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowTrace {
    pub week: usize,
    /// One-based tiers in the order they ran.
    pub tiers_visited: Vec<usize>,
    pub final_tier: usize,
    pub delay_ms: f64,
    pub predictions: [bool; DAYS_PER_WEEK],
    pub labels: [bool; DAYS_PER_WEEK],
    pub accuracy: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scheme: String,
    pub alpha: f64,
    pub windows: usize,
    #[serde(flatten)]
    pub metrics: Metrics,
    pub total_reward: f64,
    pub avg_delay_ms: f64,
    pub trace: Vec<WindowTrace>,
}

impl EvalReport {
    fn from_trace(scheme: String, alpha: f64, trace: Vec<WindowTrace>) -> Self {
        let (mut tn, mut fp, mut fn_, mut tp) = (0, 0, 0, 0);
        for w in &trace {
            let m = compute_metrics(&w.predictions, &w.labels).expect("fixed-size arrays");
            tn += m.tn;
            fp += m.fp;
            fn_ += m.fn_;
            tp += m.tp;
        }
        let total_reward = trace.iter().map(|w| w.reward).sum();
        let avg_delay_ms = if trace.is_empty() {
            0.0
        } else {
            trace.iter().map(|w| w.delay_ms).sum::<f64>() / trace.len() as f64
        };
        Self {
            scheme,
            alpha,
            windows: trace.len(),
            metrics: Metrics::from_counts(tn, fp, fn_, tp),
            total_reward,
            avg_delay_ms,
            trace,
        }
    }

    pub fn row(&self) -> ComparisonRow {
        ComparisonRow {
            scheme: self.scheme.clone(),
            f1: self.metrics.f1,
            accuracy_pct: 100.0 * self.metrics.accuracy,
            total_reward: self.total_reward,
            avg_delay_ms: self.avg_delay_ms,
            tn: self.metrics.tn,
            fp: self.metrics.fp,
            fn_: self.metrics.fn_,
            tp: self.metrics.tp,
        }
    }
}

/// One line of the scheme comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub scheme: String,
    pub f1: f64,
    pub accuracy_pct: f64,
    pub total_reward: f64,
    pub avg_delay_ms: f64,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tp: usize,
}

/// Detectors deployed one per tier, with the tier hardware and cost weight.
#[derive(Debug, Clone)]
pub struct HecSystem {
    detectors: Vec<TrainedDetector>,
    tiers: Vec<TierSpec>,
    alpha: f64,
}

impl HecSystem {
    pub fn new(detectors: Vec<TrainedDetector>, tiers: Vec<TierSpec>, alpha: f64) -> Result<Self> {
        validate_tiers(&tiers)?;
        validate_alpha(alpha)?;
        if detectors.len() != tiers.len() {
            return Err(Error::InvalidArgument(format!(
                "{} detectors for {} tiers",
                detectors.len(),
                tiers.len()
            )));
        }
        Ok(Self {
            detectors,
            tiers,
            alpha,
        })
    }

    pub fn detectors(&self) -> &[TrainedDetector] {
        &self.detectors
    }

    pub fn tiers(&self) -> &[TierSpec] {
        &self.tiers
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Delay of running detector `k` on tier `k`.
    pub fn delay(&self, k: usize) -> DelayBreakdown {
        t_total(self.detectors[k].flop() as f64, &self.tiers[k])
    }

    /// Runs every detector on every window. Windows are processed in
    /// parallel (capped by `HEC_ADAPT_THREADS`); results keep input order.
    pub fn evaluate(&self, windows: &[WeekWindow]) -> Result<Evaluation> {
        let work = || {
            windows
                .par_iter()
                .map(|w| -> Result<WindowEval> {
                    let verdicts = self
                        .detectors
                        .iter()
                        .map(|d| d.classify_days(&w.values))
                        .collect::<Result<Vec<_>>>()?;
                    Ok(WindowEval {
                        week: w.week,
                        labels: w.labels,
                        state: extract_state(&w.values)?,
                        verdicts,
                    })
                })
                .collect::<Result<Vec<_>>>()
        };
        let evals = match thread_cap() {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidArgument(e.to_string()))?
                .install(work)?,
            None => work()?,
        };
        Ok(Evaluation {
            windows: evals,
            delays: (0..self.tiers.len()).map(|k| self.delay(k)).collect(),
            comp_ms: (0..self.tiers.len())
                .map(|k| t_comp(self.detectors[k].flop() as f64, &self.tiers[k]))
                .collect(),
            latency_ms: self.tiers.iter().map(|t| t.latency_ms).collect(),
            alpha: self.alpha,
        })
    }

    pub fn run_fixed(&self, k: usize, windows: &[WeekWindow]) -> Result<EvalReport> {
        self.evaluate(windows)?.run_fixed(k)
    }

    pub fn run_successive(&self, factor: f64, windows: &[WeekWindow]) -> Result<EvalReport> {
        self.evaluate(windows)?.run_successive(factor)
    }

    pub fn run_adaptive(&self, policy: &PolicyNet, windows: &[WeekWindow]) -> Result<EvalReport> {
        self.evaluate(windows)?.run_adaptive(policy)
    }
}

fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowEval {
    pub week: usize,
    pub labels: [bool; DAYS_PER_WEEK],
    pub state: PolicyState,
    /// Verdict of each tier's detector.
    pub verdicts: Vec<DayVerdict>,
}

/// Per-window verdicts of all detectors plus the delay model.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    windows: Vec<WindowEval>,
    delays: Vec<DelayBreakdown>,
    comp_ms: Vec<f64>,
    latency_ms: Vec<f64>,
    alpha: f64,
}

impl Evaluation {
    /// Builds an evaluation from precomputed verdicts; `model_flop[k]` is the
    /// cost of the detector on tier `k`.
    pub fn from_verdicts(
        windows: Vec<WindowEval>,
        tiers: &[TierSpec],
        model_flop: &[f64],
        alpha: f64,
    ) -> Result<Self> {
        validate_tiers(tiers)?;
        validate_alpha(alpha)?;
        if model_flop.len() != tiers.len() {
            return Err(Error::Dimension {
                expected: tiers.len(),
                got: model_flop.len(),
            });
        }
        if let Some(w) = windows.iter().find(|w| w.verdicts.len() != tiers.len()) {
            return Err(Error::InvalidArgument(format!(
                "week {} has {} verdicts for {} tiers",
                w.week,
                w.verdicts.len(),
                tiers.len()
            )));
        }
        Ok(Self {
            windows,
            delays: tiers
                .iter()
                .zip(model_flop)
                .map(|(t, &f)| t_total(f, t))
                .collect(),
            comp_ms: tiers
                .iter()
                .zip(model_flop)
                .map(|(t, &f)| t_comp(f, t))
                .collect(),
            latency_ms: tiers.iter().map(|t| t.latency_ms).collect(),
            alpha,
        })
    }

    pub fn windows(&self) -> &[WindowEval] {
        &self.windows
    }

    pub fn tiers(&self) -> usize {
        self.delays.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn delays(&self) -> &[DelayBreakdown] {
        &self.delays
    }

    /// Same verdicts, different cost weight.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        validate_alpha(alpha)?;
        Ok(Self {
            alpha,
            ..self.clone()
        })
    }

    /// Keeps only the listed weeks, in the given order.
    pub fn subset(&self, weeks: &[usize]) -> Self {
        let windows = weeks
            .iter()
            .filter_map(|wk| self.windows.iter().find(|w| w.week == *wk).cloned())
            .collect();
        Self {
            windows,
            ..self.clone()
        }
    }

    fn check_tier(&self, k: usize) -> Result<()> {
        if k >= self.tiers() {
            return Err(Error::InvalidArgument(format!(
                "no detector deployed on tier {}",
                k + 1
            )));
        }
        Ok(())
    }

    fn trace_for(&self, w: &WindowEval, visited: Vec<usize>, delay_ms: f64) -> WindowTrace {
        let last = *visited.last().expect("at least one tier visited");
        let verdict = &w.verdicts[last];
        let accuracy = verdict.day_accuracy(&w.labels);
        WindowTrace {
            week: w.week,
            tiers_visited: visited.iter().map(|k| k + 1).collect(),
            final_tier: last + 1,
            delay_ms,
            predictions: verdict.predictions(),
            labels: w.labels,
            accuracy,
            reward: accuracy - f_cost(delay_ms, self.alpha),
        }
    }

    /// Reward each tier would earn on each window.
    pub fn reward_table(&self) -> Vec<Vec<f64>> {
        self.windows
            .iter()
            .map(|w| {
                (0..self.tiers())
                    .map(|k| {
                        w.verdicts[k].day_accuracy(&w.labels)
                            - f_cost(self.delays[k].total_ms, self.alpha)
                    })
                    .collect()
            })
            .collect()
    }

    pub fn bandit_env(&self) -> Result<BanditEnv> {
        BanditEnv::new(
            self.windows.iter().map(|w| w.state).collect(),
            self.reward_table(),
        )
    }

    pub fn run_fixed(&self, k: usize) -> Result<EvalReport> {
        self.check_tier(k)?;
        let trace = self
            .windows
            .iter()
            .map(|w| self.trace_for(w, vec![k], self.delays[k].total_ms))
            .collect();
        Ok(EvalReport::from_trace(
            Scheme::Fixed(k).name(),
            self.alpha,
            trace,
        ))
    }

    /// Escalates while the verdict is not confident. Compute is paid on every
    /// visited tier; network latency once, to the last tier reached.
    pub fn run_successive(&self, factor: f64) -> Result<EvalReport> {
        if factor.is_nan() || factor < 1.0 {
            return Err(Error::InvalidArgument(format!(
                "successive factor must be >= 1, got {factor}"
            )));
        }
        let top = self.tiers() - 1;
        let mut trace = Vec::with_capacity(self.windows.len());
        for w in &self.windows {
            let mut visited = Vec::new();
            let mut comp = 0.0;
            for k in 0..=top {
                visited.push(k);
                comp += self.comp_ms[k];
                if k == top || w.verdicts[k].is_confident(factor)? {
                    break;
                }
            }
            let last = *visited.last().expect("visited");
            trace.push(self.trace_for(w, visited, comp + self.latency_ms[last]));
        }
        Ok(EvalReport::from_trace(
            Scheme::Successive(factor).name(),
            self.alpha,
            trace,
        ))
    }

    /// Greedy policy choice per window.
    pub fn run_adaptive(&self, policy: &PolicyNet) -> Result<EvalReport> {
        if policy.arms() != self.tiers() {
            return Err(Error::InvalidArgument(format!(
                "policy has {} arms for {} tiers",
                policy.arms(),
                self.tiers()
            )));
        }
        let arms: Vec<usize> = self
            .windows
            .iter()
            .map(|w| policy.greedy(&w.state).index)
            .collect();
        self.run_assigned(&Scheme::Adaptive.name(), &arms)
    }

    /// Runs window `i` on zero-based tier `arms[i]`.
    pub fn run_assigned(&self, scheme: &str, arms: &[usize]) -> Result<EvalReport> {
        if arms.len() != self.windows.len() {
            return Err(Error::Dimension {
                expected: self.windows.len(),
                got: arms.len(),
            });
        }
        for &k in arms {
            self.check_tier(k)?;
        }
        let trace = self
            .windows
            .iter()
            .zip(arms)
            .map(|(w, &k)| self.trace_for(w, vec![k], self.delays[k].total_ms))
            .collect();
        Ok(EvalReport::from_trace(
            scheme.to_string(),
            self.alpha,
            trace,
        ))
    }

    pub fn run(&self, scheme: Scheme, policy: Option<&PolicyNet>) -> Result<EvalReport> {
        match scheme {
            Scheme::Fixed(k) => self.run_fixed(k),
            Scheme::Successive(f) => self.run_successive(f),
            Scheme::Adaptive => {
                let p = policy.ok_or_else(|| {
                    Error::InvalidArgument("the adaptive scheme needs a trained policy".into())
                })?;
                self.run_adaptive(p)
            }
        }
    }
}
