//! Week-windowed power-demand series: ingestion, synthesis, standardization
//! and the train/test splits.

use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 15-minute sampling.
pub const STEPS_PER_DAY: usize = 96;
pub const DAYS_PER_WEEK: usize = 7;
pub const WEEK_LEN: usize = STEPS_PER_DAY * DAYS_PER_WEEK;
pub const SAMPLE_PERIOD_MINUTES: u32 = 15;

/// One week of samples with its seven day labels (`true` = anomalous).
#[derive(Debug, Clone, PartialEq)]
pub struct WeekWindow {
    pub week: usize,
    pub values: Vec<f64>,
    pub labels: [bool; DAYS_PER_WEEK],
}

impl WeekWindow {
    pub fn is_normal(&self) -> bool {
        self.labels.iter().all(|l| !l)
    }

    pub fn day(&self, d: usize) -> &[f64] {
        &self.values[d * STEPS_PER_DAY..(d + 1) * STEPS_PER_DAY]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSeries {
    samples: Vec<f64>,
    day_labels: Vec<bool>,
}

impl LabeledSeries {
    /// Truncates `samples` to whole weeks; `day_labels` must cover them.
    pub fn new(mut samples: Vec<f64>, day_labels: Option<Vec<bool>>) -> Result<Self> {
        let weeks = samples.len() / WEEK_LEN;
        if weeks == 0 {
            return Err(Error::InvalidArgument(format!(
                "series has {} samples, fewer than one week ({WEEK_LEN})",
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("sample {i} is not finite")));
        }
        samples.truncate(weeks * WEEK_LEN);
        let days = weeks * DAYS_PER_WEEK;
        let day_labels = match day_labels {
            Some(mut labels) => {
                if labels.len() < days {
                    return Err(Error::InvalidArgument(format!(
                        "{} day labels for {days} days",
                        labels.len()
                    )));
                }
                labels.truncate(days);
                labels
            }
            None => vec![false; days],
        };
        Ok(Self {
            samples,
            day_labels,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn day_labels(&self) -> &[bool] {
        &self.day_labels
    }

    pub fn weeks(&self) -> usize {
        self.samples.len() / WEEK_LEN
    }

    pub fn week_labels(&self, week: usize) -> [bool; DAYS_PER_WEEK] {
        let mut out = [false; DAYS_PER_WEEK];
        out.copy_from_slice(&self.day_labels[week * DAYS_PER_WEEK..(week + 1) * DAYS_PER_WEEK]);
        out
    }

    pub fn is_abnormal_week(&self, week: usize) -> bool {
        self.week_labels(week).iter().any(|&l| l)
    }

    pub fn window(&self, week: usize) -> WeekWindow {
        WeekWindow {
            week,
            values: self.samples[week * WEEK_LEN..(week + 1) * WEEK_LEN].to_vec(),
            labels: self.week_labels(week),
        }
    }

    pub fn windows(&self) -> Vec<WeekWindow> {
        (0..self.weeks()).map(|w| self.window(w)).collect()
    }

    pub fn select(&self, weeks: &[usize]) -> Vec<WeekWindow> {
        weeks.iter().map(|&w| self.window(w)).collect()
    }

    /// Samples of the given weeks, concatenated.
    pub fn samples_of(&self, weeks: &[usize]) -> Vec<f64> {
        weeks
            .iter()
            .flat_map(|&w| {
                self.samples[w * WEEK_LEN..(w + 1) * WEEK_LEN]
                    .iter()
                    .copied()
            })
            .collect()
    }

    pub fn standardized(&self, stats: &StandardizationStats) -> Self {
        Self {
            samples: stats.standardize(&self.samples),
            day_labels: self.day_labels.clone(),
        }
    }
}

/// Reads one numeric value per line; blank lines are ignored. An optional
/// label file holds one `0`/`1` per line, one line per day.
pub fn load_csv(path: &Path, labels: Option<&Path>) -> Result<LabeledSeries> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut samples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: format!("not a number: {line:?}"),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: "non-finite value".into(),
            });
        }
        samples.push(v);
    }
    let labels = labels.map(load_labels).transpose()?;
    LabeledSeries::new(samples, labels)
}

pub fn load_labels(path: &Path) -> Result<Vec<bool>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| match l.trim() {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("expected 0 or 1, got {other:?}"),
            }),
        })
        .collect()
}

pub fn write_series_csv(path: &Path, samples: &[f64]) -> Result<()> {
    let mut out = String::with_capacity(samples.len() * 20);
    for v in samples {
        out.push_str(&v.to_string());
        out.push('\n');
    }
    crate::io::write_atomic(path, out.as_bytes())
}

pub fn write_labels(path: &Path, labels: &[bool]) -> Result<()> {
    let out: String = labels
        .iter()
        .map(|&l| if l { "1\n" } else { "0\n" })
        .collect();
    crate::io::write_atomic(path, out.as_bytes())
}

/// Shape constants of the synthetic power-demand generator, in raw
/// (pre-standardization) units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub weeks: usize,
    pub anomalous_weeks: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    pub weekday_amplitude: f64,
    pub weekend_amplitude: f64,
    pub baseline: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            weeks: 52,
            anomalous_weeks: 8,
            // Large enough that the detectors' generalization gap stays
            // below the training-error threshold on most unseen normal days.
            noise_sigma: 0.13,
            seed: 2020,
            weekday_amplitude: 1.0,
            weekend_amplitude: 0.3,
            baseline: 0.1,
        }
    }
}

/// Raised-cosine daily profile peaking at mid-day.
pub fn day_profile(amplitude: f64, baseline: f64) -> [f64; STEPS_PER_DAY] {
    let mut out = [0.0; STEPS_PER_DAY];
    for (i, v) in out.iter_mut().enumerate() {
        let phase = i as f64 / STEPS_PER_DAY as f64;
        *v = baseline + amplitude * 0.5 * (1.0 - (2.0 * std::f64::consts::PI * phase).cos());
    }
    out
}

pub fn is_weekday(day: usize) -> bool {
    day % DAYS_PER_WEEK < 5
}

/// Weekly power-demand cycle: five weekday peaks and two low weekend days.
/// Each anomalous week gets one day with the opposite profile (a weekday
/// holiday or a busy weekend day), and only that day is labeled anomalous.
pub fn synthesize(params: &SynthParams) -> Result<LabeledSeries> {
    if params.weeks == 0 {
        return Err(Error::InvalidArgument("weeks must be positive".into()));
    }
    if params.anomalous_weeks > params.weeks {
        return Err(Error::InvalidArgument(format!(
            "{} anomalous weeks requested out of {}",
            params.anomalous_weeks, params.weeks
        )));
    }
    if !(params.noise_sigma >= 0.0 && params.noise_sigma.is_finite()) {
        return Err(Error::InvalidArgument(
            "noise_sigma must be nonnegative".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let weekday = day_profile(params.weekday_amplitude, params.baseline);
    let weekend = day_profile(params.weekend_amplitude, params.baseline);

    let mut flipped = vec![false; params.weeks * DAYS_PER_WEEK];
    let mut abnormal: Vec<usize> =
        sample(&mut rng, params.weeks, params.anomalous_weeks).into_vec();
    abnormal.sort_unstable();
    for &w in &abnormal {
        let d = rng.random_range(0..DAYS_PER_WEEK);
        flipped[w * DAYS_PER_WEEK + d] = true;
    }

    let noise = Normal::new(0.0, params.noise_sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut samples = Vec::with_capacity(params.weeks * WEEK_LEN);
    for (day_index, &flip) in flipped.iter().enumerate() {
        let weekday_shape = is_weekday(day_index) != flip;
        let profile = if weekday_shape { &weekday } else { &weekend };
        for &v in profile {
            let eps = if params.noise_sigma > 0.0 {
                noise.sample(&mut rng)
            } else {
                0.0
            };
            samples.push(v + eps);
        }
    }
    LabeledSeries::new(samples, Some(flipped))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub mean: f64,
    pub std: f64,
}

impl StandardizationStats {
    /// Mean and population standard deviation of `samples`.
    pub fn fit(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Degenerate("no samples to standardize".into()));
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let std = (samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        if std.is_nan() || std <= 0.0 {
            return Err(Error::Degenerate("series has zero variance".into()));
        }
        Ok(Self { mean, std })
    }

    pub fn standardize(&self, samples: &[f64]) -> Vec<f64> {
        samples.iter().map(|v| (v - self.mean) / self.std).collect()
    }

    pub fn destandardize(&self, samples: &[f64]) -> Vec<f64> {
        samples.iter().map(|v| v * self.std + self.mean).collect()
    }
}

/// Week indices for each role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub detector_train: Vec<usize>,
    pub test: Vec<usize>,
    pub policy_train: Vec<usize>,
    pub policy_test: Vec<usize>,
}

/// Normal weeks drawn for the policy training set.
pub const POLICY_NORMAL_WEEKS: usize = 7;

/// The first `ceil(0.7 * weeks)` normal weeks train the detectors; every
/// other week (including all abnormal ones) is test. The policy trains on
/// all abnormal weeks plus seven normal weeks drawn from the test region and
/// is evaluated on every week.
pub fn make_splits(series: &LabeledSeries, seed: u64) -> Result<SplitPlan> {
    let weeks = series.weeks();
    let train_target = (weeks * 7).div_ceil(10);
    let mut detector_train = Vec::new();
    let mut test = Vec::new();
    for w in 0..weeks {
        if !series.is_abnormal_week(w) && detector_train.len() < train_target {
            detector_train.push(w);
        } else {
            test.push(w);
        }
    }
    if detector_train.is_empty() {
        return Err(Error::InvalidArgument(
            "no normal week to train detectors on".into(),
        ));
    }
    let abnormal: Vec<usize> = test
        .iter()
        .copied()
        .filter(|&w| series.is_abnormal_week(w))
        .collect();
    if abnormal.is_empty() {
        return Err(Error::InvalidArgument(
            "policy training needs at least one abnormal week".into(),
        ));
    }
    let test_normals: Vec<usize> = test
        .iter()
        .copied()
        .filter(|&w| !series.is_abnormal_week(w))
        .collect();
    if test_normals.len() < POLICY_NORMAL_WEEKS {
        return Err(Error::InvalidArgument(format!(
            "policy training needs {POLICY_NORMAL_WEEKS} normal weeks outside the detector \
             training set, only {} available",
            test_normals.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = sample(&mut rng, test_normals.len(), POLICY_NORMAL_WEEKS);
    let mut policy_train: Vec<usize> = abnormal;
    policy_train.extend(picked.iter().map(|i| test_normals[i]));
    policy_train.sort_unstable();
    Ok(SplitPlan {
        detector_train,
        test,
        policy_train,
        policy_test: (0..weeks).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::io::Write;

    fn write_tmp(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        let mut f = fs::File::create(&p).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn full_year_csv_gives_52_weeks() {
        let dir = tempfile::tempdir().unwrap();
        let body: String = (0..35040)
            .map(|i| format!("{}\n", (i % 96) as f64 * 0.01))
            .collect();
        let p = write_tmp(&dir, "year.csv", &body);
        let s = load_csv(&p, None).unwrap();
        assert_eq!(s.weeks(), 52);
        assert_eq!(s.day_labels().len(), 364);
        assert!(s.day_labels().iter().all(|&l| !l));
    }

    #[test]
    fn partial_week_truncated() {
        let dir = tempfile::tempdir().unwrap();
        let body: String = (0..700).map(|i| format!("{i}\n")).collect();
        let p = write_tmp(&dir, "s.csv", &body);
        let s = load_csv(&p, None).unwrap();
        assert_eq!(s.samples().len(), 672);
        assert_eq!(s.weeks(), 1);
    }

    #[test]
    fn malformed_row_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let mut body: String = (0..700).map(|i| format!("{i}\n")).collect();
        body.insert_str(0, "1.0\nabc\n");
        let p = write_tmp(&dir, "bad.csv", &body);
        match load_csv(&p, None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let short = write_tmp(&dir, "short.csv", "1\n2\n3\n");
        assert!(matches!(
            load_csv(&short, None),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn labels_file_is_read() {
        let dir = tempfile::tempdir().unwrap();
        let body: String = (0..672).map(|i| format!("{i}\n")).collect();
        let p = write_tmp(&dir, "s.csv", &body);
        let l = write_tmp(&dir, "l.csv", "0\n0\n1\n0\n0\n0\n0\n");
        let s = load_csv(&p, Some(&l)).unwrap();
        assert_eq!(
            s.week_labels(0),
            [false, false, true, false, false, false, false]
        );
        let bad = write_tmp(&dir, "bad.csv", "0\n2\n");
        assert!(matches!(
            load_csv(&p, Some(&bad)),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn synthetic_year_has_requested_abnormal_weeks() {
        let s = synthesize(&SynthParams::default()).unwrap();
        assert_eq!(s.weeks(), 52);
        let abnormal: Vec<usize> = (0..52).filter(|&w| s.is_abnormal_week(w)).collect();
        assert_eq!(abnormal.len(), 8);
        for w in abnormal {
            assert_eq!(s.week_labels(w).iter().filter(|&&l| l).count(), 1);
        }
    }

    #[test]
    fn noiseless_weekdays_are_identical() {
        let p = SynthParams {
            noise_sigma: 0.0,
            anomalous_weeks: 0,
            weeks: 2,
            ..SynthParams::default()
        };
        let s = synthesize(&p).unwrap();
        let w = s.window(1);
        for d in 1..5 {
            assert_eq!(w.day(0), w.day(d));
        }
        assert_ne!(w.day(0), w.day(5));
    }

    #[test]
    fn holiday_days_have_low_mean() {
        let s = synthesize(&SynthParams {
            anomalous_weeks: 20,
            ..SynthParams::default()
        })
        .unwrap();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let mut checked = 0;
        for win in s.windows() {
            for d in (0..5).filter(|&d| win.labels[d]) {
                let low = mean(win.day(d));
                for n in (0..5).filter(|&n| !win.labels[n]) {
                    assert!(low < mean(win.day(n)));
                }
                checked += 1;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn generator_rejects_bad_counts() {
        let p = SynthParams {
            weeks: 3,
            anomalous_weeks: 4,
            ..SynthParams::default()
        };
        assert!(synthesize(&p).is_err());
    }

    #[test]
    fn synthesize_is_deterministic() {
        let p = SynthParams::default();
        assert_eq!(synthesize(&p).unwrap(), synthesize(&p).unwrap());
    }

    #[test]
    fn standardization_round_trip() {
        let s = synthesize(&SynthParams::default()).unwrap();
        let stats = StandardizationStats::fit(s.samples()).unwrap();
        let z = stats.standardize(s.samples());
        let again = StandardizationStats::fit(&z).unwrap();
        assert_relative_eq!(again.mean, 0.0, epsilon = 1e-9);
        assert_relative_eq!(again.std, 1.0, epsilon = 1e-9);
        for (a, b) in stats.destandardize(&z).iter().zip(s.samples()) {
            assert_relative_eq!(a, b, epsilon = 1e-9);
        }
        assert!(matches!(
            StandardizationStats::fit(&[2.0; 10]),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn fifteen_week_test_split() {
        let s = synthesize(&SynthParams::default()).unwrap();
        let plan = make_splits(&s, 1).unwrap();
        assert_eq!(plan.detector_train.len(), 37);
        assert_eq!(plan.test.len(), 15);
        assert!(plan.detector_train.iter().all(|&w| !s.is_abnormal_week(w)));
        assert_eq!(plan.policy_train.len(), 15);
        assert_eq!(plan.policy_test.len(), 52);
        let abnormal: Vec<usize> = (0..52).filter(|&w| s.is_abnormal_week(w)).collect();
        assert!(abnormal.iter().all(|w| plan.policy_train.contains(w)));
    }

    #[test]
    fn all_normal_dataset_cannot_split() {
        let s = synthesize(&SynthParams {
            anomalous_weeks: 0,
            ..SynthParams::default()
        })
        .unwrap();
        assert!(make_splits(&s, 1).is_err());
    }
}
