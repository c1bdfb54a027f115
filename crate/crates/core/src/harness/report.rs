//! Experiment reports and their canonical JSON form.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{ClpError, Result};

/// Floats that may be infinite or NaN round-trip as the strings
/// `"inf"`, `"-inf"` and `"nan"`.
mod lenient_f64 {
    use super::*;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(x),
            Raw::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("bad float {other:?}"))),
            },
        }
    }
}

mod lenient_opt_f64 {
    use super::*;

    pub fn serialize<S: Serializer>(x: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        match x {
            Some(v) => super::lenient_f64::serialize(v, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
        #[derive(Deserialize)]
        struct Wrap(#[serde(with = "super::lenient_f64")] f64);
        Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Arm {
    #[serde(rename = "CQR")]
    Cqr,
    #[serde(rename = "S-CQR")]
    SampledCqr,
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Cqr => "CQR",
            Self::SampledCqr => "S-CQR",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Ok,
    DegenerateCalibration,
    Failed(String),
}

/// One arm of one trial. Failed trials carry NaN metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub arm: Arm,
    #[serde(with = "lenient_f64")]
    pub coverage: f64,
    #[serde(with = "lenient_f64")]
    pub avg_length: f64,
    #[serde(with = "lenient_f64")]
    pub q_hat: f64,
    #[serde(with = "lenient_f64")]
    pub ks_before: f64,
    #[serde(with = "lenient_f64")]
    pub ks_after: f64,
    pub seed: u64,
    pub trial: usize,
    pub split: usize,
    pub repetition: usize,
    pub train_size: usize,
    pub calib_size: usize,
    pub test_size: usize,
    /// Density of the positive train and val links the arm saw.
    #[serde(with = "lenient_f64")]
    pub density: f64,
    /// FNV-1a digest of the test edges in evaluation order.
    pub test_digest: String,
    pub status: TrialStatus,
}

impl TrialRecord {
    pub fn is_ok(&self) -> bool {
        self.status == TrialStatus::Ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub trials: usize,
    pub failed: usize,
    #[serde(with = "lenient_f64")]
    pub mean_coverage: f64,
    #[serde(with = "lenient_f64")]
    pub std_coverage: f64,
    #[serde(with = "lenient_f64")]
    pub mean_length: f64,
    #[serde(with = "lenient_f64")]
    pub std_length: f64,
    #[serde(with = "lenient_f64")]
    pub mean_ks_before: f64,
    #[serde(with = "lenient_f64")]
    pub mean_ks_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub arms: BTreeMap<Arm, ArmSummary>,
    /// Relative interval shrinkage of S-CQR over CQR, in percent.
    #[serde(with = "lenient_opt_f64")]
    pub improvement_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config_echo: BTreeMap<String, String>,
    pub trials: Vec<TrialRecord>,
    pub summary: Summary,
}

/// Mean and sample standard deviation; `(NaN, NaN)` when empty.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn improvement_pct(len_cqr: f64, len_scqr: f64) -> f64 {
    (len_cqr - len_scqr) / len_cqr * 100.0
}

/// Aggregates the successful trials of each arm.
pub fn summarize(trials: &[TrialRecord]) -> Summary {
    let mut by_arm: BTreeMap<Arm, Vec<&TrialRecord>> = BTreeMap::new();
    for t in trials {
        by_arm.entry(t.arm).or_default().push(t);
    }
    let arms: BTreeMap<Arm, ArmSummary> = by_arm
        .into_iter()
        .map(|(arm, records)| {
            let ok: Vec<&&TrialRecord> = records.iter().filter(|r| r.is_ok()).collect();
            let col = |f: fn(&TrialRecord) -> f64| ok.iter().map(|r| f(r)).collect::<Vec<f64>>();
            let (mean_coverage, std_coverage) = mean_std(&col(|r| r.coverage));
            let (mean_length, std_length) = mean_std(&col(|r| r.avg_length));
            let summary = ArmSummary {
                trials: records.len(),
                failed: records.len() - ok.len(),
                mean_coverage,
                std_coverage,
                mean_length,
                std_length,
                mean_ks_before: mean_std(&col(|r| r.ks_before)).0,
                mean_ks_after: mean_std(&col(|r| r.ks_after)).0,
            };
            (arm, summary)
        })
        .collect();
    let improvement_pct = match (arms.get(&Arm::Cqr), arms.get(&Arm::SampledCqr)) {
        (Some(a), Some(b)) if a.mean_length.is_finite() && b.mean_length.is_finite() => {
            Some(improvement_pct(a.mean_length, b.mean_length))
        }
        _ => None,
    };
    Summary {
        arms,
        improvement_pct,
    }
}

impl ExperimentReport {
    pub fn new(config_echo: BTreeMap<String, String>, trials: Vec<TrialRecord>) -> Self {
        let summary = summarize(&trials);
        Self {
            config_echo,
            trials,
            summary,
        }
    }

    pub fn arm(&self, arm: Arm) -> Option<&ArmSummary> {
        self.summary.arms.get(&arm)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn write_report(report: &ExperimentReport, path: &Path) -> Result<()> {
    write_text(path, &report.to_json()?)
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| ClpError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Hex FNV-1a digest of a byte stream.
pub fn fnv_digest(bytes: impl IntoIterator<Item = u8>) -> String {
    let h = bytes.into_iter().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    });
    format!("{h:016x}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(arm: Arm, coverage: f64, len: f64) -> TrialRecord {
        TrialRecord {
            arm,
            coverage,
            avg_length: len,
            q_hat: 0.1,
            ks_before: 0.05,
            ks_after: 0.04,
            seed: 9,
            trial: 0,
            split: 0,
            repetition: 0,
            train_size: 10,
            calib_size: 10,
            test_size: 10,
            density: 0.01,
            test_digest: fnv_digest(*b"abc"),
            status: TrialStatus::Ok,
        }
    }

    #[test]
    fn improvement_matches_reference_row() {
        let pct = improvement_pct(0.8078, 0.4844);
        assert_eq!((pct * 100.0).round() / 100.0, 40.03);
        let s = summarize(&[record(Arm::Cqr, 0.9, 0.8078), record(Arm::SampledCqr, 0.91, 0.4844)]);
        assert!((s.improvement_pct.unwrap() - pct).abs() < 1e-12);
    }

    #[test]
    fn improvement_needs_both_arms() {
        let s = summarize(&[record(Arm::Cqr, 0.9, 0.5)]);
        assert_eq!(s.improvement_pct, None);
    }

    #[test]
    fn failed_trials_are_counted_not_averaged() {
        let mut bad = record(Arm::SampledCqr, f64::NAN, f64::NAN);
        bad.status = TrialStatus::DegenerateCalibration;
        bad.q_hat = f64::INFINITY;
        let s = summarize(&[bad, record(Arm::SampledCqr, 0.8, 0.4)]);
        let arm = &s.arms[&Arm::SampledCqr];
        assert_eq!((arm.trials, arm.failed), (2, 1));
        assert_eq!(arm.mean_coverage, 0.8);
        assert_eq!(arm.std_coverage, 0.0);
    }

    #[test]
    fn two_trials_serialize_as_array_and_roundtrip_bytes() {
        let mut odd = record(Arm::SampledCqr, 0.1 + 0.2, 1.0 / 3.0);
        odd.q_hat = f64::INFINITY;
        odd.ks_after = f64::NAN;
        let echo = BTreeMap::from([("alpha".to_string(), "0.1".to_string())]);
        let report = ExperimentReport::new(echo, vec![record(Arm::Cqr, 0.9, 0.5), odd]);
        let text = report.to_json().unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["trials"].as_array().unwrap().len(), 2);
        assert_eq!(value["trials"][1]["q_hat"], "inf");
        let keys: Vec<&String> = value.as_object().unwrap().keys().collect();
        assert_eq!(keys, ["config_echo", "summary", "trials"]);
        let again = ExperimentReport::from_json(&text).unwrap().to_json().unwrap();
        assert_eq!(again, text);
        assert!(text.find("\"config_echo\"").unwrap() < text.find("\"trials\"").unwrap());
    }

    #[test]
    fn write_report_surfaces_path() {
        let report = ExperimentReport::new(BTreeMap::new(), vec![]);
        let path = Path::new("/nonexistent-dir/report.json");
        match write_report(&report, path) {
            Err(ClpError::Io { path: p, .. }) => assert_eq!(p, path),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mean_std_values() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
        assert!(mean_std(&[]).0.is_nan());
    }
}
