//! Certified robust bounds for the measured-qubit classifier.
//!
//! For a pure input classified by `p0 - p1` against `ε`, the measured
//! qubit's `Z` coefficient of the output Bloch vector is
//! `v2 = (2 p0 - 1) / √(2^n - 1)` and the decision layer sits at
//! `t = ε / √(2^n - 1)`. The closest unit vector on that layer makes
//! `cos θ_min = ±v2·t + √((1 - v2²)(1 - t²))` with the centre, and every
//! pure state with fidelity above `(1 + (2^n - 1) cos θ_min) / 2^n` keeps
//! the label. The certified radius is `δ = 1 - (1 + (2^n - 1) cos θ_min) / 2^n`.

mod probe;
mod report;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{
    check_probabilities, classify, ClassificationPolicy, Classifier, EncodedSample, Label,
};
use crate::error::{Error, Result};
use crate::quantum::PureState;

pub use probe::{adversarial_probe, boundary_direction, Counterexample};
pub use report::{format_significant, ReportRow, CSV_HEADER, DEFAULT_DIGITS, FULL_DIGITS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifierConfig {
    epsilon: f64,
    n: usize,
    t: f64,
}

fn bloch_scale(n: usize) -> f64 {
    (((1u64 << n) - 1) as f64).sqrt()
}

impl VerifierConfig {
    pub fn new(epsilon: f64, n: usize) -> Result<Self> {
        if n == 0 || n > 30 {
            return Err(Error::UnsupportedQubitCount {
                n,
                reason: "verifier supports 1..=30 qubits",
            });
        }
        ClassificationPolicy::new(epsilon)?;
        let t = epsilon / bloch_scale(n);
        Ok(Self { epsilon, n, t })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Height of the decision layer, `ε / √(2^n - 1)`.
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn policy(&self) -> ClassificationPolicy {
        ClassificationPolicy::new(self.epsilon).expect("validated in new")
    }
}

/// One certified row: the measurement, its Bloch coefficient and the bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerificationResult {
    pub n: usize,
    pub p0: f64,
    pub p1: f64,
    pub v2: f64,
    pub cos_theta_min: f64,
    pub delta: f64,
    pub label: Label,
    /// Set when `p0` came from finite sampling rather than the exact state.
    #[serde(default)]
    pub statistical: bool,
}

/// The outcome of running the certifier on one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Verdict {
    Certified(VerificationResult),
    /// `|p0 - p1| ≤ ε`: no label, hence no bound.
    Unclassifiable {
        p0: f64,
        p1: f64,
        v2: f64,
    },
}

impl Verdict {
    pub fn certified(&self) -> Option<&VerificationResult> {
        match self {
            Verdict::Certified(r) => Some(r),
            Verdict::Unclassifiable { .. } => None,
        }
    }

    pub fn label(&self) -> Label {
        match self {
            Verdict::Certified(r) => r.label,
            Verdict::Unclassifiable { .. } => Label::Unknown,
        }
    }

    pub fn p0(&self) -> f64 {
        match self {
            Verdict::Certified(r) => r.p0,
            Verdict::Unclassifiable { p0, .. } => *p0,
        }
    }
}

pub fn v2_from_p0(p0: f64, n: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&p0) {
        return Err(Error::OutOfRange {
            value: p0,
            range: "[0, 1]",
        });
    }
    Ok((2.0 * p0 - 1.0) / bloch_scale(n))
}

fn cos_for_label(v2: f64, t: f64, label: Label) -> f64 {
    let tangential = ((1.0 - v2 * v2) * (1.0 - t * t)).max(0.0).sqrt();
    let c = match label {
        Label::Zero => v2 * t + tangential,
        Label::One => -v2 * t + tangential,
        Label::Unknown => unreachable!("no bound for unclassified states"),
    };
    c.min(1.0)
}

/// Largest cosine between the centre `v` and a unit vector on the decision
/// layer (`u2 = ±t`). Requires `|v2| > t`.
pub fn cos_theta_min(v2: f64, epsilon: f64, n: usize) -> Result<f64> {
    let config = VerifierConfig::new(epsilon, n)?;
    let t = config.t;
    if !(-1.0..=1.0).contains(&v2) {
        return Err(Error::OutOfRange {
            value: v2,
            range: "[-1, 1]",
        });
    }
    let label = if v2 > t {
        Label::Zero
    } else if v2 < -t {
        Label::One
    } else {
        let p0 = (1.0 + bloch_scale(n) * v2) / 2.0;
        return Err(Error::Unclassifiable {
            p0,
            p1: 1.0 - p0,
            epsilon,
        });
    };
    Ok(cos_for_label(v2, t, label))
}

/// `δ = 1 - (1 + (2^n - 1) cos θ_min) / 2^n`.
pub fn robust_bound(cos_theta_min: f64, n: usize) -> Result<f64> {
    if !(-1.0..=1.0).contains(&cos_theta_min) {
        return Err(Error::OutOfRange {
            value: cos_theta_min,
            range: "[-1, 1]",
        });
    }
    let d = (1u64 << n) as f64;
    Ok((1.0 - (1.0 + (d - 1.0) * cos_theta_min) / d).clamp(0.0, 1.0))
}

/// Certifies a measured `(p0, p1)` pair.
pub fn verify_probabilities(p0: f64, p1: f64, config: &VerifierConfig) -> Result<Verdict> {
    check_probabilities(p0, p1)?;
    let p0 = p0.clamp(0.0, 1.0);
    let v2 = v2_from_p0(p0, config.n)?;
    let label = classify(p0, p1, &config.policy())?;
    if label == Label::Unknown {
        return Ok(Verdict::Unclassifiable { p0, p1, v2 });
    }
    let cos = cos_for_label(v2, config.t, label);
    let delta = robust_bound(cos, config.n)?;
    Ok(Verdict::Certified(VerificationResult {
        n: config.n,
        p0,
        p1,
        v2,
        cos_theta_min: cos,
        delta,
        label,
        statistical: false,
    }))
}

fn check_classifier(classifier: &Classifier, config: &VerifierConfig) -> Result<()> {
    if classifier.n() != config.n {
        return Err(Error::DimensionMismatch {
            expected: config.n,
            found: classifier.n(),
        });
    }
    Ok(())
}

/// Runs the classifier on `input` and certifies the exact measurement.
pub fn verify_state(
    input: &PureState,
    classifier: &Classifier,
    config: &VerifierConfig,
) -> Result<Verdict> {
    check_classifier(classifier, config)?;
    let (p0, p1) = classifier.forward(input)?;
    verify_probabilities(p0, p1, config)
}

/// Like [`verify_state`] but estimates `p0` from `shots` simulated
/// measurements; the result is flagged as statistical.
pub fn verify_state_sampled(
    input: &PureState,
    classifier: &Classifier,
    config: &VerifierConfig,
    shots: usize,
    seed: u64,
) -> Result<Verdict> {
    check_classifier(classifier, config)?;
    let (p0, p1) = classifier.shot_estimate(input, shots, seed)?;
    Ok(match verify_probabilities(p0, p1, config)? {
        Verdict::Certified(mut r) => {
            r.statistical = true;
            Verdict::Certified(r)
        }
        other => other,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub total: usize,
    pub zero: usize,
    pub one: usize,
    pub unclassifiable: usize,
    /// The classifier-level certified radius: the smallest δ over the
    /// classified samples.
    pub min_delta: Option<f64>,
    pub min_delta_index: Option<usize>,
    /// Classified samples whose label disagrees with the dataset label.
    pub mislabeled: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub epsilon: f64,
    pub n: usize,
    pub verdicts: Vec<Verdict>,
    /// Dataset labels, when the report came from labelled samples.
    pub labels: Option<Vec<u8>>,
    pub summary: DatasetSummary,
}

impl DatasetReport {
    fn build(verdicts: Vec<Verdict>, labels: Option<Vec<u8>>, config: &VerifierConfig) -> Self {
        let mut summary = DatasetSummary {
            total: verdicts.len(),
            zero: 0,
            one: 0,
            unclassifiable: 0,
            min_delta: None,
            min_delta_index: None,
            mislabeled: 0,
        };
        for (i, v) in verdicts.iter().enumerate() {
            match v {
                Verdict::Unclassifiable { .. } => summary.unclassifiable += 1,
                Verdict::Certified(r) => {
                    match r.label {
                        Label::Zero => summary.zero += 1,
                        Label::One => summary.one += 1,
                        Label::Unknown => {}
                    }
                    if let Some(labels) = &labels {
                        if r.label.class() != Some(labels[i]) {
                            summary.mislabeled += 1;
                        }
                    }
                    if summary.min_delta.is_none_or(|m| r.delta < m) {
                        summary.min_delta = Some(r.delta);
                        summary.min_delta_index = Some(i);
                    }
                }
            }
        }
        Self {
            epsilon: config.epsilon,
            n: config.n,
            verdicts,
            labels,
            summary,
        }
    }

    pub fn rows(&self) -> Vec<ReportRow> {
        self.verdicts
            .iter()
            .enumerate()
            .map(|(i, v)| ReportRow::from_verdict(i, v))
            .collect()
    }
}

/// [`verify_dataset`] with shot-estimated probabilities; sample `i` uses
/// seed `seed + i`.
pub fn verify_dataset_sampled(
    samples: &[EncodedSample],
    classifier: &Classifier,
    config: &VerifierConfig,
    shots: usize,
    seed: u64,
) -> Result<DatasetReport> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_classifier(classifier, config)?;
    let verdicts = samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let state = crate::classifier::amplitude_encode(s.features())?;
            verify_state_sampled(
                &state,
                classifier,
                config,
                shots,
                seed.wrapping_add(i as u64),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let labels = samples.iter().map(EncodedSample::label).collect();
    Ok(DatasetReport::build(verdicts, Some(labels), config))
}

/// Certifies every sample. Unclassifiable samples are recorded, not fatal.
pub fn verify_dataset(
    samples: &[EncodedSample],
    classifier: &Classifier,
    config: &VerifierConfig,
) -> Result<DatasetReport> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_classifier(classifier, config)?;
    let verdicts = samples
        .par_iter()
        .map(|s| {
            let state = crate::classifier::amplitude_encode(s.features())?;
            verify_state(&state, classifier, config)
        })
        .collect::<Result<Vec<_>>>()?;
    let labels = samples.iter().map(EncodedSample::label).collect();
    Ok(DatasetReport::build(verdicts, Some(labels), config))
}

/// Certifies raw `p0` values (`p1 = 1 - p0`).
pub fn verify_p0_values(p0s: &[f64], config: &VerifierConfig) -> Result<DatasetReport> {
    if p0s.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let verdicts = p0s
        .iter()
        .map(|&p0| {
            if !(0.0..=1.0).contains(&p0) {
                return Err(Error::OutOfRange {
                    value: p0,
                    range: "[0, 1]",
                });
            }
            verify_probabilities(p0, 1.0 - p0, config)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DatasetReport::build(verdicts, None, config))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn v2_examples() {
        assert!((v2_from_p0(0.625719, 8).unwrap() - 0.0157457).abs() < 1e-7);
        assert_eq!(v2_from_p0(0.5, 3).unwrap(), 0.0);
        assert!((v2_from_p0(0.115384, 8).unwrap() + 0.0481711).abs() < 1e-7);
        assert!(v2_from_p0(1.2, 8).is_err());
    }

    #[test]
    fn cos_examples() {
        assert!((cos_theta_min(0.0157457, 0.0, 8).unwrap() - 0.999876).abs() < 1e-6);
        assert!((cos_theta_min(0.0157457, 0.01, 8).unwrap() - 0.999886).abs() < 1e-6);
        assert_eq!(cos_theta_min(1.0, 0.0, 1).unwrap(), 0.0);
        assert!(matches!(
            cos_theta_min(0.0001, 0.01, 8),
            Err(Error::Unclassifiable { .. })
        ));
    }

    #[test]
    fn bound_examples() {
        assert!((robust_bound(0.999876, 8).unwrap() - 0.000123487).abs() < 1e-6);
        assert_eq!(robust_bound(1.0, 8).unwrap(), 0.0);
        assert!((robust_bound(0.998948, 8).unwrap() - 0.00104755).abs() < 1e-6);
        assert!(robust_bound(1.5, 8).is_err());
    }

    #[test]
    fn verdict_branches() {
        let c0 = VerifierConfig::new(0.0, 8).unwrap();
        let c1 = VerifierConfig::new(0.01, 8).unwrap();
        let r = *verify_probabilities(0.688041, 1.0 - 0.688041, &c0)
            .unwrap()
            .certified()
            .unwrap();
        assert_eq!(r.label, Label::Zero);
        assert!((r.v2 - 0.0235512).abs() < 1e-6);
        assert!((r.cos_theta_min - 0.999723).abs() < 1e-6);
        assert!((r.delta - 0.000276284).abs() < 1e-6);
        let r = *verify_probabilities(0.11719, 1.0 - 0.11719, &c1)
            .unwrap()
            .certified()
            .unwrap();
        assert_eq!(r.label, Label::One);
        assert!((r.v2 + 0.0479449).abs() < 1e-6);
        assert!((r.cos_theta_min - 0.99888).abs() < 1e-6);
        assert!((r.delta - 0.00111582).abs() < 1e-6);
        assert!(matches!(
            verify_probabilities(0.5, 0.5, &c1).unwrap(),
            Verdict::Unclassifiable { .. }
        ));
    }

    #[test]
    fn p0_list_summary() {
        let c0 = VerifierConfig::new(0.0, 8).unwrap();
        let report =
            verify_p0_values(&[0.625719, 0.133918, 0.115384, 0.11719, 0.688041], &c0).unwrap();
        assert_eq!(report.summary.zero, 2);
        assert_eq!(report.summary.one, 3);
        assert_eq!(report.summary.min_delta_index, Some(0));
        assert!((report.summary.min_delta.unwrap() - 0.000123487).abs() < 1e-8);
        assert!(verify_p0_values(&[], &c0).is_err());
        let ties = verify_p0_values(&[0.5, 0.5], &c0).unwrap();
        assert_eq!(ties.summary.unclassifiable, 2);
        assert_eq!(ties.summary.min_delta, None);
    }

    #[test]
    fn config_validation() {
        assert!(VerifierConfig::new(1.0, 8).is_err());
        assert!(VerifierConfig::new(0.1, 0).is_err());
        let c = VerifierConfig::new(0.3, 2).unwrap();
        assert!((c.t() - 0.3 / 3f64.sqrt()).abs() < 1e-15);
    }
}
