//! Softmax cross-entropy training of a QCNN with parameter-shift gradients
//! and Adam.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{
    amplitude_encode, classify, Ansatz, ClassificationPolicy, Classifier, EncodedSample, Label,
};
use crate::error::{Error, Result};
use crate::quantum::{Circuit, GateKind, PureState};

/// Step used for central finite differences on controlled rotations.
pub const FINITE_DIFFERENCE_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            epochs: 20,
            batch_size: 32,
            seed: 7,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |x: f64| x > 0.0 && x < 1.0;
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be nonnegative, got {}",
                self.learning_rate
            )));
        }
        if !open_unit(self.beta1) || !open_unit(self.beta2) {
            return Err(Error::InvalidConfig(
                "beta1 and beta2 must lie in (0, 1)".into(),
            ));
        }
        if self.adam_epsilon.is_nan() || self.adam_epsilon <= 0.0 {
            return Err(Error::InvalidConfig("adam_epsilon must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Cross-entropy of `softmax(p0, p1)` against the one-hot `label`; the
/// probabilities are used as logits.
pub fn loss(p0: f64, p1: f64, label: u8) -> f64 {
    let (target, other) = if label == 0 { (p0, p1) } else { (p1, p0) };
    // log(e^target + e^other) - target, written to stay positive.
    (1.0 + (other - target).exp()).ln()
}

/// `dL/dp0` when `p1 = 1 - p0`.
fn loss_slope(p0: f64, label: u8) -> f64 {
    let p1 = 1.0 - p0;
    let s0 = 1.0 / (1.0 + (p1 - p0).exp());
    let s1 = 1.0 - s0;
    let (y0, y1) = if label == 0 { (1.0, 0.0) } else { (0.0, 1.0) };
    (s0 - y0) - (s1 - y1)
}

/// A mean batch gradient. `finite_difference[i]` flags parameters whose
/// derivative came from central differences instead of the shift rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub values: Vec<f64>,
    pub finite_difference: Vec<bool>,
}

/// One term of `dp0/dθ_p`: `weight · (p0(plus) - p0(minus))`.
struct DerivativeTerm {
    param: usize,
    weight: f64,
    plus: Circuit,
    minus: Circuit,
}

/// Circuits needed for `dp0/dθ`. Parameters that only feed single-qubit
/// Pauli rotations use the two-term shift rule per occurrence; any other
/// parameter falls back to central differences over all its occurrences.
fn derivative_plan(
    ansatz: &impl Ansatz,
    theta: &[f64],
) -> Result<(Vec<DerivativeTerm>, Vec<bool>)> {
    let template = ansatz.template();
    let mut terms = Vec::new();
    let mut fallback = vec![false; ansatz.num_params()];
    for p in 0..ansatz.num_params() {
        let uses: Vec<usize> = (0..template.len())
            .filter(|&i| template[i].param == Some(p))
            .collect();
        let shiftable = uses.iter().all(|&i| {
            let g = &template[i];
            g.control.is_none() && matches!(g.kind, GateKind::Rx | GateKind::Ry | GateKind::Rz)
        });
        if shiftable {
            for &i in &uses {
                terms.push(DerivativeTerm {
                    param: p,
                    weight: 0.5,
                    plus: ansatz.circuit_with_shift(theta, Some((i, FRAC_PI_2)))?,
                    minus: ansatz.circuit_with_shift(theta, Some((i, -FRAC_PI_2)))?,
                });
            }
        } else {
            fallback[p] = true;
            let mut up = theta.to_vec();
            let mut down = theta.to_vec();
            up[p] += FINITE_DIFFERENCE_STEP;
            down[p] -= FINITE_DIFFERENCE_STEP;
            terms.push(DerivativeTerm {
                param: p,
                weight: 0.5 / FINITE_DIFFERENCE_STEP,
                plus: ansatz.circuit(&up)?,
                minus: ansatz.circuit(&down)?,
            });
        }
    }
    Ok((terms, fallback))
}

fn p0_of(circuit: &Circuit, measured: usize, input: &PureState) -> Result<f64> {
    let mut s = input.clone();
    s.apply_circuit(circuit)?;
    Ok(s.measure_probs(measured)?.0)
}

/// Per-sample loss gradient.
fn sample_gradient(
    terms: &[DerivativeTerm],
    base: &Circuit,
    measured: usize,
    num_params: usize,
    sample: &EncodedSample,
) -> Result<Vec<f64>> {
    let input = amplitude_encode(sample.features())?;
    let p0 = p0_of(base, measured, &input)?;
    let slope = loss_slope(p0, sample.label());
    let mut grad = vec![0.0; num_params];
    for t in terms {
        let d = p0_of(&t.plus, measured, &input)? - p0_of(&t.minus, measured, &input)?;
        grad[t.param] += slope * t.weight * d;
    }
    Ok(grad)
}

/// Mean gradient of the batch loss with respect to `theta`.
pub fn gradient<A: Ansatz + Sync>(
    ansatz: &A,
    theta: &[f64],
    batch: &[EncodedSample],
) -> Result<Gradient> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (terms, fallback) = derivative_plan(ansatz, theta)?;
    let base = ansatz.circuit(theta)?;
    let measured = ansatz.measured_qubit();
    let k = ansatz.num_params();
    let per_sample = batch
        .par_iter()
        .map(|s| sample_gradient(&terms, &base, measured, k, s))
        .collect::<Result<Vec<_>>>()?;
    // Fixed-order reduction keeps results independent of scheduling.
    let mut values = vec![0.0; k];
    for g in &per_sample {
        for (acc, x) in values.iter_mut().zip(g) {
            *acc += x;
        }
    }
    let scale = 1.0 / batch.len() as f64;
    values.iter_mut().for_each(|v| *v *= scale);
    Ok(Gradient {
        values,
        finite_difference: fallback,
    })
}

/// Mean loss over `samples`.
pub fn mean_loss<A: Ansatz + Sync>(
    ansatz: &A,
    theta: &[f64],
    samples: &[EncodedSample],
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let classifier = ansatz.bind(theta)?;
    let losses = samples
        .par_iter()
        .map(|s| {
            let (p0, p1) = classifier.forward(&amplitude_encode(s.features())?)?;
            Ok(loss(p0, p1, s.label()))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(losses.iter().sum::<f64>() / samples.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(num_params: usize) -> Self {
        Self {
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            step: 0,
        }
    }
}

/// One bias-corrected Adam update; returns the parameter increment and the
/// advanced state.
pub fn adam_step(
    state: &AdamState,
    grad: &[f64],
    config: &TrainConfig,
) -> Result<(Vec<f64>, AdamState)> {
    if state.m.len() != grad.len() || state.v.len() != grad.len() {
        return Err(Error::DimensionMismatch {
            expected: state.m.len(),
            found: grad.len(),
        });
    }
    let step = state.step + 1;
    let (b1, b2) = (config.beta1, config.beta2);
    let c1 = 1.0 - b1.powi(step as i32);
    let c2 = 1.0 - b2.powi(step as i32);
    let mut next = AdamState {
        m: Vec::with_capacity(grad.len()),
        v: Vec::with_capacity(grad.len()),
        step,
    };
    let mut delta = Vec::with_capacity(grad.len());
    for ((&g, &m), &v) in grad.iter().zip(&state.m).zip(&state.v) {
        let m = b1 * m + (1.0 - b1) * g;
        let v = b2 * v + (1.0 - b2) * g * g;
        let m_hat = m / c1;
        let v_hat = v / c2;
        delta.push(-config.learning_rate * m_hat / (v_hat.sqrt() + config.adam_epsilon));
        next.m.push(m);
        next.v.push(v);
    }
    Ok((delta, next))
}

/// Confusion counts of a labelled evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Evaluation {
    pub correct: usize,
    pub wrong: usize,
    pub unknown: usize,
    /// `[true label][predicted label]` for the classified samples.
    pub confusion: [[usize; 2]; 2],
}

impl Evaluation {
    pub fn from_predictions(pairs: impl IntoIterator<Item = (Label, u8)>) -> Self {
        let mut e = Self::default();
        for (pred, truth) in pairs {
            match pred.class() {
                None => e.unknown += 1,
                Some(c) => {
                    e.confusion[truth as usize][c as usize] += 1;
                    if c == truth {
                        e.correct += 1;
                    } else {
                        e.wrong += 1;
                    }
                }
            }
        }
        e
    }

    pub fn total(&self) -> usize {
        self.correct + self.wrong + self.unknown
    }

    /// Correct over all samples; Unknown counts against.
    pub fn accuracy(&self) -> f64 {
        if self.total() == 0 {
            return 0.0;
        }
        self.correct as f64 / self.total() as f64
    }

    /// Correct over the classified samples only.
    pub fn classified_accuracy(&self) -> Option<f64> {
        let classified = self.correct + self.wrong;
        (classified > 0).then(|| self.correct as f64 / classified as f64)
    }

    /// Fraction of samples that received a label.
    pub fn coverage(&self) -> f64 {
        if self.total() == 0 {
            return 0.0;
        }
        (self.correct + self.wrong) as f64 / self.total() as f64
    }
}

pub fn evaluate(
    classifier: &Classifier,
    dataset: &[EncodedSample],
    policy: &ClassificationPolicy,
) -> Result<Evaluation> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let preds = dataset
        .par_iter()
        .map(|s| {
            let (p0, p1) = classifier.forward(&amplitude_encode(s.features())?)?;
            Ok((classify(p0, p1, policy)?, s.label()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Evaluation::from_predictions(preds))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training loss after the epoch.
    pub loss: f64,
    pub train_acc: f64,
    pub test_acc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub theta: Vec<f64>,
    pub initial_theta: Vec<f64>,
    pub initial_loss: f64,
    pub history: Vec<EpochRecord>,
}

/// Uniform on `(-π, π)`.
pub fn init_theta(num_params: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..num_params).map(|_| rng.random_range(-PI..PI)).collect()
}

/// Seeded mini-batch training. The same seed drives initialization and the
/// per-epoch shuffles, so identical inputs give bit-identical outcomes.
pub fn train<A: Ansatz + Sync>(
    ansatz: &A,
    train_set: &[EncodedSample],
    test_set: Option<&[EncodedSample]>,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let initial_theta = init_theta(ansatz.num_params(), &mut rng);
    let initial_loss = mean_loss(ansatz, &initial_theta, train_set)?;
    let policy = ClassificationPolicy::default();
    let mut theta = initial_theta.clone();
    let mut adam = AdamState::new(theta.len());
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<EncodedSample> = chunk.iter().map(|&i| train_set[i].clone()).collect();
            let grad = gradient(ansatz, &theta, &batch)?;
            let (delta, next) = adam_step(&adam, &grad.values, config)?;
            adam = next;
            theta.iter_mut().zip(&delta).for_each(|(t, d)| *t += d);
        }
        let classifier = ansatz.bind(&theta)?;
        let test_acc = match test_set {
            Some(t) if !t.is_empty() => Some(evaluate(&classifier, t, &policy)?.accuracy()),
            _ => None,
        };
        history.push(EpochRecord {
            epoch,
            loss: mean_loss(ansatz, &theta, train_set)?,
            train_acc: evaluate(&classifier, train_set, &policy)?.accuracy(),
            test_acc,
        });
    }
    Ok(TrainOutcome {
        theta,
        initial_theta,
        initial_loss,
        history,
    })
}

/// Writes `epoch,loss,train_acc,test_acc` rows.
pub fn write_history_csv<W: Write>(history: &[EpochRecord], out: W) -> Result<()> {
    let to_err = |e: csv::Error| Error::InvalidConfig(format!("CSV output: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "loss", "train_acc", "test_acc"])
        .map_err(to_err)?;
    for r in history {
        w.write_record([
            r.epoch.to_string(),
            r.loss.to_string(),
            r.train_acc.to_string(),
            r.test_acc.map(|a| a.to_string()).unwrap_or_default(),
        ])
        .map_err(to_err)?;
    }
    w.flush()
        .map_err(|e| Error::InvalidConfig(format!("CSV output: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{build_qcnn, CustomAnsatz, ParamGate};

    #[test]
    fn loss_values() {
        assert!((loss(0.5, 0.5, 0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((loss(0.5, 0.5, 1) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((loss(1.0, 0.0, 0) - (1.0 + (-1f64).exp()).ln()).abs() < 1e-15);
        assert!((loss(1.0, 0.0, 0) - 0.313262).abs() < 1e-6);
        assert_eq!(loss(0.8, 0.2, 0), loss(0.2, 0.8, 1));
    }

    #[test]
    fn loss_slope_matches_difference_quotient() {
        for &p0 in &[0.05, 0.3, 0.5, 0.77] {
            for label in 0..2 {
                let h = 1e-6;
                let fd = (loss(p0 + h, 1.0 - p0 - h, label) - loss(p0 - h, 1.0 - p0 + h, label))
                    / (2.0 * h);
                assert!((fd - loss_slope(p0, label)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn constant_landscape_has_zero_gradient() {
        // RZ only adds phases, so p0 of |0> never moves.
        let ansatz = CustomAnsatz::new(
            1,
            vec![
                ParamGate::rotation(GateKind::Rz, 0, 0, None),
                ParamGate::rotation(GateKind::Rz, 1, 0, None),
            ],
            0,
        )
        .unwrap();
        let sample = EncodedSample::new(vec![1.0, 0.0], 1).unwrap();
        let g = gradient(&ansatz, &[0.4, -1.3], &[sample]).unwrap();
        assert!(g.values.iter().all(|v| v.abs() < 1e-15), "{:?}", g.values);
        assert_eq!(g.finite_difference, vec![false, false]);
    }

    #[test]
    fn batch_gradient_is_mean() {
        let arch = build_qcnn(2, 1).unwrap();
        let theta = [0.3, -0.8, 1.1, 0.4];
        let a = EncodedSample::normalized(vec![0.3, 0.1, 0.9, 0.2], 0).unwrap();
        let b = EncodedSample::normalized(vec![0.1, 0.8, 0.1, 0.5], 1).unwrap();
        let ga = gradient(&arch, &theta, std::slice::from_ref(&a)).unwrap();
        let gb = gradient(&arch, &theta, std::slice::from_ref(&b)).unwrap();
        let gab = gradient(&arch, &theta, &[a, b]).unwrap();
        for i in 0..4 {
            assert!((gab.values[i] - 0.5 * (ga.values[i] + gb.values[i])).abs() < 1e-12);
        }
        assert_eq!(gab.finite_difference, vec![false, false, true, true]);
    }

    #[test]
    fn adam_examples() {
        let cfg = TrainConfig::default();
        let (delta, state) = adam_step(&AdamState::new(3), &[0.0; 3], &cfg).unwrap();
        assert_eq!(delta, vec![0.0; 3]);
        assert_eq!(state.step, 1);
        let (delta, _) = adam_step(&AdamState::new(1), &[1.0], &cfg).unwrap();
        // m̂ = v̂ = 1 after bias correction: -lr / (1 + eps).
        assert!((delta[0] + 0.01 / (1.0 + 1e-8)).abs() < 1e-15);
        assert!((delta[0] + 0.00999999999).abs() < 1e-10);
        let (delta, _) = adam_step(&AdamState::new(2), &[0.25, 0.25], &cfg).unwrap();
        assert_eq!(delta[0], delta[1]);
        assert!(adam_step(&AdamState::new(2), &[1.0], &cfg).is_err());
    }

    #[test]
    fn evaluation_arithmetic() {
        use Label::*;
        let all_right = Evaluation::from_predictions([(Zero, 0), (One, 1)]);
        assert_eq!(all_right.accuracy(), 1.0);
        assert_eq!(all_right.classified_accuracy(), Some(1.0));
        let none = Evaluation::from_predictions([(Unknown, 0), (Unknown, 1)]);
        assert_eq!(none.classified_accuracy(), None);
        assert_eq!(none.coverage(), 0.0);
        let mixed =
            Evaluation::from_predictions([(Zero, 0), (One, 1), (One, 1), (Zero, 1), (Unknown, 0)]);
        assert_eq!(mixed.classified_accuracy(), Some(0.75));
        assert!((mixed.coverage() - 0.8).abs() < 1e-15);
        assert_eq!(mixed.confusion, [[1, 0], [1, 2]]);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            beta1: 1.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_learning_rate_keeps_theta() {
        let arch = build_qcnn(2, 1).unwrap();
        let data = vec![
            EncodedSample::normalized(vec![0.9, 0.1, 0.1, 0.1], 0).unwrap(),
            EncodedSample::normalized(vec![0.1, 0.1, 0.1, 0.9], 1).unwrap(),
        ];
        let cfg = TrainConfig {
            learning_rate: 0.0,
            epochs: 1,
            ..TrainConfig::default()
        };
        let out = train(&arch, &data, None, &cfg).unwrap();
        assert_eq!(out.theta, out.initial_theta);
        assert_eq!(out.history.len(), 1);
        assert!(train(&arch, &[], None, &cfg).is_err());
        let none = TrainConfig { epochs: 0, ..cfg };
        let out = train(&arch, &data, None, &none).unwrap();
        assert!(out.history.is_empty());
    }
}
