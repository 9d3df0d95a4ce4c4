use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{VerificationResult, VerifierConfig};
use crate::bloch::BlochVector;
use crate::classifier::{classify, Classifier, Label};
use crate::error::{Error, Result};
use crate::quantum::{GateOp, PureState};

/// A state inside the certified ball that received a different label.
#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample {
    pub state: PureState,
    pub fidelity: f64,
    pub p0: f64,
    pub p1: f64,
    pub label: Label,
}

/// Fraction of δ used for samples placed on the ball's boundary; the
/// certificate covers the open ball only.
const SHELL_FRACTION: f64 = 1.0 - 1e-9;

fn unit_orthogonal(psi: &[Complex64], mut v: Vec<Complex64>) -> Option<Vec<Complex64>> {
    let overlap: Complex64 = psi.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
    for (x, a) in v.iter_mut().zip(psi) {
        *x -= overlap * a;
    }
    let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    (norm > 1e-12).then(|| v.into_iter().map(|x| x / norm).collect())
}

/// Direction in which `<O> = p0 - p1` falls fastest, `O = U† Z_q U`.
fn steepest_direction(classifier: &Classifier, psi: &PureState) -> Result<Option<Vec<Complex64>>> {
    let mut observed = classifier.output_state(psi)?;
    observed.apply_gate(&GateOp::z(classifier.measured_qubit()))?;
    observed.apply_circuit(&classifier.circuit().inverse())?;
    Ok(unit_orthogonal(
        psi.amplitudes(),
        observed.into_amplitudes(),
    ))
}

/// Samples pure states `σ` with `F(ψ, σ) ≥ 1 - δ` and returns the first one
/// whose label differs from the certified one.
///
/// Each draw fixes a target fidelity `F` (alternating between the boundary
/// shell and a uniform draw inside the ball) and a unit direction `φ ⊥ ψ`
/// (Gaussian, or every fourth draw the steepest direction towards the
/// other class), then sets `σ = √F ψ + √(1-F) φ`, so `|<ψ|σ>|² = F` exactly.
pub fn adversarial_probe(
    input: &PureState,
    classifier: &Classifier,
    config: &VerifierConfig,
    result: &VerificationResult,
    samples: usize,
    seed: u64,
) -> Result<Option<Counterexample>> {
    if result.label == Label::Unknown {
        return Err(Error::InvalidConfig(
            "cannot probe an unclassified state".into(),
        ));
    }
    if classifier.n() != input.n() {
        return Err(Error::DimensionMismatch {
            expected: classifier.n(),
            found: input.n(),
        });
    }
    if samples == 0 {
        return Ok(None);
    }
    let policy = config.policy();
    let psi = input.amplitudes();
    let dim = psi.len();
    let steepest = steepest_direction(classifier, input)?.map(|d| {
        // Toward the opposite class: decrease p0 - p1 for Zero, increase for One.
        let sign = if result.label == Label::Zero {
            -1.0
        } else {
            1.0
        };
        d.into_iter().map(|x| x * sign).collect::<Vec<_>>()
    });
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..samples {
        let radius = if k % 2 == 0 {
            result.delta * SHELL_FRACTION
        } else {
            result.delta * rng.random::<f64>()
        };
        let fid = (1.0 - radius).clamp(0.0, 1.0);
        let direction = match (&steepest, k % 4) {
            (Some(d), 0) => d.clone(),
            _ => {
                let noise: Vec<Complex64> = (0..dim)
                    .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                    .collect();
                match unit_orthogonal(psi, noise) {
                    Some(d) => d,
                    None => continue,
                }
            }
        };
        let (a, b) = (fid.sqrt(), (1.0 - fid).sqrt());
        let amps: Vec<Complex64> = psi
            .iter()
            .zip(&direction)
            .map(|(p, d)| p * a + d * b)
            .collect();
        let sigma = PureState::normalized(input.n(), amps)?;
        let fidelity = input.inner(&sigma)?.norm_sqr();
        let (p0, p1) = classifier.forward(&sigma)?;
        let label = classify(p0, p1, &policy)?;
        if label != result.label {
            return Ok(Some(Counterexample {
                state: sigma,
                fidelity,
                p0,
                p1,
                label,
            }));
        }
    }
    Ok(None)
}

/// The unit vector on the decision layer closest to `v`: its measured
/// coordinate is `±t` and the remaining coordinates are parallel to those of
/// `v`. For `n = 1` this is a physical state at angle `θ_min` from `v`.
pub fn boundary_direction(
    v: &BlochVector,
    measured: usize,
    t: f64,
    label: Label,
) -> Result<BlochVector> {
    let coords = v.coords();
    if measured >= coords.len() {
        return Err(Error::IndexOutOfRange {
            index: measured,
            n: coords.len(),
        });
    }
    let layer = match label {
        Label::Zero => t,
        Label::One => -t,
        Label::Unknown => {
            return Err(Error::InvalidConfig(
                "boundary of an unclassified state".into(),
            ))
        }
    };
    let perp_norm = coords
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != measured)
        .map(|(_, x)| x * x)
        .sum::<f64>()
        .sqrt();
    let radial = (1.0 - t * t).max(0.0).sqrt();
    let mut u: Vec<f64> = if perp_norm > 1e-15 {
        coords.iter().map(|x| x * radial / perp_norm).collect()
    } else {
        let mut u = vec![0.0; coords.len()];
        u[if measured == 0 { 1 } else { 0 }] = radial;
        u
    };
    u[measured] = layer;
    BlochVector::new(v.n(), u)
}
