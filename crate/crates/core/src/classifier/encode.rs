use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::PureState;

/// A unit-norm real feature vector with a binary label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedSample {
    features: Vec<f64>,
    label: u8,
}

impl EncodedSample {
    pub fn new(features: Vec<f64>, label: u8) -> Result<Self> {
        if label > 1 {
            return Err(Error::InvalidConfig(format!("label {label} is not 0 or 1")));
        }
        if features.len() < 2 || !features.len().is_power_of_two() {
            return Err(Error::DimensionMismatch {
                expected: features.len().next_power_of_two().max(2),
                found: features.len(),
            });
        }
        let norm = features.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidState(format!("feature norm {norm} != 1")));
        }
        Ok(Self { features, label })
    }

    /// L2-normalizes `features` first.
    pub fn normalized(features: Vec<f64>, label: u8) -> Result<Self> {
        let norm = features.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroVector);
        }
        Self::new(features.into_iter().map(|x| x / norm).collect(), label)
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn label(&self) -> u8 {
        self.label
    }

    pub fn to_state(&self) -> PureState {
        amplitude_encode(&self.features).expect("validated at construction")
    }
}

/// `|ψ> = Σ_i x_i |i> / |x|`, with basis index `i` read with qubit 0 as the
/// most significant bit.
pub fn amplitude_encode(features: &[f64]) -> Result<PureState> {
    let len = features.len();
    if len < 2 || !len.is_power_of_two() {
        return Err(Error::DimensionMismatch {
            expected: len.next_power_of_two().max(2),
            found: len,
        });
    }
    let n = len.trailing_zeros() as usize;
    let amps = features.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    PureState::normalized(n, amps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_vector() {
        let mut x = vec![0.0; 8];
        x[0] = 1.0;
        assert_eq!(amplitude_encode(&x).unwrap(), PureState::zero(3));
    }

    #[test]
    fn uniform_superposition() {
        let psi = amplitude_encode(&[1.0; 256]).unwrap();
        assert_eq!(psi.n(), 8);
        for a in psi.amplitudes() {
            assert!((a.re - 1.0 / 16.0).abs() < 1e-15 && a.im == 0.0);
        }
    }

    #[test]
    fn three_four() {
        let psi = amplitude_encode(&[3.0, 4.0, 0.0, 0.0]).unwrap();
        let re: Vec<f64> = psi.amplitudes().iter().map(|a| a.re).collect();
        assert!((re[0] - 0.6).abs() < 1e-15 && (re[1] - 0.8).abs() < 1e-15);
        assert_eq!(&re[2..], &[0.0, 0.0]);
    }

    #[test]
    fn rejects_zero_and_bad_lengths() {
        assert!(matches!(
            amplitude_encode(&[0.0; 4]),
            Err(Error::ZeroVector)
        ));
        assert!(amplitude_encode(&[1.0; 3]).is_err());
        assert!(amplitude_encode(&[1.0]).is_err());
        assert!(EncodedSample::new(vec![1.0, 1.0], 0).is_err());
        assert!(EncodedSample::new(vec![1.0, 0.0], 2).is_err());
        assert!(EncodedSample::normalized(vec![0.0, 0.0], 0).is_err());
    }
}
