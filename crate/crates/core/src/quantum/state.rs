use num_complex::Complex64;

use super::gate::{Circuit, GateOp, Matrix2};
use crate::error::{Error, Result};

/// Tolerance on the amplitude norm accepted by [`PureState::new`].
pub const NORM_TOLERANCE: f64 = 1e-9;

/// Bit mask selecting `qubit` inside a basis index. Qubit 0 is the most
/// significant bit, so `|q0 q1 ... q_{n-1}>` reads left to right.
#[inline]
pub fn qubit_mask(n: usize, qubit: usize) -> usize {
    1 << (n - 1 - qubit)
}

/// Applies a single-qubit matrix (optionally controlled) to a `2^n` vector
/// by sweeping index pairs that differ only in the target bit.
pub(crate) fn apply_kernel(
    amps: &mut [Complex64],
    n: usize,
    target: usize,
    control: Option<usize>,
    m: &Matrix2,
) {
    let tmask = qubit_mask(n, target);
    let cmask = control.map_or(0, |c| qubit_mask(n, c));
    for i in 0..amps.len() {
        if i & tmask != 0 || i & cmask != cmask {
            continue;
        }
        let j = i | tmask;
        let (a, b) = (amps[i], amps[j]);
        amps[i] = m[0][0] * a + m[0][1] * b;
        amps[j] = m[1][0] * a + m[1][1] * b;
    }
}

/// A normalized state vector over `n` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    n: usize,
    amps: Vec<Complex64>,
}

impl PureState {
    /// Builds a state from amplitudes, rejecting wrong lengths and
    /// vectors whose norm is not 1 within [`NORM_TOLERANCE`].
    pub fn new(n: usize, amps: Vec<Complex64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidState("qubit count must be at least 1".into()));
        }
        if amps.len() != 1 << n {
            return Err(Error::DimensionMismatch {
                expected: 1 << n,
                found: amps.len(),
            });
        }
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidState(format!("amplitude norm {norm} != 1")));
        }
        Ok(Self { n, amps })
    }

    /// Rescales arbitrary nonzero amplitudes to unit norm.
    pub fn normalized(n: usize, mut amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != 1 << n {
            return Err(Error::DimensionMismatch {
                expected: 1 << n,
                found: amps.len(),
            });
        }
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroVector);
        }
        amps.iter_mut().for_each(|a| *a /= norm);
        Self::new(n, amps)
    }

    /// Computational basis state `|index>`.
    pub fn basis(n: usize, index: usize) -> Result<Self> {
        let dim = 1usize << n;
        if index >= dim {
            return Err(Error::IndexOutOfRange { index, n: dim });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[index] = Complex64::new(1.0, 0.0);
        Self::new(n, amps)
    }

    pub fn zero(n: usize) -> Self {
        Self::basis(n, 0).expect("|0...0> is always valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn inner(&self, other: &PureState) -> Result<Complex64> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn apply_gate(&mut self, gate: &GateOp) -> Result<()> {
        gate.validate(self.n)?;
        let m = gate.target_matrix()?;
        apply_kernel(&mut self.amps, self.n, gate.target, gate.control, &m);
        Ok(())
    }

    pub fn apply_circuit(&mut self, circuit: &Circuit) -> Result<()> {
        if circuit.n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: circuit.n(),
            });
        }
        for g in circuit.gates() {
            let m = g.target_matrix()?;
            apply_kernel(&mut self.amps, self.n, g.target, g.control, &m);
        }
        Ok(())
    }

    /// Outcome probabilities `(p0, p1)` of a computational-basis measurement
    /// of `qubit`.
    pub fn measure_probs(&self, qubit: usize) -> Result<(f64, f64)> {
        if qubit >= self.n {
            return Err(Error::IndexOutOfRange {
                index: qubit,
                n: self.n,
            });
        }
        let mask = qubit_mask(self.n, qubit);
        let (mut p0, mut p1) = (0.0, 0.0);
        for (i, a) in self.amps.iter().enumerate() {
            if i & mask == 0 {
                p0 += a.norm_sqr();
            } else {
                p1 += a.norm_sqr();
            }
        }
        let total = p0 + p1;
        Ok((p0 / total, p1 / total))
    }
}

/// Returns `U|ψ>` for a single gate.
pub fn apply_gate(state: &PureState, gate: &GateOp) -> Result<PureState> {
    let mut out = state.clone();
    out.apply_gate(gate)?;
    Ok(out)
}
