use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::gate::{Circuit, GateOp};
use super::state::{apply_kernel, qubit_mask, PureState};
use crate::error::{Error, Result};

/// Entrywise tolerance for Hermiticity and trace checks.
pub const DENSITY_TOLERANCE: f64 = 1e-9;

/// Eigenvalues in `[-PSD_CLAMP, 0)` are treated as numerical noise.
pub const PSD_CLAMP: f64 = 1e-9;

/// Fidelity refuses inputs with an eigenvalue below this.
pub const FIDELITY_PSD_TOLERANCE: f64 = 1e-6;

/// A density operator over `n` qubits, stored as a dense `2^n x 2^n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    n: usize,
    matrix: DMatrix<Complex64>,
}

fn qubits_for_dim(dim: usize) -> Option<usize> {
    (dim >= 2 && dim.is_power_of_two()).then(|| dim.trailing_zeros() as usize)
}

fn min_eigenvalue(m: &DMatrix<Complex64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

impl DensityOperator {
    /// Validates Hermiticity, unit trace, positivity and purity bound.
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        let rho = Self::from_matrix_unchecked(matrix)?;
        rho.check_invariants()?;
        Ok(rho)
    }

    /// Shape-checked construction without the spectral checks.
    pub(crate) fn from_matrix_unchecked(matrix: DMatrix<Complex64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidState(format!(
                "density matrix must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let n = qubits_for_dim(matrix.nrows()).ok_or_else(|| {
            Error::InvalidState(format!("dimension {} is not 2^n", matrix.nrows()))
        })?;
        Ok(Self { n, matrix })
    }

    fn check_invariants(&self) -> Result<()> {
        let d = self.dim();
        for i in 0..d {
            for j in i..d {
                let defect = (self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm();
                if defect > DENSITY_TOLERANCE {
                    return Err(Error::InvalidState(format!(
                        "not Hermitian at ({i},{j}): defect {defect:e}"
                    )));
                }
            }
        }
        let tr = self.matrix.trace();
        if (tr.re - 1.0).abs() > DENSITY_TOLERANCE || tr.im.abs() > DENSITY_TOLERANCE {
            return Err(Error::InvalidState(format!("trace {tr} != 1")));
        }
        let min = min_eigenvalue(&self.matrix);
        if min < -PSD_CLAMP {
            return Err(Error::NotPositiveSemidefinite {
                min_eigenvalue: min,
            });
        }
        let p = self.purity();
        if p > 1.0 + DENSITY_TOLERANCE {
            return Err(Error::InvalidState(format!("purity {p} > 1")));
        }
        Ok(())
    }

    /// `|ψ><ψ|`.
    pub fn from_pure(psi: &PureState) -> Self {
        let v = psi.amplitudes();
        let d = v.len();
        let matrix = DMatrix::from_fn(d, d, |i, j| v[i] * v[j].conj());
        Self { n: psi.n(), matrix }
    }

    /// `I / 2^n`.
    pub fn maximally_mixed(n: usize) -> Self {
        let d = 1usize << n;
        let matrix = DMatrix::from_diagonal_element(d, d, Complex64::new(1.0 / d as f64, 0.0));
        Self { n, matrix }
    }

    /// `p ρ + (1 - p) σ`.
    pub fn mixture(p: f64, rho: &Self, sigma: &Self) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::OutOfRange {
                value: p,
                range: "[0, 1]",
            });
        }
        rho.check_same_dim(sigma)?;
        let matrix = rho.matrix.scale(p) + sigma.matrix.scale(1.0 - p);
        Ok(Self { n: rho.n, matrix })
    }

    /// Convex combination of an ensemble `{(w_i, ψ_i)}`; weights are
    /// normalized to sum to one.
    pub fn from_ensemble(ensemble: &[(f64, PureState)]) -> Result<Self> {
        let (_, first) = ensemble.first().ok_or(Error::EmptyDataset)?;
        let total: f64 = ensemble.iter().map(|(w, _)| *w).sum();
        if total <= 0.0 || ensemble.iter().any(|(w, _)| *w < 0.0) {
            return Err(Error::InvalidState(
                "ensemble weights must be nonnegative".into(),
            ));
        }
        let d = first.dim();
        let mut matrix = DMatrix::zeros(d, d);
        for (w, psi) in ensemble {
            if psi.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: psi.dim(),
                });
            }
            matrix += Self::from_pure(psi).matrix.scale(w / total);
        }
        Ok(Self {
            n: first.n(),
            matrix,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }

    /// `U ρ U†` for one gate. Columns are swept with `U` twice with an
    /// adjoint in between: `(U (Uρ)†)† = U ρ U†` for Hermitian `ρ`.
    pub fn apply_gate(&mut self, gate: &GateOp) -> Result<()> {
        gate.validate(self.n)?;
        let m = gate.target_matrix()?;
        let n = self.n;
        self.conjugate_with(|col| apply_kernel(col, n, gate.target, gate.control, &m));
        Ok(())
    }

    fn conjugate_with(&mut self, kernel: impl Fn(&mut [Complex64])) {
        let d = self.dim();
        for _ in 0..2 {
            for col in self.matrix.as_mut_slice().chunks_exact_mut(d) {
                kernel(col);
            }
            self.matrix.adjoint_mut();
        }
    }

    /// Computational-basis measurement probabilities of one qubit:
    /// `p_k = tr(M_k ρ M_k†)` with `M_k = |k><k|` on `qubit`.
    pub fn measure_probs(&self, qubit: usize) -> Result<(f64, f64)> {
        if qubit >= self.n {
            return Err(Error::IndexOutOfRange {
                index: qubit,
                n: self.n,
            });
        }
        let mask = qubit_mask(self.n, qubit);
        let (mut p0, mut p1) = (0.0, 0.0);
        for i in 0..self.dim() {
            let diag = self.matrix[(i, i)].re;
            if i & mask == 0 {
                p0 += diag;
            } else {
                p1 += diag;
            }
        }
        Ok((p0.clamp(0.0, 1.0), p1.clamp(0.0, 1.0)))
    }

    /// Reduced single-qubit state of `keep`, tracing out every other qubit.
    pub fn partial_trace(&self, keep: usize) -> Result<DensityOperator> {
        if keep >= self.n {
            return Err(Error::IndexOutOfRange {
                index: keep,
                n: self.n,
            });
        }
        let mask = qubit_mask(self.n, keep);
        let mut out = DMatrix::zeros(2, 2);
        // Pair up basis indices that agree on every traced-out qubit.
        for i in 0..self.dim() {
            if i & mask != 0 {
                continue;
            }
            let j = i | mask;
            out[(0, 0)] += self.matrix[(i, i)];
            out[(0, 1)] += self.matrix[(i, j)];
            out[(1, 0)] += self.matrix[(j, i)];
            out[(1, 1)] += self.matrix[(j, j)];
        }
        Ok(DensityOperator { n: 1, matrix: out })
    }

    /// `tr(ρ²)`.
    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// `U_k ... U_1 ρ U_1† ... U_k†`.
pub fn apply_circuit(rho: &DensityOperator, circuit: &Circuit) -> Result<DensityOperator> {
    if circuit.n() != rho.n {
        return Err(Error::DimensionMismatch {
            expected: rho.n,
            found: circuit.n(),
        });
    }
    let mut out = rho.clone();
    for g in circuit.gates() {
        out.apply_gate(g)?;
    }
    Ok(out)
}

pub fn measure_probs(rho: &DensityOperator, qubit: usize) -> Result<(f64, f64)> {
    rho.measure_probs(qubit)
}

pub fn partial_trace(rho: &DensityOperator, keep: usize) -> Result<DensityOperator> {
    rho.partial_trace(keep)
}

pub fn purity(rho: &DensityOperator) -> f64 {
    rho.purity()
}

/// Eigenvalues below this are treated as outside the support.
const SUPPORT_CUTOFF: f64 = 1e-13;

/// `V_s Λ_s^{1/2}` over the eigenvectors with eigenvalue above
/// [`SUPPORT_CUTOFF`], so that `W W† = √ρ` restricted to the support.
fn support_root(m: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let eig = SymmetricEigen::new(m.clone());
    let min = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min < -FIDELITY_PSD_TOLERANCE {
        return Err(Error::NotPositiveSemidefinite {
            min_eigenvalue: min,
        });
    }
    let keep: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i] > SUPPORT_CUTOFF)
        .collect();
    let mut w = DMatrix::zeros(m.nrows(), keep.len());
    for (col, &i) in keep.iter().enumerate() {
        let root = Complex64::new(eig.eigenvalues[i].sqrt(), 0.0);
        w.set_column(col, &(eig.eigenvectors.column(i) * root));
    }
    Ok(w)
}

/// Uhlmann fidelity `(tr √(√ρ σ √ρ))²`, in `[0, 1]`.
///
/// The nonzero spectrum of `√ρ σ √ρ` equals that of `W† σ W` where
/// `W W† = ρ`. Working on the support of the lower-rank argument keeps
/// round-off eigenvalues near zero out of the square roots.
pub fn fidelity(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    rho.check_same_dim(sigma)?;
    let w_rho = support_root(&rho.matrix)?;
    let w_sigma = support_root(&sigma.matrix)?;
    let (w, other) = if w_rho.ncols() <= w_sigma.ncols() {
        (w_rho, &sigma.matrix)
    } else {
        (w_sigma, &rho.matrix)
    };
    let mut inner = w.adjoint() * other * &w;
    inner = (&inner + inner.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(inner);
    let tr: f64 = eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum();
    Ok((tr * tr).clamp(0.0, 1.0))
}

/// `<ψ|σ|ψ>`, the fidelity when the first argument is pure.
pub fn fidelity_pure(psi: &PureState, sigma: &DensityOperator) -> Result<f64> {
    if psi.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: sigma.dim(),
            found: psi.dim(),
        });
    }
    let v = psi.amplitudes();
    let m = &sigma.matrix;
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..v.len() {
        let mut row = Complex64::new(0.0, 0.0);
        for i in 0..v.len() {
            row += v[i].conj() * m[(i, j)];
        }
        acc += row * v[j];
    }
    Ok(acc.re.clamp(0.0, 1.0))
}

/// `1 - fidelity(ρ, σ)`.
pub fn distance(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    Ok(1.0 - fidelity(rho, sigma)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn plus() -> PureState {
        let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
        PureState::new(1, vec![s, s]).unwrap()
    }

    fn bell() -> DensityOperator {
        let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let z = Complex64::new(0.0, 0.0);
        DensityOperator::from_pure(&PureState::new(2, vec![s, z, z, s]).unwrap())
    }

    fn ket(n: usize, i: usize) -> DensityOperator {
        DensityOperator::from_pure(&PureState::basis(n, i).unwrap())
    }

    fn assert_matrix_close(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>, tol: f64) {
        assert_eq!(a.shape(), b.shape());
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).norm() < tol, "{a} vs {b}");
        }
    }

    #[test]
    fn constructor_rejects_bad_matrices() {
        let c = |re| Complex64::new(re, 0.0);
        let not_psd = DMatrix::from_row_slice(2, 2, &[c(1.5), c(0.0), c(0.0), c(-0.5)]);
        assert!(matches!(
            DensityOperator::new(not_psd),
            Err(Error::NotPositiveSemidefinite { .. })
        ));
        let bad_trace = DMatrix::from_row_slice(2, 2, &[c(0.5), c(0.0), c(0.0), c(0.6)]);
        assert!(DensityOperator::new(bad_trace).is_err());
        let not_herm = DMatrix::from_row_slice(2, 2, &[c(0.5), c(0.2), c(0.0), c(0.5)]);
        assert!(DensityOperator::new(not_herm).is_err());
        assert!(DensityOperator::new(DMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn circuit_examples() {
        let rho = ket(1, 0);
        assert_eq!(apply_circuit(&rho, &Circuit::new(1)).unwrap(), rho);
        let flip = Circuit::from_gates(1, vec![GateOp::x(0)]).unwrap();
        assert_matrix_close(
            apply_circuit(&rho, &flip).unwrap().matrix(),
            ket(1, 1).matrix(),
            1e-15,
        );
        assert!(matches!(
            apply_circuit(&rho, &Circuit::new(2)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn measurement_examples() {
        assert_eq!(ket(1, 0).measure_probs(0).unwrap(), (1.0, 0.0));
        let (p0, p1) = DensityOperator::from_pure(&plus())
            .measure_probs(0)
            .unwrap();
        assert!((p0 - 0.5).abs() < 1e-15 && (p1 - 0.5).abs() < 1e-15);
        let (p0, p1) = bell().measure_probs(1).unwrap();
        assert!((p0 - 0.5).abs() < 1e-15 && (p1 - 0.5).abs() < 1e-15);
        assert!(bell().measure_probs(2).is_err());
    }

    #[test]
    fn partial_trace_examples() {
        let z = Complex64::new(0.0, 0.0);
        let h = Complex64::new(0.5, 0.0);
        // |0> ⊗ |+>
        let product = PureState::new(2, vec![h * 2f64.sqrt(), h * 2f64.sqrt(), z, z]).unwrap();
        let reduced = DensityOperator::from_pure(&product)
            .partial_trace(1)
            .unwrap();
        assert_matrix_close(
            reduced.matrix(),
            DensityOperator::from_pure(&plus()).matrix(),
            1e-15,
        );
        for q in 0..2 {
            let reduced = bell().partial_trace(q).unwrap();
            assert_matrix_close(
                reduced.matrix(),
                DensityOperator::maximally_mixed(1).matrix(),
                1e-15,
            );
        }
        assert!(bell().partial_trace(5).is_err());
    }

    #[test]
    fn fidelity_examples() {
        let plus = DensityOperator::from_pure(&plus());
        assert!((fidelity(&plus, &plus).unwrap() - 1.0).abs() < 1e-9);
        assert!(fidelity(&ket(1, 0), &ket(1, 1)).unwrap().abs() < 1e-9);
        assert!((fidelity(&plus, &ket(1, 0)).unwrap() - 0.5).abs() < 1e-9);
        assert!((distance(&plus, &ket(1, 0)).unwrap() - 0.5).abs() < 1e-9);
        assert!((distance(&ket(1, 0), &ket(1, 1)).unwrap() - 1.0).abs() < 1e-9);
        assert!(distance(&plus, &plus).unwrap().abs() < 1e-9);
        assert!(fidelity(&plus, &bell()).is_err());
    }

    #[test]
    fn fidelity_rejects_non_psd() {
        let c = |re| Complex64::new(re, 0.0);
        let bad = DensityOperator::from_matrix_unchecked(DMatrix::from_row_slice(
            2,
            2,
            &[c(1.5), c(0.0), c(0.0), c(-0.5)],
        ))
        .unwrap();
        assert!(matches!(
            fidelity(&bad, &ket(1, 0)),
            Err(Error::NotPositiveSemidefinite { .. })
        ));
        assert!(matches!(
            fidelity(&ket(1, 0), &bad),
            Err(Error::NotPositiveSemidefinite { .. })
        ));
    }

    #[test]
    fn pure_fidelity_examples() {
        let zero = PureState::zero(1);
        assert!((fidelity_pure(&zero, &ket(1, 0)).unwrap() - 1.0).abs() < 1e-15);
        let mixed = DensityOperator::maximally_mixed(1);
        assert!((fidelity_pure(&zero, &mixed).unwrap() - 0.5).abs() < 1e-15);
        assert!(fidelity_pure(&zero, &bell()).is_err());
    }

    #[test]
    fn purity_examples() {
        assert!((ket(2, 3).purity() - 1.0).abs() < 1e-10);
        assert!((DensityOperator::maximally_mixed(3).purity() - 0.125).abs() < 1e-15);
        let half = DensityOperator::mixture(0.5, &ket(1, 0), &ket(1, 1)).unwrap();
        assert!((half.purity() - 0.5).abs() < 1e-15);
    }
}
