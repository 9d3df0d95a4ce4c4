//! Generalized Bloch vectors over the scaled tensor-Pauli basis.
//!
//! Every `n`-qubit density operator is written as
//! `ρ = (I + Σ_j v_j σ_j) / 2^n` where `σ_j = √(2^n - 1) P_j` runs over the
//! `4^n - 1` non-identity Pauli strings. With that scaling pure states lie on
//! the unit sphere, `tr(σ_i σ_j) = (4^n - 2^n) δ_ij`, and
//! `v_j = tr(ρ σ_j) / (2^n - 1)`.

use std::fmt;
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quantum::DensityOperator;

/// Largest register for which the basis is materialized.
pub const MAX_BASIS_QUBITS: usize = 4;

/// Imaginary parts of `tr(ρ σ_j)` above this are treated as corrupted input.
pub const IMAGINARY_TOLERANCE: f64 = 1e-9;

/// `bloch_to_density` rejects eigenvalues below this.
pub const PHYSICAL_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    fn matrix(self) -> [[Complex64; 2]; 2] {
        let o = Complex64::new(0.0, 0.0);
        let l = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        match self {
            Pauli::I => [[l, o], [o, l]],
            Pauli::X => [[o, l], [l, o]],
            Pauli::Y => [[o, -i], [i, o]],
            Pauli::Z => [[l, o], [o, -l]],
        }
    }

    fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// A tensor product of single-qubit Paulis; factor 0 acts on qubit 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliString(Vec<Pauli>);

impl PauliString {
    pub fn factors(&self) -> &[Pauli] {
        &self.0
    }

    /// Dense `2^n x 2^n` matrix of the (unscaled) string.
    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        let mut acc = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        for p in &self.0 {
            let m = p.matrix();
            let factor = DMatrix::from_fn(2, 2, |r, c| m[r][c]);
            acc = acc.kronecker(&factor);
        }
        acc
    }

    /// `tr(ρ P)` without building `P`: `P|j> = c_j |j ⊕ x>` where `x` marks
    /// the X/Y factors and `c_j = i^{#Y} (-1)^{|j ∧ (y ∨ z)|}`.
    fn expectation(&self, rho: &DMatrix<Complex64>) -> Complex64 {
        let n = self.0.len();
        let (mut xmask, mut signmask, mut ny) = (0usize, 0usize, 0u32);
        for (q, p) in self.0.iter().enumerate() {
            let bit = 1 << (n - 1 - q);
            match p {
                Pauli::I => {}
                Pauli::X => xmask |= bit,
                Pauli::Y => {
                    xmask |= bit;
                    signmask |= bit;
                    ny += 1;
                }
                Pauli::Z => signmask |= bit,
            }
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..rho.nrows() {
            let term = rho[(j, j ^ xmask)];
            if (j & signmask).count_ones() % 2 == 0 {
                acc += term;
            } else {
                acc -= term;
            }
        }
        acc * Complex64::i().powu(ny)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|p| write!(f, "{}", p.symbol()))
    }
}

/// The `4^n - 1` scaled Pauli matrices, ordered lexicographically with
/// `I < X < Y < Z` (for `n = 1`: X, Y, Z).
#[derive(Debug, Clone)]
pub struct PauliBasis {
    n: usize,
    scale: f64,
    strings: Vec<PauliString>,
    elements: Vec<DMatrix<Complex64>>,
}

static SHARED: [OnceLock<Arc<PauliBasis>>; MAX_BASIS_QUBITS] =
    [const { OnceLock::new() }; MAX_BASIS_QUBITS];

impl PauliBasis {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_BASIS_QUBITS {
            return Err(Error::UnsupportedQubitCount {
                n,
                reason: "Pauli basis is materialized for 1..=4 qubits",
            });
        }
        let scale = (((1usize << n) - 1) as f64).sqrt();
        let strings: Vec<PauliString> = (1..(1usize << (2 * n)))
            .map(|k| {
                PauliString(
                    (0..n)
                        .map(|q| Pauli::ALL[(k >> (2 * (n - 1 - q))) & 3])
                        .collect(),
                )
            })
            .collect();
        let elements = strings.iter().map(|s| s.to_matrix().scale(scale)).collect();
        Ok(Self {
            n,
            scale,
            strings,
            elements,
        })
    }

    /// Process-wide cached basis for `n` qubits.
    pub fn shared(n: usize) -> Result<Arc<Self>> {
        if n == 0 || n > MAX_BASIS_QUBITS {
            return Self::new(n).map(Arc::new);
        }
        let cell = &SHARED[n - 1];
        if let Some(b) = cell.get() {
            return Ok(Arc::clone(b));
        }
        let basis = Arc::new(Self::new(n)?);
        Ok(Arc::clone(cell.get_or_init(|| basis)))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// `√(2^n - 1)`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn elements(&self) -> &[DMatrix<Complex64>] {
        &self.elements
    }

    pub fn strings(&self) -> &[PauliString] {
        &self.strings
    }

    /// Position of a label such as `"IZ"` in the basis ordering.
    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.strings.iter().position(|s| s.to_string() == label)
    }

    /// Index of `Z` on `qubit` with identity elsewhere.
    pub fn z_index(n: usize, qubit: usize) -> usize {
        // Base-4 digit 3 in the position of `qubit`, minus the skipped identity.
        (3usize << (2 * (n - 1 - qubit))) - 1
    }
}

/// Real coordinates of a state in the scaled Pauli basis.
#[derive(Debug, Clone, PartialEq)]
pub struct BlochVector {
    n: usize,
    v: Vec<f64>,
}

impl BlochVector {
    pub fn new(n: usize, v: Vec<f64>) -> Result<Self> {
        let expected = (1usize << (2 * n)) - 1;
        if v.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: v.len(),
            });
        }
        Ok(Self { n, v })
    }

    pub fn zero(n: usize) -> Self {
        Self {
            n,
            v: vec![0.0; (1usize << (2 * n)) - 1],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coords(&self) -> &[f64] {
        &self.v
    }

    pub fn norm(&self) -> f64 {
        self.v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.v.iter().zip(&other.v).map(|(a, b)| a * b).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n: self.n,
            v: self.v.iter().map(|x| x * factor).collect(),
        }
    }

    /// `p·self + (1-p)·other`.
    pub fn mix(&self, p: f64, other: &Self) -> Self {
        Self {
            n: self.n,
            v: self
                .v
                .iter()
                .zip(&other.v)
                .map(|(a, b)| p * a + (1.0 - p) * b)
                .collect(),
        }
    }
}

fn check_basis(n: usize, basis: &PauliBasis) -> Result<()> {
    if basis.n != n {
        return Err(Error::DimensionMismatch {
            expected: basis.n,
            found: n,
        });
    }
    Ok(())
}

pub fn density_to_bloch(rho: &DensityOperator, basis: &PauliBasis) -> Result<BlochVector> {
    check_basis(rho.n(), basis)?;
    let denom = (1usize << basis.n) as f64 - 1.0;
    let mut v = Vec::with_capacity(basis.len());
    for (index, s) in basis.strings.iter().enumerate() {
        let t = s.expectation(rho.matrix()) * basis.scale;
        if t.im.abs() > IMAGINARY_TOLERANCE {
            return Err(Error::ImaginaryResidue {
                index,
                residue: t.im,
            });
        }
        v.push(t.re / denom);
    }
    Ok(BlochVector { n: basis.n, v })
}

/// Rebuilds `(I + v·σ) / 2^n`. For `n ≥ 2` a vector inside the unit ball
/// need not be physical, so the spectrum is checked.
pub fn bloch_to_density(v: &BlochVector, basis: &PauliBasis) -> Result<DensityOperator> {
    check_basis(v.n, basis)?;
    let d = 1usize << basis.n;
    let mut m = DMatrix::<Complex64>::identity(d, d);
    for (coef, sigma) in v.v.iter().zip(&basis.elements) {
        if *coef != 0.0 {
            m += sigma.scale(*coef);
        }
    }
    m.scale_mut(1.0 / d as f64);
    let min = SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min < -PHYSICAL_TOLERANCE {
        return Err(Error::NonPhysicalBloch {
            min_eigenvalue: min,
        });
    }
    DensityOperator::from_matrix_unchecked(m)
}

/// `tr(ρ²) = (1 + (2^n - 1)|v|²) / 2^n`.
pub fn purity_from_bloch(v: &BlochVector) -> f64 {
    let d = (1usize << v.n) as f64;
    (1.0 + (d - 1.0) * v.dot(v)) / d
}

/// `(1 + (2^n - 1) v₁·v₂) / 2^n`; exact when at least one side is pure.
pub fn pure_fidelity_bloch(v1: &BlochVector, v2: &BlochVector) -> f64 {
    let d = (1usize << v1.n) as f64;
    (1.0 + (d - 1.0) * v1.dot(v2)) / d
}

/// Cosine threshold of the δ-neighbourhood of a pure state:
/// `Dis(ρ, σ) ≤ δ  ⟺  v_ρ·v_σ ≥ (2^n (1 - δ) - 1) / (2^n - 1)`.
pub fn neighborhood_threshold(delta: f64, n: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::OutOfRange {
            value: delta,
            range: "[0, 1]",
        });
    }
    let d = (1u64 << n) as f64;
    Ok((d * (1.0 - delta) - 1.0) / (d - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::PureState;

    fn trace_of_product(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Complex64 {
        (a * b).trace()
    }

    #[test]
    fn ordering_matches_lexicographic_listing() {
        let b = PauliBasis::new(1).unwrap();
        let labels: Vec<_> = b.strings().iter().map(|s| s.to_string()).collect();
        assert_eq!(labels, ["X", "Y", "Z"]);
        let b = PauliBasis::new(2).unwrap();
        let labels: Vec<_> = b.strings().iter().map(|s| s.to_string()).collect();
        assert_eq!(
            labels,
            [
                "IX", "IY", "IZ", "XI", "XX", "XY", "XZ", "YI", "YX", "YY", "YZ", "ZI", "ZX", "ZY",
                "ZZ"
            ]
        );
        for n in 1..=4 {
            let b = PauliBasis::shared(n).unwrap();
            for q in 0..n {
                let mut label = vec!['I'; n];
                label[q] = 'Z';
                let label: String = label.into_iter().collect();
                assert_eq!(b.index_of(&label), Some(PauliBasis::z_index(n, q)));
            }
        }
    }

    #[test]
    fn basis_size_limits() {
        assert!(PauliBasis::new(0).is_err());
        assert!(PauliBasis::new(5).is_err());
        assert_eq!(PauliBasis::new(3).unwrap().len(), 63);
    }

    #[test]
    fn sparse_expectation_matches_dense_trace() {
        let b = PauliBasis::new(2).unwrap();
        let mut psi = PureState::zero(2);
        psi.apply_gate(&crate::quantum::GateOp::h(0)).unwrap();
        psi.apply_gate(&crate::quantum::GateOp::ry(1, 0.7)).unwrap();
        psi.apply_gate(&crate::quantum::GateOp::crz(0, 1, 1.1))
            .unwrap();
        let rho = DensityOperator::from_pure(&psi);
        for (s, m) in b.strings().iter().zip(b.elements()) {
            let sparse = s.expectation(rho.matrix()) * b.scale();
            let dense = trace_of_product(rho.matrix(), m);
            assert!((sparse - dense).norm() < 1e-12, "{s}");
        }
    }

    #[test]
    fn single_qubit_examples() {
        let b = PauliBasis::new(1).unwrap();
        let zero = DensityOperator::from_pure(&PureState::zero(1));
        let v = density_to_bloch(&zero, &b).unwrap();
        assert_eq!(v.coords(), &[0.0, 0.0, 1.0]);
        let back =
            bloch_to_density(&BlochVector::new(1, vec![0.0, 0.0, 1.0]).unwrap(), &b).unwrap();
        assert_eq!(back, zero);
    }

    #[test]
    fn maximally_mixed_is_origin() {
        for n in 1..=3 {
            let b = PauliBasis::new(n).unwrap();
            let v = density_to_bloch(&DensityOperator::maximally_mixed(n), &b).unwrap();
            assert!(v.norm() < 1e-15);
            let back = bloch_to_density(&BlochVector::zero(n), &b).unwrap();
            assert_eq!(back, DensityOperator::maximally_mixed(n));
            assert!(
                (purity_from_bloch(&BlochVector::zero(n)) - 1.0 / (1 << n) as f64).abs() < 1e-15
            );
        }
    }

    #[test]
    fn bell_state_entries_by_direct_trace() {
        let b = PauliBasis::new(2).unwrap();
        let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let z = Complex64::new(0.0, 0.0);
        let bell = DensityOperator::from_pure(&PureState::new(2, vec![s, z, z, s]).unwrap());
        let v = density_to_bloch(&bell, &b).unwrap();
        assert!((v.norm() - 1.0).abs() < 1e-12);
        for (j, pauli) in b.strings().iter().enumerate() {
            // Brute-force trace over the dense unscaled string.
            let p = pauli.to_matrix();
            let mut tr = Complex64::new(0.0, 0.0);
            for r in 0..4 {
                for c in 0..4 {
                    tr += bell.matrix()[(r, c)] * p[(c, r)];
                }
            }
            assert!(
                (v.coords()[j] - tr.re / 3f64.sqrt()).abs() < 1e-12,
                "{pauli}"
            );
        }
        // XX, ZZ carry +1/√3, YY carries -1/√3.
        let third = 1.0 / 3f64.sqrt();
        assert!((v.coords()[b.index_of("XX").unwrap()] - third).abs() < 1e-12);
        assert!((v.coords()[b.index_of("YY").unwrap()] + third).abs() < 1e-12);
        assert!((v.coords()[b.index_of("ZZ").unwrap()] - third).abs() < 1e-12);
    }

    #[test]
    fn imaginary_residue_is_rejected() {
        let b = PauliBasis::new(1).unwrap();
        let c = |re, im| Complex64::new(re, im);
        // Anti-Hermitian off-diagonal gives tr(ρY) an imaginary part.
        let m =
            DMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.1, 0.0), c(-0.1, 0.0), c(0.5, 0.0)]);
        let bad = DensityOperator::from_matrix_unchecked(m).unwrap();
        assert!(matches!(
            density_to_bloch(&bad, &b),
            Err(Error::ImaginaryResidue { index: 1, .. })
        ));
    }

    #[test]
    fn non_physical_vector_is_rejected() {
        // XX and ZI anticommute, so (XX + ZI)/√2 has eigenvalues ±1 and the
        // resulting matrix has eigenvalue (1 - √3)/4 < 0.
        let b = PauliBasis::new(2).unwrap();
        let mut v = vec![0.0; 15];
        v[b.index_of("XX").unwrap()] = 1.0 / 2f64.sqrt();
        v[b.index_of("ZI").unwrap()] = 1.0 / 2f64.sqrt();
        let v = BlochVector::new(2, v).unwrap();
        assert!(matches!(
            bloch_to_density(&v, &b),
            Err(Error::NonPhysicalBloch { .. })
        ));
    }

    #[test]
    fn purity_and_fidelity_formulas() {
        let b = PauliBasis::new(1).unwrap();
        let up = BlochVector::new(1, vec![0.0, 0.0, 1.0]).unwrap();
        let down = BlochVector::new(1, vec![0.0, 0.0, -1.0]).unwrap();
        assert!((purity_from_bloch(&up) - 1.0).abs() < 1e-15);
        assert!((pure_fidelity_bloch(&up, &up) - 1.0).abs() < 1e-15);
        assert!(pure_fidelity_bloch(&up, &down).abs() < 1e-15);
        assert_eq!(b.n(), 1);
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(neighborhood_threshold(0.0, 1).unwrap(), 1.0);
        assert_eq!(neighborhood_threshold(1.0, 1).unwrap(), -1.0);
        let c = neighborhood_threshold(0.000123487, 8).unwrap();
        assert!((c - 0.999876).abs() < 1e-5);
        assert!(neighborhood_threshold(1.5, 2).is_err());
        assert!(neighborhood_threshold(-0.1, 2).is_err());
    }

    #[test]
    fn basis_dimension_mismatch() {
        let b = PauliBasis::new(2).unwrap();
        let rho = DensityOperator::maximally_mixed(1);
        assert!(matches!(
            density_to_bloch(&rho, &b),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(bloch_to_density(&BlochVector::zero(1), &b).is_err());
    }
}
