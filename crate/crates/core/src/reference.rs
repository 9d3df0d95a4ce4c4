//! Slow, independent implementations used as test oracles: full-matrix
//! gate embedding by Kronecker products, explicit mid-circuit measurement,
//! brute-force partial trace, finite-difference gradients and an exact
//! rational resampler.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::classifier::{Ansatz, EncodedSample};
use crate::data::{OUT_SIDE, SIDE};
use crate::error::Result;
use crate::quantum::{Circuit, DensityOperator, GateKind, GateOp, PureState};
use crate::training::mean_loss;

type CMatrix = DMatrix<Complex64>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn pauli(kind: GateKind) -> CMatrix {
    match kind {
        GateKind::X | GateKind::Rx | GateKind::Crx | GateKind::Cnot => {
            CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
        }
        GateKind::Y | GateKind::Ry => {
            CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
        }
        GateKind::Z | GateKind::Rz | GateKind::Crz => {
            CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
        }
        GateKind::H => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            CMatrix::from_row_slice(2, 2, &[c(s, 0.), c(s, 0.), c(s, 0.), c(-s, 0.)])
        }
    }
}

/// `cos(θ/2) I - i sin(θ/2) P` for rotations, the fixed matrix otherwise.
pub fn single_qubit_matrix(gate: &GateOp) -> CMatrix {
    let p = pauli(gate.kind);
    match gate.angle {
        Some(theta) if gate.kind.is_rotation() => {
            let (s, co) = (theta / 2.0).sin_cos();
            CMatrix::identity(2, 2) * c(co, 0.0) - p * c(0.0, s)
        }
        _ => p,
    }
}

fn kron_chain(factors: &[CMatrix]) -> CMatrix {
    factors
        .iter()
        .fold(CMatrix::identity(1, 1), |acc, f| acc.kronecker(f))
}

/// `|b><b|` on one qubit.
fn projector(bit: usize) -> CMatrix {
    let mut m = CMatrix::zeros(2, 2);
    m[(bit, bit)] = c(1.0, 0.0);
    m
}

/// The full `2ⁿ × 2ⁿ` matrix of `u` acting on qubit `target`, identity
/// elsewhere; qubit 0 is the leftmost factor.
pub fn embed(n: usize, target: usize, u: &CMatrix) -> CMatrix {
    kron_chain(
        &(0..n)
            .map(|q| {
                if q == target {
                    u.clone()
                } else {
                    CMatrix::identity(2, 2)
                }
            })
            .collect::<Vec<_>>(),
    )
}

/// `P_b` on qubit `q` as a full matrix.
pub fn embed_projector(n: usize, q: usize, bit: usize) -> CMatrix {
    embed(n, q, &projector(bit))
}

pub fn gate_unitary(n: usize, gate: &GateOp) -> CMatrix {
    let u = single_qubit_matrix(gate);
    match gate.control {
        None => embed(n, gate.target, &u),
        Some(ctl) => {
            let p0 = embed_projector(n, ctl, 0);
            let p1 = embed_projector(n, ctl, 1);
            p0 + p1 * embed(n, gate.target, &u)
        }
    }
}

pub fn circuit_unitary(circuit: &Circuit) -> CMatrix {
    let n = circuit.n();
    circuit
        .gates()
        .iter()
        .fold(CMatrix::identity(1 << n, 1 << n), |acc, g| {
            gate_unitary(n, g) * acc
        })
}

pub fn apply_unitary(psi: &PureState, u: &CMatrix) -> Vec<Complex64> {
    let v = nalgebra::DVector::from_column_slice(psi.amplitudes());
    (u * v).iter().copied().collect()
}

/// `p0` of qubit `q` as `tr(P_0 ρ)`.
pub fn p0_of_density(rho: &CMatrix, n: usize, q: usize) -> f64 {
    (embed_projector(n, q, 0) * rho).trace().re
}

/// Forward pass as a density-matrix pipeline where every controlled
/// rotation becomes a projective measurement of its control followed by
/// the target rotation on the outcome-1 branch.
pub fn forward_measured(circuit: &Circuit, measured: usize, input: &PureState) -> (f64, f64) {
    let n = circuit.n();
    let v = nalgebra::DVector::from_column_slice(input.amplitudes());
    let mut rho = &v * v.adjoint();
    for g in circuit.gates() {
        match (g.kind, g.control) {
            (GateKind::Crx | GateKind::Crz, Some(ctl)) => {
                let p0 = embed_projector(n, ctl, 0);
                let p1 = embed_projector(n, ctl, 1);
                let u = embed(n, g.target, &single_qubit_matrix(g));
                let branch0 = &p0 * &rho * &p0;
                let branch1 = &p1 * &rho * &p1;
                rho = branch0 + &u * branch1 * u.adjoint();
            }
            _ => {
                let u = gate_unitary(n, g);
                rho = &u * rho * u.adjoint();
            }
        }
    }
    let p0 = p0_of_density(&rho, n, measured);
    let p1 = (embed_projector(n, measured, 1) * &rho).trace().re;
    (p0, p1)
}

/// Single-qubit reduced state by summing matrix entries directly.
pub fn partial_trace_brute(rho: &DensityOperator, keep: usize) -> [[Complex64; 2]; 2] {
    let n = rho.n();
    let m = rho.matrix();
    let bit = |i: usize| (i >> (n - 1 - keep)) & 1;
    let mut out = [[c(0.0, 0.0); 2]; 2];
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let rest_i = i & !(1 << (n - 1 - keep));
            let rest_j = j & !(1 << (n - 1 - keep));
            if rest_i == rest_j {
                out[bit(i)][bit(j)] += m[(i, j)];
            }
        }
    }
    out
}

/// Central finite-difference gradient of the mean loss.
pub fn finite_difference_gradient<A: Ansatz + Sync>(
    ansatz: &A,
    theta: &[f64],
    batch: &[EncodedSample],
    h: f64,
) -> Result<Vec<f64>> {
    (0..theta.len())
        .map(|i| {
            let mut up = theta.to_vec();
            let mut down = theta.to_vec();
            up[i] += h;
            down[i] -= h;
            Ok((mean_loss(ansatz, &up, batch)? - mean_loss(ansatz, &down, batch)?) / (2.0 * h))
        })
        .collect()
}

/// Area resampling in exact integer arithmetic. On a grid refined by 16
/// (input) and 28 (output), input pixel `i` spans `[16i, 16i+16)` and output
/// cell `k` spans `[28k, 28k+28)`. Returns numerators over `28² = 784`.
pub fn downscale_exact(pixels: &[[u8; SIDE]; SIDE]) -> [[u64; OUT_SIDE]; OUT_SIDE] {
    let overlap = |k: usize, i: usize| -> u64 {
        let (lo, hi) = (28 * k, 28 * k + 28);
        let (a, b) = (16 * i, 16 * i + 16);
        hi.min(b).saturating_sub(lo.max(a)) as u64
    };
    let mut out = [[0u64; OUT_SIDE]; OUT_SIDE];
    for (r, row) in out.iter_mut().enumerate() {
        for (cc, x) in row.iter_mut().enumerate() {
            for (i, src) in pixels.iter().enumerate() {
                for (j, &p) in src.iter().enumerate() {
                    *x += overlap(r, i) * overlap(cc, j) * p as u64;
                }
            }
        }
    }
    out
}

/// Denominator of [`downscale_exact`] numerators.
pub const EXACT_DENOMINATOR: u64 = 28 * 28;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::PureState;
    use rand::SeedableRng;

    #[test]
    fn embedding_agrees_with_simulator() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let circ = crate::random::circuit(3, 12, &mut rng);
            let psi = crate::random::pure_state(3, &mut rng);
            let expected = apply_unitary(&psi, &circuit_unitary(&circ));
            let mut s = psi.clone();
            s.apply_circuit(&circ).unwrap();
            for (a, b) in s.amplitudes().iter().zip(&expected) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn measured_pipeline_on_bell_control() {
        // Control in |+>: the CRX branch flips the target only on outcome 1.
        let circ = Circuit::from_gates(
            2,
            vec![GateOp::h(0), GateOp::crx(0, 1, std::f64::consts::PI)],
        )
        .unwrap();
        let (p0, p1) = forward_measured(&circ, 1, &PureState::zero(2));
        assert!((p0 - 0.5).abs() < 1e-12 && (p1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn exact_impulse() {
        let mut px = [[0u8; SIDE]; SIDE];
        px[0][0] = 255;
        let out = downscale_exact(&px);
        assert_eq!(out[0][0], 16 * 16 * 255);
        assert_eq!(out[0][1], 0);
    }
}
