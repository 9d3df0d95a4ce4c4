//! Seeded generators for random states, circuits and parameters.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::classifier::EncodedSample;
use crate::error::Result;
use crate::quantum::{Circuit, DensityOperator, GateOp, PureState};

fn gaussian_complex(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Haar-random pure state.
pub fn pure_state(n: usize, rng: &mut impl Rng) -> PureState {
    let amps = (0..1usize << n).map(|_| gaussian_complex(rng)).collect();
    PureState::normalized(n, amps).expect("Gaussian vector is nonzero")
}

/// Random pure state with real nonnegative amplitudes, as produced by
/// amplitude encoding of pixel data.
pub fn real_state(n: usize, rng: &mut impl Rng) -> PureState {
    let amps = (0..1usize << n)
        .map(|_| Complex64::new(rng.random::<f64>(), 0.0))
        .collect();
    PureState::normalized(n, amps).expect("nonzero with probability one")
}

/// Random density operator of the given rank (`rank >= 1`) from a
/// Ginibre matrix, `ρ = G G† / tr(G G†)`.
pub fn density(n: usize, rank: usize, rng: &mut impl Rng) -> DensityOperator {
    let d = 1usize << n;
    let g = DMatrix::from_fn(d, rank.max(1), |_, _| gaussian_complex(rng));
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    DensityOperator::new(m / Complex64::new(tr, 0.0)).expect("Ginibre state is valid")
}

pub fn angle(rng: &mut impl Rng) -> f64 {
    rng.random_range(-PI..PI)
}

pub fn theta(num_params: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..num_params).map(|_| angle(rng)).collect()
}

/// Random gate drawn from the full gate set.
pub fn gate(n: usize, rng: &mut impl Rng) -> GateOp {
    let t = rng.random_range(0..n);
    let pick = if n == 1 {
        rng.random_range(0..7)
    } else {
        rng.random_range(0..10)
    };
    let mut c = rng.random_range(0..n.max(2) - 1);
    if c >= t {
        c += 1;
    }
    match pick {
        0 => GateOp::h(t),
        1 => GateOp::x(t),
        2 => GateOp::y(t),
        3 => GateOp::z(t),
        4 => GateOp::rx(t, angle(rng)),
        5 => GateOp::ry(t, angle(rng)),
        6 => GateOp::rz(t, angle(rng)),
        7 => GateOp::cnot(c, t),
        8 => GateOp::crx(c, t, angle(rng)),
        _ => GateOp::crz(c, t, angle(rng)),
    }
}

pub fn circuit(n: usize, depth: usize, rng: &mut impl Rng) -> Circuit {
    Circuit::from_gates(n, (0..depth).map(|_| gate(n, rng)).collect()).expect("valid gates")
}

/// Random nonnegative unit feature vector with the given label.
pub fn sample(n: usize, label: u8, rng: &mut impl Rng) -> Result<EncodedSample> {
    EncodedSample::normalized(
        (0..1usize << n).map(|_| rng.random::<f64>()).collect(),
        label,
    )
}
