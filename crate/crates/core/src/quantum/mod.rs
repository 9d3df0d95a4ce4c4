//! Dense state-vector and density-matrix simulation.
//!
//! Qubit 0 is the most significant bit of a basis index. Rotations are
//! `R_P(θ) = exp(-iθP/2)`.

mod density;
mod gate;
mod state;

pub use density::{
    apply_circuit, distance, fidelity, fidelity_pure, measure_probs, partial_trace, purity,
    DensityOperator, DENSITY_TOLERANCE, FIDELITY_PSD_TOLERANCE, PSD_CLAMP,
};
pub use gate::{Circuit, GateKind, GateOp, Matrix2};
pub use state::{apply_gate, qubit_mask, PureState, NORM_TOLERANCE};
