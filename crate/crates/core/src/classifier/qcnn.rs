use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::policy::{classify, ClassificationPolicy, Label};
use crate::error::{Error, Result};
use crate::quantum::{Circuit, DensityOperator, GateKind, GateOp, PureState};

/// Two-qubit block applied to every adjacent pair of a convolutional layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvBlock {
    /// `RY(a)` on the first qubit, `RY(b)` on the second, then `CNOT(first → second)`.
    #[default]
    RyRyCnot,
}

impl ConvBlock {
    pub fn num_params(self) -> usize {
        match self {
            ConvBlock::RyRyCnot => 2,
        }
    }

    fn emit(self, a: usize, b: usize, offset: usize, out: &mut Vec<ParamGate>) {
        match self {
            ConvBlock::RyRyCnot => {
                out.push(ParamGate::rotation(GateKind::Ry, offset, a, None));
                out.push(ParamGate::rotation(GateKind::Ry, offset + 1, b, None));
                out.push(ParamGate {
                    kind: GateKind::Cnot,
                    param: None,
                    target: b,
                    control: Some(a),
                });
            }
        }
    }
}

/// Parameters of one pooling layer: `CRZ` then `CRX`, shared by every pair.
pub const POOL_PARAMS: usize = 2;

/// A gate whose angle, if any, is read from the parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamGate {
    pub kind: GateKind,
    pub param: Option<usize>,
    pub target: usize,
    pub control: Option<usize>,
}

impl ParamGate {
    pub fn rotation(kind: GateKind, param: usize, target: usize, control: Option<usize>) -> Self {
        Self {
            kind,
            param: Some(param),
            target,
            control,
        }
    }

    pub fn fixed(kind: GateKind, target: usize, control: Option<usize>) -> Self {
        Self {
            kind,
            param: None,
            target,
            control,
        }
    }

    fn bind(&self, angle: Option<f64>) -> GateOp {
        GateOp {
            kind: self.kind,
            angle,
            target: self.target,
            control: self.control,
        }
    }
}

/// One convolution + pooling stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stage {
    /// Qubits still in play when the stage starts.
    pub active: Vec<usize>,
    /// Adjacent pairs receiving the conv block, in application order.
    pub conv_pairs: Vec<(usize, usize)>,
    /// `(discarded control, surviving target)` pairs of the pooling layer.
    pub pool_pairs: Vec<(usize, usize)>,
    pub conv_offset: usize,
    pub pool_offset: usize,
}

/// A QCNN circuit template: translation-invariant conv layers alternating
/// with pooling layers that halve the active register until one qubit is
/// left. Pooling is coherent: the discarded qubit controls `CRZ`/`CRX` on
/// its partner and is never touched again, which by deferred measurement
/// equals measuring it and conditioning the rotations on the outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct QcnnArchitecture {
    n: usize,
    block: ConvBlock,
    stages: Vec<Stage>,
    measured_qubit: usize,
    template: Vec<ParamGate>,
    num_params: usize,
}

fn conv_pairs(active: &[usize]) -> Vec<(usize, usize)> {
    let m = active.len();
    if m == 2 {
        return vec![(active[0], active[1])];
    }
    // Brick pattern over the ring: (0,1),(2,3),... then (1,2),...,(m-1,0).
    let even = (0..m - 1).step_by(2).map(|i| (active[i], active[i + 1]));
    let odd = (1..m).step_by(2).map(|i| (active[i], active[(i + 1) % m]));
    even.chain(odd).collect()
}

pub fn build_qcnn(n: usize, stages: usize) -> Result<QcnnArchitecture> {
    build_qcnn_with_block(n, stages, ConvBlock::default())
}

pub fn build_qcnn_with_block(
    n: usize,
    stages: usize,
    block: ConvBlock,
) -> Result<QcnnArchitecture> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::InvalidArchitecture(format!(
            "qubit count {n} is not a power of two >= 2"
        )));
    }
    let expected = n.trailing_zeros() as usize;
    if stages != expected {
        return Err(Error::InvalidArchitecture(format!(
            "{n} qubits need exactly {expected} stages to reach one qubit, got {stages}"
        )));
    }
    let mut active: Vec<usize> = (0..n).collect();
    let mut template = Vec::new();
    let mut built = Vec::with_capacity(stages);
    let mut offset = 0;
    for _ in 0..stages {
        let conv_offset = offset;
        let pool_offset = conv_offset + block.num_params();
        offset = pool_offset + POOL_PARAMS;

        let conv = conv_pairs(&active);
        for &(a, b) in &conv {
            block.emit(a, b, conv_offset, &mut template);
        }
        let pool: Vec<(usize, usize)> = active.chunks_exact(2).map(|p| (p[0], p[1])).collect();
        for &(c, t) in &pool {
            template.push(ParamGate::rotation(GateKind::Crz, pool_offset, t, Some(c)));
            template.push(ParamGate::rotation(
                GateKind::Crx,
                pool_offset + 1,
                t,
                Some(c),
            ));
        }
        built.push(Stage {
            active: active.clone(),
            conv_pairs: conv,
            pool_pairs: pool,
            conv_offset,
            pool_offset,
        });
        active = active.iter().skip(1).step_by(2).copied().collect();
    }
    debug_assert_eq!(active, vec![n - 1]);
    Ok(QcnnArchitecture {
        n,
        block,
        stages: built,
        measured_qubit: active[0],
        template,
        num_params: offset,
    })
}

impl QcnnArchitecture {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn block(&self) -> ConvBlock {
        self.block
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn measured_qubit(&self) -> usize {
        self.measured_qubit
    }

    pub fn num_params(&self) -> usize {
        self.num_params
    }

    pub fn template(&self) -> &[ParamGate] {
        &self.template
    }
}

/// A parameterized circuit template followed by a measurement of one qubit.
pub trait Ansatz {
    fn n(&self) -> usize;
    fn template(&self) -> &[ParamGate];
    fn num_params(&self) -> usize;
    fn measured_qubit(&self) -> usize;

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.num_params() {
            return Err(Error::ParameterLength {
                expected: self.num_params(),
                found: theta.len(),
            });
        }
        Ok(())
    }

    /// Concrete circuit for `theta`, with `shift` added to the angle of the
    /// template gate at position `shifted` (if any).
    fn circuit_with_shift(&self, theta: &[f64], shifted: Option<(usize, f64)>) -> Result<Circuit> {
        self.check_theta(theta)?;
        let gates = self
            .template()
            .iter()
            .enumerate()
            .map(|(i, g)| {
                let angle = g.param.map(|p| match shifted {
                    Some((j, s)) if j == i => theta[p] + s,
                    _ => theta[p],
                });
                g.bind(angle)
            })
            .collect();
        Circuit::from_gates(self.n(), gates)
    }

    fn circuit(&self, theta: &[f64]) -> Result<Circuit> {
        self.circuit_with_shift(theta, None)
    }

    fn bind(&self, theta: &[f64]) -> Result<Classifier> {
        Classifier::new(self.circuit(theta)?, self.measured_qubit())
    }
}

impl Ansatz for QcnnArchitecture {
    fn n(&self) -> usize {
        self.n
    }

    fn template(&self) -> &[ParamGate] {
        &self.template
    }

    fn num_params(&self) -> usize {
        self.num_params
    }

    fn measured_qubit(&self) -> usize {
        self.measured_qubit
    }
}

/// An arbitrary parameterized template, e.g. for small experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomAnsatz {
    n: usize,
    template: Vec<ParamGate>,
    num_params: usize,
    measured_qubit: usize,
}

impl CustomAnsatz {
    pub fn new(n: usize, template: Vec<ParamGate>, measured_qubit: usize) -> Result<Self> {
        if measured_qubit >= n {
            return Err(Error::IndexOutOfRange {
                index: measured_qubit,
                n,
            });
        }
        for g in &template {
            if g.kind.is_rotation() != g.param.is_some() {
                return Err(Error::InvalidArchitecture(format!(
                    "{:?} gate parameter slot mismatch",
                    g.kind
                )));
            }
            g.bind(g.param.map(|_| 0.0)).validate(n)?;
        }
        let num_params = template
            .iter()
            .filter_map(|g| g.param)
            .max()
            .map_or(0, |m| m + 1);
        Ok(Self {
            n,
            template,
            num_params,
            measured_qubit,
        })
    }
}

impl Ansatz for CustomAnsatz {
    fn n(&self) -> usize {
        self.n
    }

    fn template(&self) -> &[ParamGate] {
        &self.template
    }

    fn num_params(&self) -> usize {
        self.num_params
    }

    fn measured_qubit(&self) -> usize {
        self.measured_qubit
    }
}

/// A concrete circuit followed by a computational-basis measurement of one
/// qubit.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    circuit: Circuit,
    measured_qubit: usize,
}

impl Classifier {
    pub fn new(circuit: Circuit, measured_qubit: usize) -> Result<Self> {
        if measured_qubit >= circuit.n() {
            return Err(Error::IndexOutOfRange {
                index: measured_qubit,
                n: circuit.n(),
            });
        }
        Ok(Self {
            circuit,
            measured_qubit,
        })
    }

    /// The bare measurement on `measured_qubit` with no gates.
    pub fn identity(n: usize, measured_qubit: usize) -> Result<Self> {
        Self::new(Circuit::new(n), measured_qubit)
    }

    pub fn n(&self) -> usize {
        self.circuit.n()
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn measured_qubit(&self) -> usize {
        self.measured_qubit
    }

    pub fn output_state(&self, input: &PureState) -> Result<PureState> {
        let mut out = input.clone();
        out.apply_circuit(&self.circuit)?;
        Ok(out)
    }

    /// Exact `(p0, p1)` of the measured qubit.
    pub fn forward(&self, input: &PureState) -> Result<(f64, f64)> {
        self.output_state(input)?.measure_probs(self.measured_qubit)
    }

    pub fn forward_density(&self, rho: &DensityOperator) -> Result<(f64, f64)> {
        crate::quantum::apply_circuit(rho, &self.circuit)?.measure_probs(self.measured_qubit)
    }

    pub fn predict(&self, input: &PureState, policy: &ClassificationPolicy) -> Result<Label> {
        let (p0, p1) = self.forward(input)?;
        classify(p0, p1, policy)
    }

    /// Frequency estimate of `(p0, p1)` from `shots` simulated measurements.
    pub fn shot_estimate(&self, input: &PureState, shots: usize, seed: u64) -> Result<(f64, f64)> {
        if shots == 0 {
            return Err(Error::InvalidConfig("shots must be at least 1".into()));
        }
        let (p0, _) = self.forward(input)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let zeros = (0..shots).filter(|_| rng.random::<f64>() < p0).count();
        let p0_hat = zeros as f64 / shots as f64;
        Ok((p0_hat, 1.0 - p0_hat))
    }
}

pub fn forward(arch: &impl Ansatz, theta: &[f64], input: &PureState) -> Result<(f64, f64)> {
    arch.bind(theta)?.forward(input)
}

pub fn shot_estimate(
    arch: &impl Ansatz,
    theta: &[f64],
    input: &PureState,
    shots: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    arch.bind(theta)?.shot_estimate(input, shots, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn smallest_instance() {
        let arch = build_qcnn(2, 1).unwrap();
        assert_eq!(arch.measured_qubit(), 1);
        assert_eq!(arch.stages().len(), 1);
        assert_eq!(arch.stages()[0].conv_pairs, vec![(0, 1)]);
        assert_eq!(arch.stages()[0].pool_pairs, vec![(0, 1)]);
        assert_eq!(arch.num_params(), 4);
        assert_eq!(arch.template().len(), 5);
    }

    #[test]
    fn eight_qubit_layout() {
        let arch = build_qcnn(8, 3).unwrap();
        // Two shared conv angles and two shared pooling angles per stage.
        assert_eq!(arch.num_params(), 12);
        let s = arch.stages();
        assert_eq!(s[0].active, (0..8).collect::<Vec<_>>());
        assert_eq!(
            s[0].conv_pairs,
            vec![
                (0, 1),
                (2, 3),
                (4, 5),
                (6, 7),
                (1, 2),
                (3, 4),
                (5, 6),
                (7, 0)
            ]
        );
        assert_eq!(s[0].pool_pairs, vec![(0, 1), (2, 3), (4, 5), (6, 7)]);
        assert_eq!(s[1].active, vec![1, 3, 5, 7]);
        assert_eq!(s[1].conv_pairs, vec![(1, 3), (5, 7), (3, 5), (7, 1)]);
        assert_eq!(s[2].active, vec![3, 7]);
        assert_eq!(s[2].conv_pairs, vec![(3, 7)]);
        assert_eq!(s[2].pool_pairs, vec![(3, 7)]);
        assert_eq!(arch.measured_qubit(), 7);
        // 8 + 4 + 1 conv pairs at 3 gates, 4 + 2 + 1 pool pairs at 2 gates.
        assert_eq!(arch.template().len(), 13 * 3 + 7 * 2);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(build_qcnn(6, 2).is_err());
        assert!(build_qcnn(1, 0).is_err());
        assert!(build_qcnn(8, 2).is_err());
        let arch = build_qcnn(4, 2).unwrap();
        assert!(matches!(
            arch.bind(&[0.0; 3]),
            Err(Error::ParameterLength {
                expected: 8,
                found: 3
            })
        ));
    }

    #[test]
    fn zero_angles_leave_zero_state_alone() {
        let arch = build_qcnn(8, 3).unwrap();
        let (p0, p1) = forward(&arch, &[0.0; 12], &PureState::zero(8)).unwrap();
        assert!((p0 - 1.0).abs() < 1e-15 && p1.abs() < 1e-15);
    }

    #[test]
    fn shot_estimates() {
        let c = Classifier::identity(1, 0).unwrap();
        assert_eq!(
            c.shot_estimate(&PureState::zero(1), 17, 3).unwrap(),
            (1.0, 0.0)
        );
        let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let plus = PureState::new(1, vec![s, s]).unwrap();
        let (p0, p1) = c.shot_estimate(&plus, 100_000, 2024).unwrap();
        assert!((p0 - 0.5).abs() < 0.01);
        assert!((p0 + p1 - 1.0).abs() < 1e-15);
        let (one, _) = c.shot_estimate(&plus, 1, 9).unwrap();
        assert!(one == 0.0 || one == 1.0);
        assert!(c.shot_estimate(&plus, 0, 9).is_err());
    }
}
