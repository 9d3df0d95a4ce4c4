use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A 2x2 complex matrix in row-major order.
pub type Matrix2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    H,
    X,
    Y,
    Z,
    Cnot,
    Rx,
    Ry,
    Rz,
    Crx,
    Crz,
}

impl GateKind {
    pub fn is_rotation(self) -> bool {
        matches!(
            self,
            GateKind::Rx | GateKind::Ry | GateKind::Rz | GateKind::Crx | GateKind::Crz
        )
    }

    pub fn is_controlled(self) -> bool {
        matches!(self, GateKind::Cnot | GateKind::Crx | GateKind::Crz)
    }
}

/// One gate of a circuit. Controlled kinds act with their single-qubit
/// matrix on `target` when `control` is |1>.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateOp {
    pub kind: GateKind,
    pub angle: Option<f64>,
    pub target: usize,
    pub control: Option<usize>,
}

impl GateOp {
    fn fixed(kind: GateKind, target: usize) -> Self {
        Self {
            kind,
            angle: None,
            target,
            control: None,
        }
    }

    fn rotation(kind: GateKind, target: usize, angle: f64) -> Self {
        Self {
            kind,
            angle: Some(angle),
            target,
            control: None,
        }
    }

    pub fn h(target: usize) -> Self {
        Self::fixed(GateKind::H, target)
    }

    pub fn x(target: usize) -> Self {
        Self::fixed(GateKind::X, target)
    }

    pub fn y(target: usize) -> Self {
        Self::fixed(GateKind::Y, target)
    }

    pub fn z(target: usize) -> Self {
        Self::fixed(GateKind::Z, target)
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Self {
            control: Some(control),
            ..Self::fixed(GateKind::Cnot, target)
        }
    }

    pub fn rx(target: usize, angle: f64) -> Self {
        Self::rotation(GateKind::Rx, target, angle)
    }

    pub fn ry(target: usize, angle: f64) -> Self {
        Self::rotation(GateKind::Ry, target, angle)
    }

    pub fn rz(target: usize, angle: f64) -> Self {
        Self::rotation(GateKind::Rz, target, angle)
    }

    pub fn crx(control: usize, target: usize, angle: f64) -> Self {
        Self {
            control: Some(control),
            ..Self::rotation(GateKind::Crx, target, angle)
        }
    }

    pub fn crz(control: usize, target: usize, angle: f64) -> Self {
        Self {
            control: Some(control),
            ..Self::rotation(GateKind::Crz, target, angle)
        }
    }

    /// Checks the qubit indices and angle presence against an `n`-qubit register.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.target >= n {
            return Err(Error::IndexOutOfRange {
                index: self.target,
                n,
            });
        }
        if self.kind.is_controlled() {
            match self.control {
                None => {
                    return Err(Error::InvalidArchitecture(format!(
                        "{:?} gate without a control qubit",
                        self.kind
                    )))
                }
                Some(c) if c >= n => return Err(Error::IndexOutOfRange { index: c, n }),
                Some(c) if c == self.target => return Err(Error::ControlIsTarget(c)),
                Some(_) => {}
            }
        } else if self.control.is_some() {
            return Err(Error::InvalidArchitecture(format!(
                "{:?} gate does not take a control qubit",
                self.kind
            )));
        }
        if self.kind.is_rotation() && self.angle.is_none() {
            return Err(Error::MissingAngle(self.kind));
        }
        Ok(())
    }

    /// The single-qubit matrix applied to the target (conditionally, for
    /// controlled kinds). Rotations follow `R_P(θ) = exp(-iθP/2)`.
    pub fn target_matrix(&self) -> Result<Matrix2> {
        let angle = || self.angle.ok_or(Error::MissingAngle(self.kind));
        Ok(match self.kind {
            GateKind::H => {
                let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                [[s, s], [s, -s]]
            }
            GateKind::X | GateKind::Cnot => [[ZERO, ONE], [ONE, ZERO]],
            GateKind::Y => [[ZERO, -I], [I, ZERO]],
            GateKind::Z => [[ONE, ZERO], [ZERO, -ONE]],
            GateKind::Rx | GateKind::Crx => {
                let (s, c) = (angle()? / 2.0).sin_cos();
                let c = Complex64::new(c, 0.0);
                let ms = Complex64::new(0.0, -s);
                [[c, ms], [ms, c]]
            }
            GateKind::Ry => {
                let (s, c) = (angle()? / 2.0).sin_cos();
                [
                    [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
                    [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
                ]
            }
            GateKind::Rz | GateKind::Crz => {
                let half = angle()? / 2.0;
                [
                    [Complex64::from_polar(1.0, -half), ZERO],
                    [ZERO, Complex64::from_polar(1.0, half)],
                ]
            }
        })
    }

    /// The gate implementing `U†`.
    pub fn inverse(&self) -> Self {
        let mut inv = *self;
        if let Some(a) = self.angle {
            inv.angle = Some(-a);
        }
        inv
    }
}

/// An ordered gate sequence on a fixed register.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    n: usize,
    gates: Vec<GateOp>,
}

impl Circuit {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            gates: Vec::new(),
        }
    }

    pub fn from_gates(n: usize, gates: Vec<GateOp>) -> Result<Self> {
        for g in &gates {
            g.validate(n)?;
        }
        Ok(Self { n, gates })
    }

    pub fn push(&mut self, gate: GateOp) -> Result<()> {
        gate.validate(self.n)?;
        self.gates.push(gate);
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gates(&self) -> &[GateOp] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn inverse(&self) -> Self {
        Self {
            n: self.n,
            gates: self.gates.iter().rev().map(GateOp::inverse).collect(),
        }
    }
}
