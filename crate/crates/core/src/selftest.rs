//! Reduced-size property checks grouped by module, for the `selftest`
//! command.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bloch::{bloch_to_density, density_to_bloch, purity_from_bloch, PauliBasis};
use crate::classifier::{build_qcnn, classify, Ansatz, ClassificationPolicy, Label};
use crate::data::{downscale_16, parse_idx, to_sample, write_idx, RawImage, OUT_SIDE};
use crate::error::{Error, Result};
use crate::quantum::{fidelity, fidelity_pure, DensityOperator};
use crate::random;
use crate::reference;
use crate::training::{gradient, FINITE_DIFFERENCE_STEP};
use crate::verifier::{adversarial_probe, verify_probabilities, verify_state, VerifierConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Group {
    Quantum,
    Bloch,
    Classifier,
    Verifier,
    Training,
    Data,
}

impl Group {
    pub const ALL: [Group; 6] = [
        Group::Quantum,
        Group::Bloch,
        Group::Classifier,
        Group::Verifier,
        Group::Training,
        Group::Data,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Group::Quantum => "quantum",
            Group::Bloch => "bloch",
            Group::Classifier => "classifier",
            Group::Verifier => "verifier",
            Group::Training => "training",
            Group::Data => "data",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Group::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown selftest group '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub group: Group,
    pub name: &'static str,
    /// Largest observed deviation (or violation count).
    pub error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelftestOptions {
    pub seed: u64,
    pub cases: usize,
    /// Turns every tolerance negative so each check fails; exercises the
    /// failure path end to end.
    pub inject_violation: bool,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        Self {
            seed: 2024,
            cases: 20,
            inject_violation: false,
        }
    }
}

type Check = (&'static str, f64, fn(&mut ChaCha8Rng, usize) -> Result<f64>);

fn max_of(it: impl IntoIterator<Item = Result<f64>>) -> Result<f64> {
    it.into_iter().try_fold(0.0f64, |m, x| Ok(m.max(x?)))
}

fn quantum_checks() -> Vec<Check> {
    vec![
        (
            "fidelity_pure matches eigen fidelity",
            1e-8,
            |rng, cases| {
                max_of((0..cases).map(|i| {
                    let n = 1 + i % 3;
                    let psi = random::pure_state(n, rng);
                    let sigma = random::density(n, 1 + i % (1 << n), rng);
                    let full = fidelity(&DensityOperator::from_pure(&psi), &sigma)?;
                    Ok((fidelity_pure(&psi, &sigma)? - full).abs())
                }))
            },
        ),
        ("unitary purity conservation", 1e-9, |rng, cases| {
            max_of((0..cases).map(|i| {
                let n = 1 + i % 3;
                let rho = random::density(n, 2, rng);
                let out = crate::quantum::apply_circuit(&rho, &random::circuit(n, 10, rng))?;
                Ok((out.purity() - rho.purity()).abs())
            }))
        }),
        ("marginal consistency", 1e-10, |rng, cases| {
            max_of((0..cases).map(|i| {
                let n = 1 + i % 3;
                let rho = random::density(n, 2, rng);
                let q = rng.random_range(0..n);
                let brute = reference::partial_trace_brute(&rho, q);
                Ok((rho.measure_probs(q)?.0 - brute[0][0].re).abs())
            }))
        }),
    ]
}

fn bloch_checks() -> Vec<Check> {
    vec![
        ("bloch round trip", 1e-10, |rng, cases| {
            max_of((0..cases).map(|i| {
                let n = 1 + i % 3;
                let basis = PauliBasis::shared(n)?;
                let rho = random::density(n, 1 + i % 3, rng);
                let back = bloch_to_density(&density_to_bloch(&rho, &basis)?, &basis)?;
                Ok((back.matrix() - rho.matrix())
                    .iter()
                    .map(|z| z.norm())
                    .fold(0.0, f64::max))
            }))
        }),
        ("purity from bloch", 1e-9, |rng, cases| {
            max_of((0..cases).map(|i| {
                let n = 1 + i % 3;
                let rho = random::density(n, 1 + i % 4, rng);
                let v = density_to_bloch(&rho, &*PauliBasis::shared(n)?)?;
                Ok((purity_from_bloch(&v) - rho.purity()).abs())
            }))
        }),
        ("basis orthogonality", 1e-9, |_, _| {
            let mut worst = 0.0f64;
            for n in 1..=2 {
                let basis = PauliBasis::shared(n)?;
                let scale = (4f64.powi(n as i32)) - 2f64.powi(n as i32);
                for (i, a) in basis.elements().iter().enumerate() {
                    for (j, b) in basis.elements().iter().enumerate() {
                        let expected = if i == j { scale } else { 0.0 };
                        worst = worst.max(((a * b).trace() - expected).norm());
                    }
                }
            }
            Ok(worst)
        }),
    ]
}

fn classifier_checks() -> Vec<Check> {
    vec![
        ("deferred measurement", 1e-10, |rng, cases| {
            let arch = build_qcnn(4, 2)?;
            max_of((0..cases.min(8)).map(|_| {
                let theta = random::theta(arch.num_params(), rng);
                let psi = random::pure_state(4, rng);
                let (p0, _) = arch.bind(&theta)?.forward(&psi)?;
                let circuit = arch.circuit(&theta)?;
                let (r0, _) = reference::forward_measured(&circuit, arch.measured_qubit(), &psi);
                Ok((p0 - r0).abs())
            }))
        }),
        ("mixture closure violations", 0.0, |rng, cases| {
            let mut violations = 0.0;
            for i in 0..cases {
                let n = 1 + i % 4;
                let classifier = random_classifier(n, rng)?;
                let policy = ClassificationPolicy::new(0.05)?;
                let a = random::pure_state(n, rng);
                let b = random::pure_state(n, rng);
                let la = classifier.predict(&a, &policy)?;
                if la == Label::Unknown || la != classifier.predict(&b, &policy)? {
                    continue;
                }
                let p: f64 = rng.random();
                let mix = DensityOperator::mixture(
                    p,
                    &DensityOperator::from_pure(&a),
                    &DensityOperator::from_pure(&b),
                )?;
                let (p0, p1) = classifier.forward_density(&mix)?;
                if classify(p0, p1, &policy)? != la {
                    violations += 1.0;
                }
            }
            Ok(violations)
        }),
    ]
}

fn random_classifier(n: usize, rng: &mut ChaCha8Rng) -> Result<crate::classifier::Classifier> {
    crate::classifier::Classifier::new(random::circuit(n, 4 * n, rng), n - 1)
}

fn verifier_checks() -> Vec<Check> {
    vec![
        ("table row delta", 1e-5, |_, _| {
            let config = VerifierConfig::new(0.0, 8)?;
            let v = verify_probabilities(0.625719, 0.374281, &config)?;
            let r = v
                .certified()
                .ok_or(Error::InvalidConfig("row unclassified".into()))?;
            Ok((r.delta - 0.000123487).abs())
        }),
        ("probe finds no counterexample", 0.0, |rng, cases| {
            let mut found = 0.0;
            for i in 0..cases.min(10) {
                let n = if i % 2 == 0 { 2 } else { 4 };
                let classifier = random_classifier(n, rng)?;
                let config = VerifierConfig::new(0.0, n)?;
                let psi = random::pure_state(n, rng);
                if let Some(result) = verify_state(&psi, &classifier, &config)?.certified() {
                    let seed = rng.random();
                    if adversarial_probe(&psi, &classifier, &config, result, 200, seed)?.is_some() {
                        found += 1.0;
                    }
                }
            }
            Ok(found)
        }),
    ]
}

fn training_checks() -> Vec<Check> {
    vec![("shift rule vs finite difference", 1e-5, |rng, cases| {
        let arch = build_qcnn(2, 1)?;
        max_of((0..cases.min(10)).map(|_| {
            let theta = random::theta(arch.num_params(), rng);
            let label = rng.random_range(0..2u8);
            let batch = [random::sample(2, label, rng)?];
            let g = gradient(&arch, &theta, &batch)?;
            let fd = reference::finite_difference_gradient(
                &arch,
                &theta,
                &batch,
                FINITE_DIFFERENCE_STEP,
            )?;
            Ok(g.values
                .iter()
                .zip(&fd)
                .filter(|(a, _)| a.abs() > 1e-8)
                .map(|(a, b)| ((a - b) / a).abs())
                .fold(0.0, f64::max))
        }))
    })]
}

fn random_image(rng: &mut ChaCha8Rng, label: u8) -> RawImage {
    RawImage::new(
        std::array::from_fn(|_| std::array::from_fn(|_| rng.random())),
        label,
    )
    .expect("label in range")
}

fn data_checks() -> Vec<Check> {
    vec![
        ("idx round trip mismatches", 0.0, |rng, cases| {
            let images: Vec<RawImage> = (0..cases)
                .map(|i| random_image(rng, (i % 10) as u8))
                .collect();
            let (a, b) = write_idx(&images);
            let parsed = parse_idx(&a, &b)?;
            let (a2, b2) = write_idx(&parsed);
            Ok(((a != a2) as u8 + (b != b2) as u8) as f64)
        }),
        ("downscale vs exact resampler", 1e-9, |rng, cases| {
            max_of((0..cases.min(5)).map(|_| {
                let img = random_image(rng, 0);
                let exact = reference::downscale_exact(img.pixels());
                let fast = downscale_16(&img);
                let mut worst = 0.0f64;
                for r in 0..OUT_SIDE {
                    for c in 0..OUT_SIDE {
                        let e = exact[r][c] as f64 / reference::EXACT_DENOMINATOR as f64;
                        worst = worst.max((fast[r][c] - e).abs());
                    }
                }
                Ok(worst)
            }))
        }),
        ("sample normalization", 1e-12, |rng, cases| {
            max_of((0..cases).map(|_| {
                let img = random_image(rng, 1);
                let s = to_sample(&downscale_16(&img), 1)?;
                Ok((s.features().iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs())
            }))
        }),
    ]
}

fn checks(group: Group) -> Vec<Check> {
    match group {
        Group::Quantum => quantum_checks(),
        Group::Bloch => bloch_checks(),
        Group::Classifier => classifier_checks(),
        Group::Verifier => verifier_checks(),
        Group::Training => training_checks(),
        Group::Data => data_checks(),
    }
}

/// Runs the checks of `groups`. A check that errors counts as failed with
/// an infinite deviation.
pub fn run(groups: &[Group], options: &SelftestOptions) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    for &group in groups {
        for (k, (name, tolerance, check)) in checks(group).into_iter().enumerate() {
            let seed = options.seed ^ ((group as u64) << 32) ^ k as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let error = check(&mut rng, options.cases.max(1)).unwrap_or(f64::INFINITY);
            let tolerance = if options.inject_violation {
                -1.0
            } else {
                tolerance
            };
            out.push(CheckOutcome {
                group,
                name,
                error,
                tolerance,
                passed: error <= tolerance,
            });
        }
    }
    out
}
