use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probabilities must sum to one within this before they are classified.
pub const PROBABILITY_TOLERANCE: f64 = 1e-6;

/// Slack added to `ε` when deciding `|p0 - p1| ≤ ε`. Keeps states built to
/// sit exactly on the decision layer on the Unknown side despite rounding.
pub const BOUNDARY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Zero,
    One,
    Unknown,
}

impl Label {
    pub fn from_class(class: u8) -> Option<Self> {
        match class {
            0 => Some(Label::Zero),
            1 => Some(Label::One),
            _ => None,
        }
    }

    pub fn class(self) -> Option<u8> {
        match self {
            Label::Zero => Some(0),
            Label::One => Some(1),
            Label::Unknown => None,
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            Label::Zero => Label::One,
            Label::One => Label::Zero,
            Label::Unknown => Label::Unknown,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Zero => "0",
            Label::One => "1",
            Label::Unknown => "unknown",
        })
    }
}

/// The ε-threshold decision rule on the measured qubit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationPolicy {
    epsilon: f64,
}

impl ClassificationPolicy {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(Error::OutOfRange {
                value: epsilon,
                range: "[0, 1)",
            });
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl Default for ClassificationPolicy {
    fn default() -> Self {
        Self { epsilon: 0.0 }
    }
}

pub(crate) fn check_probabilities(p0: f64, p1: f64) -> Result<()> {
    let in_unit = |p: f64| (-PROBABILITY_TOLERANCE..=1.0 + PROBABILITY_TOLERANCE).contains(&p);
    if !in_unit(p0) || !in_unit(p1) || (p0 + p1 - 1.0).abs() > PROBABILITY_TOLERANCE {
        return Err(Error::InvalidProbabilities { p0, p1 });
    }
    Ok(())
}

/// `0` if `p0 > p1 + ε`, `1` if `p1 > p0 + ε`, Unknown otherwise.
pub fn classify(p0: f64, p1: f64, policy: &ClassificationPolicy) -> Result<Label> {
    check_probabilities(p0, p1)?;
    let margin = p0 - p1;
    let eps = policy.epsilon + BOUNDARY_TOLERANCE;
    Ok(if margin > eps {
        Label::Zero
    } else if -margin > eps {
        Label::One
    } else {
        Label::Unknown
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decision_rule() {
        let p = ClassificationPolicy::new(0.1).unwrap();
        assert_eq!(classify(0.7, 0.3, &p).unwrap(), Label::Zero);
        assert_eq!(classify(0.3, 0.7, &p).unwrap(), Label::One);
        assert_eq!(classify(0.54, 0.46, &p).unwrap(), Label::Unknown);
        for eps in [0.0, 0.01, 0.5] {
            let p = ClassificationPolicy::new(eps).unwrap();
            assert_eq!(classify(0.5, 0.5, &p).unwrap(), Label::Unknown);
        }
        let p = ClassificationPolicy::new(0.01).unwrap();
        assert_eq!(classify(0.133918, 0.866082, &p).unwrap(), Label::One);
    }

    #[test]
    fn exact_boundary_is_unknown() {
        let p = ClassificationPolicy::new(0.25).unwrap();
        assert_eq!(classify(0.625, 0.375, &p).unwrap(), Label::Unknown);
    }

    #[test]
    fn invalid_inputs() {
        let p = ClassificationPolicy::default();
        assert!(classify(0.7, 0.7, &p).is_err());
        assert!(classify(-0.2, 1.2, &p).is_err());
        assert!(ClassificationPolicy::new(1.0).is_err());
        assert!(ClassificationPolicy::new(-0.1).is_err());
    }

    #[test]
    fn label_roundtrips() {
        assert_eq!(Label::from_class(1), Some(Label::One));
        assert_eq!(Label::from_class(7), None);
        assert_eq!(Label::Zero.opposite(), Label::One);
        assert_eq!(Label::Unknown.class(), None);
        assert_eq!(Label::Unknown.to_string(), "unknown");
    }
}
