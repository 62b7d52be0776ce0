//! Discrete alphabets of the trust-workload POMDP.
//!
//! Hidden state is the pair (trust, workload), each with two levels. The
//! input alphabet is the triple (recommendation, experience, transparency),
//! 2 x 2 x 3 = 12 actions, indexed recommendation-major, then experience,
//! then transparency. Observations are (compliance, response time).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const NUM_ACTIONS: usize = 12;
pub const NUM_STATES: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("unknown {kind} value `{value}`")]
    Unknown { kind: &'static str, value: String },
    #[error("response time must be finite and > 0 (got {0})")]
    ResponseTime(f64),
}

macro_rules! labelled_enum {
    (
        $(#[$meta:meta])*
        $name:ident, $kind:literal { $($variant:ident = $idx:literal => $label:literal $(| $alias:literal)*),+ $(,)? }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "lowercase")]
        pub enum $name {
            $($variant = $idx),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            #[inline]
            pub fn index(self) -> usize {
                self as usize
            }

            pub fn from_index(idx: usize) -> Option<Self> {
                Self::ALL.get(idx).copied()
            }

            /// Token used in session-log CSV files.
            pub fn label(self) -> &'static str {
                match self {
                    $($name::$variant => $label),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.label())
            }
        }

        impl FromStr for $name {
            type Err = ParseError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let t = s.trim();
                $(
                    if t.eq_ignore_ascii_case($label) $(|| t.eq_ignore_ascii_case($alias))* {
                        return Ok($name::$variant);
                    }
                )+
                Err(ParseError::Unknown { kind: $kind, value: s.to_string() })
            }
        }
    };
}

labelled_enum!(
    TrustState, "trust" { Low = 0 => "low", High = 1 => "high" }
);

labelled_enum!(
    WorkloadState, "workload" { Low = 0 => "low", High = 1 => "high" }
);

labelled_enum!(
    /// Absence or presence of the stimulus. Used for the ground truth, the
    /// aid's recommendation and the human's inference alike.
    Stimulus, "stimulus" { Absent = 0 => "absent" | "light", Present = 1 => "present" | "heavy" }
);

labelled_enum!(
    /// Whether the previous recommendation turned out to be correct.
    Experience, "experience" { Faulty = 0 => "faulty", Reliable = 1 => "reliable" }
);

labelled_enum!(
    Transparency, "transparency" { Low = 0 => "L" | "low", Medium = 1 => "M" | "medium", High = 2 => "H" | "high" }
);

labelled_enum!(
    Compliance, "compliance" { Disagree = 0 => "disagree", Agree = 1 => "agree" }
);

impl Experience {
    /// Experience carried into the next trial after a recommendation was
    /// checked against the truth.
    pub fn from_outcome(recommendation: Stimulus, truth: Stimulus) -> Self {
        if recommendation == truth {
            Experience::Reliable
        } else {
            Experience::Faulty
        }
    }
}

/// One POMDP input: two uncontrollable components and the controlled
/// transparency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionTriple {
    pub recommendation: Stimulus,
    pub experience: Experience,
    pub transparency: Transparency,
}

impl ActionTriple {
    pub const fn new(
        recommendation: Stimulus,
        experience: Experience,
        transparency: Transparency,
    ) -> Self {
        Self {
            recommendation,
            experience,
            transparency,
        }
    }

    #[inline]
    pub fn index(self) -> usize {
        self.recommendation.index() * 6 + self.experience.index() * 3 + self.transparency.index()
    }

    pub fn from_index(idx: usize) -> Option<Self> {
        if idx >= NUM_ACTIONS {
            return None;
        }
        Some(Self {
            recommendation: Stimulus::ALL[idx / 6],
            experience: Experience::ALL[(idx / 3) % 2],
            transparency: Transparency::ALL[idx % 3],
        })
    }

    pub fn all() -> impl Iterator<Item = ActionTriple> {
        (0..NUM_ACTIONS).map(|i| Self::from_index(i).expect("index in range"))
    }

    /// `absent/faulty/L` style label.
    pub fn label(self) -> String {
        format!(
            "{}/{}/{}",
            self.recommendation, self.experience, self.transparency
        )
    }
}

/// Joint hidden state; index is `trust * 2 + workload`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProductState {
    pub trust: TrustState,
    pub workload: WorkloadState,
}

impl ProductState {
    pub const fn new(trust: TrustState, workload: WorkloadState) -> Self {
        Self { trust, workload }
    }

    #[inline]
    pub fn index(self) -> usize {
        self.trust.index() * 2 + self.workload.index()
    }

    pub fn from_index(idx: usize) -> Option<Self> {
        if idx >= NUM_STATES {
            return None;
        }
        Some(Self {
            trust: TrustState::ALL[idx / 2],
            workload: WorkloadState::ALL[idx % 2],
        })
    }

    pub fn all() -> impl Iterator<Item = ProductState> {
        (0..NUM_STATES).map(|i| Self::from_index(i).expect("index in range"))
    }
}

/// Observable response to one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObservationPair {
    pub compliance: Compliance,
    response_time: f64,
}

impl ObservationPair {
    pub fn new(compliance: Compliance, response_time: f64) -> Result<Self, ParseError> {
        if !(response_time.is_finite() && response_time > 0.0) {
            return Err(ParseError::ResponseTime(response_time));
        }
        Ok(Self {
            compliance,
            response_time,
        })
    }

    /// Seconds, always finite and strictly positive.
    #[inline]
    pub fn response_time(&self) -> f64 {
        self.response_time
    }
}

impl<'de> Deserialize<'de> for ObservationPair {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            compliance: Compliance,
            response_time: f64,
        }
        let raw = Raw::deserialize(d)?;
        ObservationPair::new(raw.compliance, raw.response_time).map_err(serde::de::Error::custom)
    }
}
