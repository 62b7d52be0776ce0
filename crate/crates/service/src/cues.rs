//! Synthetic sensor reading and thermal-image cues shown at medium and high
//! transparency. The generative process is invented: a Beta-distributed
//! danger level and a grid of cells that each agree with the truth with a
//! fixed probability.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use trustwork_core::model::{Stimulus, Transparency};

#[derive(Debug, Error, PartialEq)]
pub enum CueConfigError {
    #[error("cue config field `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CueConfig {
    /// Beta shape (a, b) of the sensor value when the truth is absent.
    pub sensor_absent: (f64, f64),
    pub sensor_present: (f64, f64),
    pub threshold: f64,
    pub cells: usize,
    /// Probability that a cell shows the true condition.
    pub cell_accuracy: f64,
}

impl Default for CueConfig {
    fn default() -> Self {
        Self {
            sensor_absent: (2.0, 5.0),
            sensor_present: (5.0, 2.0),
            threshold: 0.5,
            cells: 7,
            cell_accuracy: 0.8,
        }
    }
}

impl CueConfig {
    pub fn validate(&self) -> Result<(), CueConfigError> {
        let bad = |field, message: String| Err(CueConfigError::Invalid { field, message });
        for (field, (a, b)) in [
            ("sensor_absent", self.sensor_absent),
            ("sensor_present", self.sensor_present),
        ] {
            if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
                return bad(field, format!("Beta shapes must be finite and > 0 (got {a}, {b})"));
            }
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad("threshold", format!("must lie in [0, 1] (got {})", self.threshold));
        }
        if !(0.0..=1.0).contains(&self.cell_accuracy) {
            return bad(
                "cell_accuracy",
                format!("must lie in [0, 1] (got {})", self.cell_accuracy),
            );
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CueCell {
    Suspicious,
    Clear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorReading {
    pub value: f64,
    pub threshold: f64,
}

/// What the display adds on top of the recommendation banner.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Cues {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sensor: Option<SensorReading>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cues: Option<Vec<CueCell>>,
}

/// Low shows nothing extra, medium adds the sensor bar, high adds the sensor
/// bar and the cue grid. `cfg` must already be validated.
pub fn generate_cues<R: Rng + ?Sized>(
    truth: Stimulus,
    transparency: Transparency,
    cfg: &CueConfig,
    rng: &mut R,
) -> Cues {
    if transparency == Transparency::Low {
        return Cues::default();
    }
    let (a, b) = match truth {
        Stimulus::Absent => cfg.sensor_absent,
        Stimulus::Present => cfg.sensor_present,
    };
    let value = Beta::new(a, b).expect("validated Beta shapes").sample(rng);
    let sensor = Some(SensorReading {
        value,
        threshold: cfg.threshold,
    });
    let cues = (transparency == Transparency::High).then(|| {
        (0..cfg.cells)
            .map(|_| {
                let shows_truth = rng.random_bool(cfg.cell_accuracy);
                match (truth == Stimulus::Present) == shows_truth {
                    true => CueCell::Suspicious,
                    false => CueCell::Clear,
                }
            })
            .collect()
    });
    Cues { sensor, cues }
}
