//! Procedural toy faces with exactly measurable pose and expression.
//!
//! A face is a background plane plus two Gaussian eyes, a Gaussian nose and a
//! Gaussian-falloff quadratic mouth arc. Yaw and pitch translate every feature,
//! expression bends the mouth. [`Estimator`] recovers the three attributes
//! from pixel moments and is the measurement oracle used by every evaluation.

mod dataset;
mod design;
mod estimate;
mod image;
mod render;

pub use dataset::{make_dataset, make_dataset_with, make_population, Dataset, WorldConfig};
pub use estimate::{estimate_attributes, Affine, AttributeEstimate, Calibration, Estimator, Moments};
pub use image::{Image, Resolution};
pub use render::render;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const IDENTITY_DIM: usize = 8;
pub const YAW_RANGE: (f64, f64) = (-30.0, 30.0);
pub const PITCH_RANGE: (f64, f64) = (-15.0, 15.0);
pub const EXPRESSION_RANGE: (f64, f64) = (0.0, 1.0);
/// Worst-case estimator error per attribute (yaw, pitch, expression,
/// softness), in attribute units.
pub const ESTIMATOR_TOLERANCE: [f64; 4] = [1.5, 1.5, 0.08, 0.08];

/// Ground-truth generative parameters of one toy face.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyFaceParams {
    /// Per-individual geometry and contrast, each in `[0, 1]`.
    pub identity: [f64; IDENTITY_DIM],
    /// Degrees.
    pub yaw: f64,
    /// Degrees.
    pub pitch: f64,
    pub expression: f64,
    /// Optional fourth attribute; overrides the eye width when present.
    pub softness: Option<f64>,
    /// Background shade and feature gain, each in `[0, 1]`.
    pub nuisance: [f64; 2],
}

impl ToyFaceParams {
    /// Mid-range identity, frontal pose, neutral mouth.
    pub fn neutral() -> Self {
        Self {
            identity: [0.5; IDENTITY_DIM],
            yaw: 0.0,
            pitch: 0.0,
            expression: 0.0,
            softness: None,
            nuisance: [0.5; 2],
        }
    }

    pub fn with_pose(mut self, yaw: f64, pitch: f64, expression: f64) -> Self {
        self.yaw = yaw;
        self.pitch = pitch;
        self.expression = expression;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let check = |what: &str, v: f64, (min, max): (f64, f64)| {
            if v.is_finite() && v >= min && v <= max {
                Ok(())
            } else {
                Err(Error::Range {
                    what: what.to_string(),
                    value: v,
                    min,
                    max,
                })
            }
        };
        for (i, &v) in self.identity.iter().enumerate() {
            check(&format!("identity[{i}]"), v, (0.0, 1.0))?;
        }
        check("yaw", self.yaw, YAW_RANGE)?;
        check("pitch", self.pitch, PITCH_RANGE)?;
        check("expression", self.expression, EXPRESSION_RANGE)?;
        if let Some(s) = self.softness {
            check("softness", s, (0.0, 1.0))?;
        }
        for (i, &v) in self.nuisance.iter().enumerate() {
            check(&format!("nuisance[{i}]"), v, (0.0, 1.0))?;
        }
        Ok(())
    }

    /// Attribute values in schema order (yaw, pitch, expression[, softness]).
    pub fn attributes(&self) -> Vec<f64> {
        let mut v = vec![self.yaw, self.pitch, self.expression];
        if let Some(s) = self.softness {
            v.push(s);
        }
        v
    }

    /// Every generative factor rescaled to `[-1, 1]`: identity, yaw, pitch,
    /// expression, softness (when present), then nuisance.
    pub fn factors(&self) -> Vec<f64> {
        let unit = |v: f64, (lo, hi): (f64, f64)| 2.0 * (v - lo) / (hi - lo) - 1.0;
        let mut f: Vec<f64> = self.identity.iter().map(|&v| unit(v, (0.0, 1.0))).collect();
        f.push(unit(self.yaw, YAW_RANGE));
        f.push(unit(self.pitch, PITCH_RANGE));
        f.push(unit(self.expression, EXPRESSION_RANGE));
        if let Some(s) = self.softness {
            f.push(unit(s, (0.0, 1.0)));
        }
        f.extend(self.nuisance.iter().map(|&v| unit(v, (0.0, 1.0))));
        f
    }

    pub(crate) fn to_record(&self) -> [f64; 14] {
        let mut r = [0.0; 14];
        r[..8].copy_from_slice(&self.identity);
        r[8] = self.yaw;
        r[9] = self.pitch;
        r[10] = self.expression;
        r[11] = self.softness.unwrap_or(f64::NAN);
        r[12] = self.nuisance[0];
        r[13] = self.nuisance[1];
        r
    }

    pub(crate) fn from_record(r: &[f64]) -> Self {
        let mut identity = [0.0; IDENTITY_DIM];
        identity.copy_from_slice(&r[..8]);
        Self {
            identity,
            yaw: r[8],
            pitch: r[9],
            expression: r[10],
            softness: if r[11].is_nan() { None } else { Some(r[11]) },
            nuisance: [r[12], r[13]],
        }
    }
}
