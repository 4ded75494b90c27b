//! JSON request and response bodies.

use std::collections::BTreeMap;

use latorg::control::Degradation;
use latorg::toyface::Resolution;
use serde::{Deserialize, Serialize};

use crate::codec::RleMask;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeInfo {
    pub name: String,
    /// Raw projection bounds of the anchors along the attribute direction;
    /// normalized coordinates map `lo` to 0 and `hi` to 1.
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub attributes: Vec<AttributeInfo>,
    pub anchor_count: usize,
    pub latent_dim: usize,
    pub resolution: Resolution,
    pub beta_default: f64,
    pub digest: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleRequest {
    pub targets: BTreeMap<String, f64>,
    pub beta: Option<f64>,
    pub seed: Option<u64>,
    /// Also return the float pixels.
    pub raw: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSummary {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleResponse {
    pub image_png_base64: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_raw: Option<Vec<f64>>,
    pub latent_coords: BTreeMap<String, f64>,
    pub alpha_summary: AlphaSummary,
    pub in_hull: bool,
}

/// Uploaded image, as PNG or as row-major floats at model resolution.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CreateSessionRequest {
    pub image_png_base64: Option<String>,
    pub image_raw: Option<Vec<f64>>,
    pub raw: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSessionResponse {
    pub session_id: String,
    /// The session's current image: the inverted and pivot-tuned reconstruction.
    #[serde(flatten)]
    pub image: ImageResponse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EditRequest {
    pub attribute: String,
    pub value: f64,
    #[serde(default)]
    pub allow_extrapolation: bool,
    #[serde(default)]
    pub raw: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageResponse {
    pub image_png_base64: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_raw: Option<Vec<f64>>,
    pub latent_coords: BTreeMap<String, f64>,
}

/// Degradation operator on the wire. `mask_rle` is the compact form sent
/// by the editor; `keep = true` marks observed pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DegradationBody {
    Identity,
    Downsample {
        factor: usize,
    },
    Mask {
        width: usize,
        height: usize,
        keep: Vec<bool>,
    },
    MaskRle(RleMask),
}

impl DegradationBody {
    pub fn into_degradation(self) -> Result<Degradation, crate::error::ApiError> {
        Ok(match self {
            DegradationBody::Identity => Degradation::Identity,
            DegradationBody::Downsample { factor } => Degradation::Downsample { factor },
            DegradationBody::Mask { width, height, keep } => Degradation::Mask { width, height, keep },
            DegradationBody::MaskRle(rle) => Degradation::Mask {
                width: rle.width,
                height: rle.height,
                keep: rle.decode()?,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnhanceRequest {
    pub degradation: DegradationBody,
    #[serde(default)]
    pub targets: BTreeMap<String, f64>,
    pub lambda: Option<f64>,
    /// Replace the session latent with the enhanced one.
    #[serde(default)]
    pub commit: bool,
    #[serde(default)]
    pub raw: bool,
}
