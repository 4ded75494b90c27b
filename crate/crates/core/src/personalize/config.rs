use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::latentspace::{AssignmentCriterion, BasisOptions, LossNorm, PcaRefresh};

/// Joint tuning hyperparameters. Every field has a default, so a JSON
/// config may list only the keys it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Generator step size; `None` uses `learning_rate`.
    pub generator_learning_rate: Option<f64>,
    /// Zero gives the reconstruction-only baseline.
    pub anchor_loss_weight: f64,
    /// Weight of the gradient-difference term of the reconstruction loss.
    pub grad_weight: f64,
    pub rng_seed: u64,
    pub anchor_loss_norm: LossNorm,
    pub pca_refresh: PcaRefresh,
    pub assignment_criterion: AssignmentCriterion,
    pub orient_directions: bool,
    pub anchor_optimizer: AnchorOptimizer,
}

/// Update rule for the anchors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorOptimizer {
    Adam,
    #[default]
    Sgd,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 3000,
            batch_size: 1,
            learning_rate: 5e-3,
            generator_learning_rate: Some(1e-3),
            anchor_loss_weight: 1.0,
            grad_weight: 0.5,
            rng_seed: 0,
            anchor_loss_norm: LossNorm::L2,
            pca_refresh: PcaRefresh::Epoch,
            assignment_criterion: AssignmentCriterion::Relative,
            orient_directions: true,
            anchor_optimizer: AnchorOptimizer::default(),
        }
    }
}

impl TrainConfig {
    /// Reconstruction-only tuning with otherwise identical settings.
    pub fn baseline(&self) -> Self {
        Self {
            anchor_loss_weight: 0.0,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if let Some(g) = self.generator_learning_rate {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::Config(format!(
                    "generator_learning_rate must be positive, got {g}"
                )));
            }
        }
        if !(self.anchor_loss_weight >= 0.0 && self.anchor_loss_weight.is_finite()) {
            return Err(Error::Config(
                "anchor_loss_weight must be finite and non-negative".into(),
            ));
        }
        if !(self.grad_weight >= 0.0 && self.grad_weight.is_finite()) {
            return Err(Error::Config("grad_weight must be finite and non-negative".into()));
        }
        Ok(())
    }

    pub fn basis_options(&self) -> BasisOptions {
        BasisOptions {
            norm: self.anchor_loss_norm,
            criterion: self.assignment_criterion,
            orient: self.orient_directions,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Population autoencoder settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainConfig {
    pub latent_dim: usize,
    pub hidden: Vec<usize>,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub grad_weight: f64,
    /// Stop once the mean per-pixel squared error over an epoch drops below this.
    pub target_mse: f64,
    /// Weight of the pull of each code toward a fixed random linear
    /// embedding of the image's generative factors. Zero trains a plain
    /// autoencoder.
    pub latent_prior_weight: f64,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            latent_dim: 16,
            hidden: vec![128, 128],
            max_epochs: 200,
            batch_size: 8,
            learning_rate: 1e-3,
            grad_weight: 0.5,
            target_mse: 1e-4,
            latent_prior_weight: 0.3,
            seed: 0,
        }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || self.hidden.contains(&0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        if self.max_epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("max_epochs and batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(self.latent_prior_weight >= 0.0 && self.latent_prior_weight.is_finite()) {
            return Err(Error::Config(
                "latent_prior_weight must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}
