use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{sha256_hex, AnchorOptimizer, TrainConfig};
use super::model::{PersonalizedModel, Provenance};
use crate::container::ByteWriter;
use crate::diffnet::{AdamState, Mlp, ReconLoss};
use crate::error::{Error, Result};
use crate::latentspace::{
    anchor_gradient, anchor_loss_with, AnchorSet, AttributeSchema, DirectionBasis, Groups, PcaRefresh,
};
use crate::scalar::Scalar;
use crate::toyface::Dataset;

/// Encodes every personal image; labels come from the ground-truth
/// parameters quantized by `schema`.
pub fn init_anchors<T: Scalar>(encoder: &Mlp<T>, personal: &Dataset, schema: &AttributeSchema) -> Result<AnchorSet<T>> {
    let mut latents = Vec::with_capacity(personal.len());
    let mut labels = Vec::with_capacity(personal.len());
    for (img, params) in &personal.items {
        latents.push(encoder.forward(&img.to_values::<T>())?);
        labels.push(schema.quantize(&params.attributes())?);
    }
    AnchorSet::new(latents, labels, schema.clone())
}

/// Losses of one training epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    /// Sum over anchors of the reconstruction loss met during the epoch.
    pub recon: f64,
    /// Anchor loss at the start of the epoch, along that epoch's directions.
    pub anchor: f64,
    /// `recon + weight · anchor`.
    pub total: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochStats>,
}

impl History {
    /// Trailing moving average of the total loss.
    pub fn smoothed_total(&self, window: usize) -> Vec<f64> {
        let totals: Vec<f64> = self.epochs.iter().map(|e| e.total).collect();
        let w = window.max(1);
        (0..totals.len())
            .map(|i| {
                let lo = (i + 1).saturating_sub(w);
                totals[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
            })
            .collect()
    }
}

pub struct Tuning<T> {
    pub model: PersonalizedModel<T>,
    pub history: History,
}

fn owned_directions<T: Scalar>(basis: &DirectionBasis<T>) -> Vec<Vec<T>> {
    basis.directions().into_iter().map(<[T]>::to_vec).collect()
}

/// Jointly tunes a copy of the generator and the anchors on the
/// reconstruction loss plus the weighted anchor loss.
pub fn tune<T: Scalar>(
    generator: &Mlp<T>,
    anchors: AnchorSet<T>,
    personal: &Dataset,
    config: &TrainConfig,
) -> Result<Tuning<T>> {
    config.validate()?;
    if anchors.len() != personal.len() {
        return Err(Error::Dimension {
            context: "anchors per personal image",
            expected: personal.len(),
            got: anchors.len(),
        });
    }
    if generator.input_dim() != anchors.dim() {
        return Err(Error::Dimension {
            context: "generator input",
            expected: anchors.dim(),
            got: generator.input_dim(),
        });
    }
    let res = personal.resolution();
    if generator.output_dim() != res.pixels() {
        return Err(Error::Dimension {
            context: "generator output",
            expected: res.pixels(),
            got: generator.output_dim(),
        });
    }
    let pretrained_hash = {
        let mut w = ByteWriter::default();
        generator.encode(&mut w);
        sha256_hex(&w.into_inner())
    };

    let mut gen = generator.clone();
    let mut anchors = anchors;
    let images: Vec<Vec<T>> = personal.images().map(|i| i.to_values()).collect();
    let loss = ReconLoss::new(res.width, res.height, config.grad_weight);
    let lr = T::lit(config.learning_rate);
    let lr_g = T::lit(config.generator_learning_rate.unwrap_or(config.learning_rate));
    let weight = T::lit(config.anchor_loss_weight);
    let organize = config.anchor_loss_weight > 0.0;
    let norm = config.anchor_loss_norm;
    let options = config.basis_options();
    let groups = Groups::new(&anchors);

    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut adam_g = AdamState::new("generator", gen.num_params());
    let mut adam_w: Vec<AdamState<T>> = (0..anchors.len())
        .map(|n| AdamState::new(format!("anchor {n}"), anchors.dim()))
        .collect();
    let mut gg = vec![T::zero(); gen.num_params()];
    let mut order: Vec<usize> = (0..anchors.len()).collect();
    let mut history = History::default();

    for epoch in 0..config.epochs {
        let mut dirs = owned_directions(&DirectionBasis::directions_only(&anchors, options)?);
        let start_anchor = {
            let refs: Vec<&[T]> = dirs.iter().map(Vec::as_slice).collect();
            anchor_loss_with(&anchors, &refs, norm).0
        };
        order.shuffle(&mut rng);
        let mut recon_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            gg.iter_mut().for_each(|g| *g = T::zero());
            let mut pending = Vec::with_capacity(batch.len());
            for &n in batch {
                let trace = gen.forward_trace(anchors.anchor(n))?;
                let (recon, og) = loss.eval(trace.output(), &images[n])?;
                let mut grad = gen.backward_trace(&trace, &og, &mut gg)?;
                let mut value = recon;
                if organize {
                    let refs: Vec<&[T]> = dirs.iter().map(Vec::as_slice).collect();
                    let (a, ag) = anchor_gradient(&anchors, &groups, &refs, n, norm);
                    value += weight * a;
                    crate::scalar::axpy(weight, &ag, &mut grad);
                }
                if !value.is_finite() {
                    return Err(Error::NonFiniteLoss { epoch, anchor: n });
                }
                recon_sum += recon.as_f64();
                pending.push((n, grad));
            }
            if batch.len() > 1 {
                let s = T::one() / T::lit(batch.len() as f64);
                gg.iter_mut().for_each(|g| *g *= s);
            }
            adam_g.step(gen.params_mut(), &gg, lr_g)?;
            for (n, grad) in pending {
                match config.anchor_optimizer {
                    AnchorOptimizer::Adam => adam_w[n].step(anchors.anchor_mut(n), &grad, lr)?,
                    AnchorOptimizer::Sgd => crate::scalar::axpy(-lr, &grad, anchors.anchor_mut(n)),
                }
            }
            if config.pca_refresh == PcaRefresh::Step {
                dirs = owned_directions(&DirectionBasis::directions_only(&anchors, options)?);
            }
        }
        let anchor = start_anchor.as_f64();
        let stats = EpochStats {
            recon: recon_sum,
            anchor,
            total: recon_sum + config.anchor_loss_weight * anchor,
        };
        if epoch % 100 == 0 || epoch + 1 == config.epochs {
            log::info!(
                "epoch {epoch}: recon {:.4e} anchor {:.4e} total {:.4e}",
                stats.recon,
                stats.anchor,
                stats.total
            );
        }
        history.epochs.push(stats);
    }

    gen.snap_to_f32();
    let basis = DirectionBasis::fit(&anchors, options)?;
    let provenance = Provenance {
        config_hash: config.hash(),
        pretrained_hash,
        individual_seed: personal.individual_seed,
        rng_seed: config.rng_seed,
        anchor_count: anchors.len(),
    };
    Ok(Tuning {
        model: PersonalizedModel::new(gen, anchors, basis, config.clone(), provenance)?,
        history,
    })
}
