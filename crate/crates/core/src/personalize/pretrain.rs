use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::config::PretrainConfig;
use crate::container::{ByteReader, ByteWriter, Container, Kind};
use crate::diffnet::{Activation, AdamState, Mlp, ReconLoss};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::toyface::{Dataset, Image, Resolution};

pub const MIN_IDENTITIES: usize = 20;
pub const MIN_PER_IDENTITY: usize = 50;

/// Outcome of population pretraining.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    pub epochs_run: usize,
    /// Mean per-pixel squared error over the population after training.
    pub final_mse: f64,
    pub reached_target: bool,
}

/// Encoder/generator pair trained as an autoencoder on many identities.
#[derive(Debug, Clone, PartialEq)]
pub struct Pretrained<T> {
    pub encoder: Mlp<T>,
    pub generator: Mlp<T>,
    pub config: PretrainConfig,
    pub report: PretrainReport,
}

fn layer_dims(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    std::iter::once(input)
        .chain(hidden.iter().copied())
        .chain(std::iter::once(output))
        .collect()
}

/// Checks that the population spans enough identities and images per identity.
pub fn check_population(population: &Dataset) -> Result<()> {
    let mut counts: Vec<([u64; 8], usize)> = Vec::new();
    for (_, p) in &population.items {
        let key = p.identity.map(f64::to_bits);
        match counts.iter_mut().find(|(k, _)| *k == key) {
            Some((_, c)) => *c += 1,
            None => counts.push((key, 1)),
        }
    }
    let qualifying = counts.iter().filter(|(_, c)| *c >= MIN_PER_IDENTITY).count();
    if qualifying < MIN_IDENTITIES {
        return Err(Error::Config(format!(
            "population needs {MIN_IDENTITIES} identities with at least {MIN_PER_IDENTITY} images, found {qualifying}"
        )));
    }
    Ok(())
}

/// Latent scale of each generative factor: identity, yaw, pitch, expression,
/// optional softness, then the two nuisance factors. Distinct scales give the
/// varying factors distinct principal components.
fn factor_scales(factors: usize) -> Vec<f64> {
    let mut s = vec![1.0; 8];
    s.extend([1.6, 1.3, 1.0]);
    if factors == 14 {
        s.push(0.8);
    }
    s.extend([0.5, 0.5]);
    s
}

/// Fixed `latent_dim × factors` embedding with orthogonal columns, drawn
/// from `seed` and scaled per factor.
pub fn factor_embedding(latent_dim: usize, factors: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if factors > latent_dim {
        return Err(Error::Config(format!(
            "latent_dim {latent_dim} cannot hold {factors} orthogonal factor directions"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ EMBEDDING_SALT);
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(factors);
    while columns.len() < factors {
        let mut v: Vec<f64> = (0..latent_dim).map(|_| rng.sample(StandardNormal)).collect();
        for c in &columns {
            let p: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(c).for_each(|(a, b)| *a -= p * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|a| *a /= norm);
            columns.push(v);
        }
    }
    let scales = factor_scales(factors);
    Ok((0..latent_dim)
        .map(|i| (0..factors).map(|j| columns[j][i] * scales[j]).collect())
        .collect())
}

fn embed<T: Scalar>(matrix: &[Vec<f64>], factors: &[f64]) -> Vec<T> {
    matrix
        .iter()
        .map(|row| T::lit(row.iter().zip(factors).map(|(a, f)| a * f).sum()))
        .collect()
}

const EMBEDDING_SALT: u64 = 0x5eed_e3b0;

/// Encode then decode one image.
pub fn reconstruct<T: Scalar>(encoder: &Mlp<T>, generator: &Mlp<T>, image: &Image) -> Result<Image> {
    let z = encoder.forward(&image.to_values::<T>())?;
    Image::from_values(image.resolution(), &generator.forward(&z)?)
}

/// Trains encoder and generator jointly on the reconstruction loss.
/// Falling short of `target_mse` is reported, not treated as an error.
pub fn pretrain<T: Scalar>(population: &Dataset, config: &PretrainConfig) -> Result<Pretrained<T>> {
    config.validate()?;
    check_population(population)?;
    let res = population.resolution();
    let pixels = res.pixels();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut hidden_rev = config.hidden.clone();
    hidden_rev.reverse();
    let mut encoder = Mlp::random(
        &layer_dims(pixels, &config.hidden, config.latent_dim),
        Activation::Tanh,
        Activation::Identity,
        &mut rng,
    )?;
    let mut generator = Mlp::random(
        &layer_dims(config.latent_dim, &hidden_rev, pixels),
        Activation::Tanh,
        Activation::Logistic,
        &mut rng,
    )?;
    let images: Vec<Vec<T>> = population.images().map(|i| i.to_values()).collect();
    let embedding = factor_embedding(config.latent_dim, population.items[0].1.factors().len(), config.seed)?;
    let prior: Vec<Vec<T>> = population
        .items
        .iter()
        .map(|(_, p)| embed(&embedding, &p.factors()))
        .collect();
    let prior_scale = T::lit(2.0 * config.latent_prior_weight / config.latent_dim as f64);
    let loss = ReconLoss::new(res.width, res.height, config.grad_weight);
    let lr = T::lit(config.learning_rate);
    let mut adam_e = AdamState::new("encoder", encoder.num_params());
    let mut adam_g = AdamState::new("generator", generator.num_params());
    let mut ge = vec![T::zero(); encoder.num_params()];
    let mut gg = vec![T::zero(); generator.num_params()];
    let mut order: Vec<usize> = (0..images.len()).collect();
    let mut epochs_run = 0;
    for epoch in 0..config.max_epochs {
        order.shuffle(&mut rng);
        let mut sq = 0.0;
        for batch in order.chunks(config.batch_size) {
            ge.iter_mut().for_each(|g| *g = T::zero());
            gg.iter_mut().for_each(|g| *g = T::zero());
            let scale = T::one() / T::lit(batch.len() as f64);
            for &i in batch {
                let x = &images[i];
                let te = encoder.forward_trace(x)?;
                let tg = generator.forward_trace(te.output())?;
                let (_, mut og) = loss.eval(tg.output(), x)?;
                sq += squared_error(tg.output(), x) / pixels as f64;
                og.iter_mut().for_each(|g| *g *= scale);
                let mut dz = generator.backward_trace(&tg, &og, &mut gg)?;
                if config.latent_prior_weight > 0.0 {
                    for ((g, &z), &t) in dz.iter_mut().zip(te.output()).zip(&prior[i]) {
                        *g += prior_scale * scale * (z - t);
                    }
                }
                encoder.accumulate_param_grads(&te, &dz, &mut ge)?;
            }
            adam_g.step(generator.params_mut(), &gg, lr)?;
            adam_e.step(encoder.params_mut(), &ge, lr)?;
        }
        epochs_run = epoch + 1;
        let epoch_mse = sq / images.len() as f64;
        if !epoch_mse.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, anchor: 0 });
        }
        log::debug!("pretrain epoch {epoch}: running mse {epoch_mse:.3e}");
        if epoch_mse < config.target_mse {
            break;
        }
    }
    // match what a save/load round trip yields
    encoder.snap_to_f32();
    generator.snap_to_f32();
    let final_mse = population_mse(&encoder, &generator, population)?;
    let reached_target = final_mse < config.target_mse;
    if !reached_target {
        log::warn!(
            "pretraining stopped after {epochs_run} epochs at mse {final_mse:.3e}, above target {:.1e}",
            config.target_mse
        );
    }
    Ok(Pretrained {
        encoder,
        generator,
        config: config.clone(),
        report: PretrainReport {
            epochs_run,
            final_mse,
            reached_target,
        },
    })
}

pub(crate) fn squared_error<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = (x - y).as_f64();
            d * d
        })
        .sum()
}

/// Mean per-pixel squared reconstruction error over a dataset.
pub fn population_mse<T: Scalar>(encoder: &Mlp<T>, generator: &Mlp<T>, data: &Dataset) -> Result<f64> {
    let mut total = 0.0;
    for img in data.images() {
        total += reconstruct(encoder, generator, img)?.mse(img);
    }
    Ok(total / data.len() as f64)
}

impl<T: Scalar> Pretrained<T> {
    pub fn resolution(&self) -> Resolution {
        let n = self.generator.output_dim();
        let side = (n as f64).sqrt().round() as usize;
        Resolution {
            width: side,
            height: n / side.max(1),
        }
    }

    pub fn to_container(&self) -> Container {
        let mut c = Container::new(Kind::Pretrained);
        let mut meta = ByteWriter::default();
        meta.str(&serde_json::to_string(&self.config).expect("config serializes"));
        meta.str(&serde_json::to_string(&self.report).expect("report serializes"));
        c.push(b"META", meta.into_inner());
        let mut enc = ByteWriter::default();
        self.encoder.encode(&mut enc);
        c.push(b"ENCD", enc.into_inner());
        let mut gen = ByteWriter::default();
        self.generator.encode(&mut gen);
        c.push(b"GENR", gen.into_inner());
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        let mut meta = ByteReader::new(c.section(b"META")?);
        let config = serde_json::from_str(&meta.str()?)?;
        let report = serde_json::from_str(&meta.str()?)?;
        meta.finish()?;
        let mut r = ByteReader::new(c.section(b"ENCD")?);
        let encoder = Mlp::decode(&mut r)?;
        r.finish()?;
        let mut r = ByteReader::new(c.section(b"GENR")?);
        let generator = Mlp::decode(&mut r)?;
        r.finish()?;
        if encoder.output_dim() != generator.input_dim() {
            return Err(Error::Format("encoder and generator latent sizes differ".into()));
        }
        Ok(Self {
            encoder,
            generator,
            config,
            report,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_container().write_file(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_container(&Container::read_file(path)?.expect_kind(Kind::Pretrained)?)
    }
}
