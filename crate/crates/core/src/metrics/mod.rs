//! Evaluation protocols: controlled-synthesis spread, edit consistency,
//! identity similarity and sample diversity, each comparing a model with
//! its reconstruction-only baseline.

mod report;

pub use report::{evaluate, EvalConfig, EvalReport};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::control::{edit, sample_latent, AttributeTargets};
use crate::error::{Error, Result};
use crate::personalize::PersonalizedModel;
use crate::scalar::Scalar;
use crate::toyface::{Dataset, Estimator, Image, ESTIMATOR_TOLERANCE};

/// Fixed normalized values of the controlled-synthesis table.
pub const FIXED_VALUES: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
pub const EDIT_STEPS: usize = 21;
pub const EDIT_STARTS: usize = 21;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Population mean and standard deviation.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len().max(1) as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

/// A quantity measured on our model and on the baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pair<V> {
    pub ours: V,
    pub baseline: V,
}

fn seeded(seed: u64, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ a.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ b.wrapping_mul(0xc2b2_ae3d_27d4_eb4f))
}

/// Oracle attribute values of an image, in schema order.
pub fn measure(image: &Image, attributes: usize) -> Result<Vec<f64>> {
    Ok(Estimator::shared(image.resolution())?
        .estimate(image)?
        .values(attributes))
}

fn check_pair<T: Scalar>(ours: &PersonalizedModel<T>, baseline: &PersonalizedModel<T>) -> Result<()> {
    if ours.schema() != baseline.schema() {
        return Err(Error::Metric("models use different attribute schemas".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StdCell {
    pub attribute: String,
    pub value: f64,
    pub std: Pair<f64>,
}

/// Spread of the measured attribute when that attribute is held fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StdReport {
    pub sample_count: usize,
    pub cells: Vec<StdCell>,
}

/// Population std of attribute `m` over `count` samples at fixed target `value`.
pub fn fixed_attribute_std<T: Scalar>(
    model: &PersonalizedModel<T>,
    m: usize,
    value: f64,
    count: usize,
    beta: f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let attributes = model.basis.attribute_count();
    let targets = AttributeTargets::none(attributes).with(m, value);
    let mut measured = Vec::with_capacity(count);
    for _ in 0..count {
        let (latent, _) = sample_latent(model, &targets, beta, false, rng)?;
        measured.push(measure(&model.generate(&latent)?, attributes)?[m]);
    }
    Ok(MeanStd::of(&measured).std)
}

pub fn controlled_synthesis_report<T: Scalar>(
    ours: &PersonalizedModel<T>,
    baseline: &PersonalizedModel<T>,
    sample_count: usize,
    beta: f64,
    seed: u64,
) -> Result<StdReport> {
    check_pair(ours, baseline)?;
    let mut cells = Vec::new();
    for (m, attr) in ours.schema().attributes.iter().enumerate() {
        for (k, &value) in FIXED_VALUES.iter().enumerate() {
            let run = |model| {
                fixed_attribute_std(
                    model,
                    m,
                    value,
                    sample_count,
                    beta,
                    &mut seeded(seed, m as u64, k as u64),
                )
            };
            cells.push(StdCell {
                attribute: attr.name.clone(),
                value,
                std: Pair {
                    ours: run(ours)?,
                    baseline: run(baseline)?,
                },
            });
        }
    }
    Ok(StdReport { sample_count, cells })
}

/// Edit statistics of one model for one edited attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepStats {
    /// Mean over sweep steps of the spread of the edited attribute across
    /// starting images.
    pub edited_std: f64,
    /// Per attribute (schema order; the edited one is `None`): mean over
    /// starting images of the spread across the sweep.
    pub unedited_std: Vec<Option<f64>>,
    /// Share of sweeps whose measured edited attribute never drops by more
    /// than the estimator tolerance.
    pub monotone_fraction: f64,
    /// Identity similarity of the edited images.
    pub id: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditRow {
    pub attribute: String,
    pub stats: Pair<SweepStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditReport {
    pub starts: usize,
    pub steps: usize,
    pub rows: Vec<EditRow>,
}

/// `true` if no value falls more than `tol` below the running maximum.
pub fn is_monotone_within(values: &[f64], tol: f64) -> bool {
    let mut best = f64::NEG_INFINITY;
    for &v in values {
        if v < best - tol {
            return false;
        }
        best = best.max(v);
    }
    true
}

pub fn sweep_stats<T: Scalar>(
    model: &PersonalizedModel<T>,
    m: usize,
    starts: &[Vec<T>],
    steps: usize,
    training: &IdFeatures,
) -> Result<SweepStats> {
    let attributes = model.basis.attribute_count();
    // measured[s][k] = attribute vector of start s at sweep step k
    let mut measured = Vec::with_capacity(starts.len());
    let mut ids = Vec::new();
    for w in starts {
        let mut row = Vec::with_capacity(steps);
        for k in 0..steps {
            let v = if steps > 1 { k as f64 / (steps - 1) as f64 } else { 0.0 };
            let img = model.generate(&edit(model, w, m, v, false)?.latent)?;
            ids.push(training.best_similarity(&img));
            row.push(measure(&img, attributes)?);
        }
        measured.push(row);
    }
    let edited_std = (0..steps)
        .map(|k| MeanStd::of(&measured.iter().map(|r| r[k][m]).collect::<Vec<_>>()).std)
        .sum::<f64>()
        / steps as f64;
    let unedited_std = (0..attributes)
        .map(|a| {
            (a != m).then(|| {
                measured
                    .iter()
                    .map(|r| MeanStd::of(&r.iter().map(|v| v[a]).collect::<Vec<_>>()).std)
                    .sum::<f64>()
                    / measured.len() as f64
            })
        })
        .collect();
    let tol = ESTIMATOR_TOLERANCE[m.min(ESTIMATOR_TOLERANCE.len() - 1)];
    let monotone = measured
        .iter()
        .filter(|r| is_monotone_within(&r.iter().map(|v| v[m]).collect::<Vec<_>>(), tol))
        .count();
    Ok(SweepStats {
        edited_std,
        unedited_std,
        monotone_fraction: monotone as f64 / measured.len().max(1) as f64,
        id: MeanStd::of(&ids),
    })
}

fn starting_latents<T: Scalar>(
    model: &PersonalizedModel<T>,
    count: usize,
    beta: f64,
    seed: u64,
) -> Result<Vec<Vec<T>>> {
    let mut rng = seeded(seed, 0xed17, 0);
    let none = AttributeTargets::none(model.basis.attribute_count());
    (0..count)
        .map(|_| sample_latent(model, &none, beta, false, &mut rng).map(|(w, _)| w))
        .collect()
}

pub fn edit_consistency_report<T: Scalar>(
    ours: &PersonalizedModel<T>,
    baseline: &PersonalizedModel<T>,
    training: &Dataset,
    beta: f64,
    seed: u64,
) -> Result<EditReport> {
    check_pair(ours, baseline)?;
    let features = IdFeatures::new(training);
    let starts_ours = starting_latents(ours, EDIT_STARTS, beta, seed)?;
    let starts_base = starting_latents(baseline, EDIT_STARTS, beta, seed)?;
    let rows = ours
        .schema()
        .attributes
        .iter()
        .enumerate()
        .map(|(m, attr)| {
            Ok(EditRow {
                attribute: attr.name.clone(),
                stats: Pair {
                    ours: sweep_stats(ours, m, &starts_ours, EDIT_STEPS, &features)?,
                    baseline: sweep_stats(baseline, m, &starts_base, EDIT_STEPS, &features)?,
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EditReport {
        starts: EDIT_STARTS,
        steps: EDIT_STEPS,
        rows,
    })
}

/// Mean-subtracted, unit-norm pixel vector.
pub fn id_feature(image: &Image) -> Vec<f64> {
    let mean = image.pixels.iter().sum::<f64>() / image.pixels.len() as f64;
    let mut v: Vec<f64> = image.pixels.iter().map(|p| p - mean).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

/// Identity features of a set of reference images.
pub struct IdFeatures(Vec<Vec<f64>>);

impl IdFeatures {
    pub fn new(training: &Dataset) -> Self {
        Self(training.images().map(id_feature).collect())
    }

    /// Largest cosine similarity between `image` and any reference.
    pub fn best_similarity(&self, image: &Image) -> f64 {
        let f = id_feature(image);
        self.0
            .iter()
            .map(|g| g.iter().zip(&f).map(|(a, b)| a * b).sum::<f64>())
            .fold(-1.0, f64::max)
    }
}

/// Nearest-training-image cosine similarity of pixel features over hull samples.
pub fn id_score<T: Scalar>(
    model: &PersonalizedModel<T>,
    training: &Dataset,
    samples: usize,
    beta: f64,
    seed: u64,
) -> Result<MeanStd> {
    if samples < 2 {
        return Err(Error::Metric("id score needs at least 2 samples".into()));
    }
    let features = IdFeatures::new(training);
    let mut rng = seeded(seed, 0x1d, 0);
    let none = AttributeTargets::none(model.basis.attribute_count());
    let mut scores = Vec::with_capacity(samples);
    for _ in 0..samples {
        let (w, _) = sample_latent(model, &none, beta, false, &mut rng)?;
        scores.push(features.best_similarity(&model.generate(&w)?));
    }
    Ok(MeanStd::of(&scores))
}

pub fn rmse(a: &Image, b: &Image) -> f64 {
    a.mse(b).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diversity {
    pub mean: f64,
    pub std: f64,
    /// Clusters with fewer than two members, left out of the average.
    pub skipped_clusters: usize,
}

/// Mean intra-cluster pairwise RMSE of `images` assigned to the nearest center.
pub fn cluster_diversity(images: &[Image], centers: &[Image]) -> Result<Diversity> {
    let mut clusters: Vec<Vec<&Image>> = vec![Vec::new(); centers.len()];
    for img in images {
        let nearest = centers
            .iter()
            .enumerate()
            .map(|(i, c)| (i, rmse(img, c)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
            .ok_or_else(|| Error::Metric("no cluster centers".into()))?;
        clusters[nearest].push(img);
    }
    let mut per_cluster = Vec::new();
    for members in clusters.iter().filter(|c| c.len() >= 2) {
        let (mut sum, mut count) = (0.0, 0usize);
        for i in 0..members.len() {
            for j in i + 1..members.len() {
                sum += rmse(members[i], members[j]);
                count += 1;
            }
        }
        per_cluster.push(sum / count as f64);
    }
    if per_cluster.is_empty() {
        return Err(Error::Metric("every cluster has fewer than 2 members".into()));
    }
    let s = MeanStd::of(&per_cluster);
    Ok(Diversity {
        mean: s.mean,
        std: s.std,
        skipped_clusters: centers.len() - per_cluster.len(),
    })
}

pub const DIVERSITY_CENTERS: usize = 10;

/// Diversity of `samples` hull samples clustered around ten training images.
pub fn diversity_score<T: Scalar>(
    model: &PersonalizedModel<T>,
    centers: &Dataset,
    samples: usize,
    beta: f64,
    seed: u64,
) -> Result<Diversity> {
    if centers.len() != DIVERSITY_CENTERS {
        return Err(Error::Metric(format!(
            "diversity needs exactly {DIVERSITY_CENTERS} cluster centers, got {}",
            centers.len()
        )));
    }
    let mut rng = seeded(seed, 0xd1, 0);
    let none = AttributeTargets::none(model.basis.attribute_count());
    let images = (0..samples)
        .map(|_| {
            let (w, _) = sample_latent(model, &none, beta, false, &mut rng)?;
            model.generate(&w)
        })
        .collect::<Result<Vec<_>>>()?;
    let centers: Vec<Image> = centers.images().cloned().collect();
    cluster_diversity(&images, &centers)
}
