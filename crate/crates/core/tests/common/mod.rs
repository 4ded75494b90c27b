//! Fixtures shared by the integration tests.
#![allow(dead_code)]

pub mod oracles;

use latorg::diffnet::{Activation, Mlp};
use latorg::latentspace::{
    AnchorSet, Attribute, AttributeSchema, BasisOptions, DirectionBasis, LossNorm, QuantizedLabel,
};
use latorg::personalize::{PersonalizedModel, Provenance, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn two_attribute_schema() -> AttributeSchema {
    AttributeSchema::new(vec![
        Attribute::discrete("a", vec![0.0, 1.0, 2.0]),
        Attribute::discrete("b", vec![0.0, 1.0]),
    ])
    .unwrap()
}

/// `n` anchors in `dim` dimensions with uniform coordinates in `[-1, 1]`
/// and random labels over [`two_attribute_schema`].
pub fn random_anchors(n: usize, dim: usize, rng: &mut impl Rng) -> AnchorSet<f64> {
    let points = (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let labels = (0..n)
        .map(|_| QuantizedLabel(vec![rng.random_range(0..3), rng.random_range(0..2)]))
        .collect();
    AnchorSet::new(points, labels, two_attribute_schema()).unwrap()
}

/// Anchors whose attribute levels vary along distinct axes, with jitter.
pub fn structured_anchors(n: usize, dim: usize, jitter: f64, rng: &mut impl Rng) -> AnchorSet<f64> {
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = (i % 3, (i / 3) % 2);
        let mut p: Vec<f64> = (0..dim).map(|_| jitter * rng.random_range(-1.0..1.0)).collect();
        p[0] += 1.5 * a as f64;
        p[2] += 0.8 * b as f64;
        points.push(p);
        labels.push(QuantizedLabel(vec![a, b]));
    }
    AnchorSet::new(points, labels, two_attribute_schema()).unwrap()
}

/// A small model (4×4 pixels) with a random generator over `anchors`.
pub fn model_over(anchors: AnchorSet<f64>, seed: u64) -> PersonalizedModel<f64> {
    let generator = Mlp::random(
        &[anchors.dim(), 12, 16],
        Activation::Tanh,
        Activation::Logistic,
        &mut rng(seed),
    )
    .unwrap();
    let basis = DirectionBasis::fit(&anchors, BasisOptions::new(LossNorm::L1)).unwrap();
    let provenance = Provenance {
        config_hash: String::new(),
        pretrained_hash: String::new(),
        individual_seed: 0,
        rng_seed: seed,
        anchor_count: anchors.len(),
    };
    PersonalizedModel::new(generator, anchors, basis, TrainConfig::default(), provenance).unwrap()
}

pub fn fixture_model(seed: u64) -> PersonalizedModel<f64> {
    model_over(structured_anchors(18, 5, 0.2, &mut rng(seed)), seed)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `|a - b|` scaled by the larger magnitude, with an absolute floor so
/// entries that are zero on both sides compare equal.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Central difference of `f` at `x` along every coordinate.
pub fn central_differences(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}
