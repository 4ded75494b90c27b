//! Small deterministic fixtures shared by unit tests.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::diffnet::{Activation, Mlp};
use crate::latentspace::{
    AnchorSet, Attribute, AttributeSchema, BasisOptions, DirectionBasis, LossNorm, QuantizedLabel,
};
use crate::personalize::{PersonalizedModel, Provenance, TrainConfig};

/// 18 anchors in 4-d: attribute `a` (3 levels) along x, `b` (2 levels)
/// along z, with small jitter on every axis.
pub(crate) fn anchors() -> AnchorSet<f64> {
    let schema = AttributeSchema::new(vec![
        Attribute::discrete("a", vec![0.0, 1.0, 2.0]),
        Attribute::discrete("b", vec![0.0, 1.0]),
    ])
    .unwrap();
    let jitter = [0.3, -0.2, 0.1, -0.4, 0.25, 0.0, -0.1, 0.15, -0.3];
    let (mut points, mut labels) = (Vec::new(), Vec::new());
    for i in 0..18 {
        let (a, b) = (i % 3, (i / 3) % 2);
        let j = |k: usize| jitter[(i + k) % jitter.len()] * 0.2;
        points.push(vec![
            1.5 * a as f64 + j(0),
            j(1) * 2.0,
            0.8 * b as f64 + j(2),
            j(3) * 3.0,
        ]);
        labels.push(QuantizedLabel(vec![a, b]));
    }
    AnchorSet::new(points, labels, schema).unwrap()
}

/// A 4×4-pixel model with a random generator over [`anchors`].
pub(crate) fn model() -> PersonalizedModel<f64> {
    let anchors = anchors();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let generator = Mlp::random(&[4, 12, 16], Activation::Tanh, Activation::Logistic, &mut rng).unwrap();
    let basis = DirectionBasis::fit(&anchors, BasisOptions::new(LossNorm::L1)).unwrap();
    let provenance = Provenance {
        config_hash: String::new(),
        pretrained_hash: String::new(),
        individual_seed: 0,
        rng_seed: 0,
        anchor_count: anchors.len(),
    };
    PersonalizedModel::new(generator, anchors, basis, TrainConfig::default(), provenance).unwrap()
}
