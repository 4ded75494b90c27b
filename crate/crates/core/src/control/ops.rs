use rand::Rng;
use serde::{Deserialize, Serialize};

use super::barycentric::{hull_membership, sample_alpha, Barycentric, HullCheck};
use super::degradation::Degradation;
use crate::diffnet::{AdamState, Mlp, ReconLoss};
use crate::error::{Error, Result};
use crate::latentspace::{AttributeSchema, LossNorm};
use crate::personalize::{generate_with, PersonalizedModel};
use crate::scalar::{axpy, dot, Scalar};
use crate::toyface::Image;

/// Optional normalized target per attribute, in schema order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AttributeTargets(pub Vec<Option<f64>>);

impl AttributeTargets {
    pub fn none(attributes: usize) -> Self {
        Self(vec![None; attributes])
    }

    pub fn with(mut self, m: usize, value: f64) -> Self {
        self.0[m] = Some(value);
        self
    }

    /// Builds targets from `(attribute name, value)` pairs.
    pub fn from_named<'a>(schema: &AttributeSchema, pairs: impl IntoIterator<Item = (&'a str, f64)>) -> Result<Self> {
        let mut t = Self::none(schema.len());
        for (name, v) in pairs {
            t.0[schema.index_of(name)?] = Some(v);
        }
        Ok(t)
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(Option::is_none)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.0.iter().enumerate().filter_map(|(m, t)| t.map(|v| (m, v)))
    }

    pub fn validate(&self, attributes: usize) -> Result<()> {
        if self.0.len() != attributes {
            return Err(Error::Dimension {
                context: "attribute targets",
                expected: attributes,
                got: self.0.len(),
            });
        }
        for (m, v) in self.iter() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Range {
                    what: format!("target for attribute #{m}"),
                    value: v,
                    min: 0.0,
                    max: 1.0,
                });
            }
        }
        Ok(())
    }

    pub fn clamped(&self) -> Self {
        Self(
            self.0
                .iter()
                .map(|t| t.map(|v| if v.is_nan() { 0.5 } else { v.clamp(0.0, 1.0) }))
                .collect(),
        )
    }
}

fn check_ranges<T: Scalar>(model: &PersonalizedModel<T>) -> Result<()> {
    for (m, b) in model.basis.bounds.iter().enumerate() {
        if b.is_degenerate() {
            return Err(Error::DegenerateRange(model.schema().attributes[m].name.clone()));
        }
    }
    Ok(())
}

/// Moves `latent` along `d_m` so its normalized coordinate becomes `value`.
fn set_coordinate<T: Scalar>(model: &PersonalizedModel<T>, latent: &mut [T], m: usize, value: T) {
    let basis = &model.basis;
    let delta = basis.denormalize(m, value) - basis.raw_projection(latent, m);
    axpy(delta, basis.direction(m), latent);
}

#[derive(Debug, Clone)]
pub struct Synthesis<T> {
    pub image: Image,
    pub latent: Vec<T>,
    pub alpha: Barycentric<T>,
    /// Membership of the final latent in the dilated hull.
    pub hull: HullCheck,
}

/// Samples a hull latent and overwrites the targeted attribute coordinates.
/// With `strict_hull`, out-of-range targets are clamped to the hypercube
/// instead of rejected.
pub fn synthesize<T: Scalar>(
    model: &PersonalizedModel<T>,
    targets: &AttributeTargets,
    beta: f64,
    strict_hull: bool,
    rng: &mut impl Rng,
) -> Result<Synthesis<T>> {
    let (latent, alpha) = sample_latent(model, targets, beta, strict_hull, rng)?;
    let hull = hull_membership(&model.anchors, beta, &latent)?;
    Ok(Synthesis {
        image: model.generate(&latent)?,
        latent,
        alpha,
        hull,
    })
}

/// The latent part of [`synthesize`], without rendering or the hull check.
pub fn sample_latent<T: Scalar>(
    model: &PersonalizedModel<T>,
    targets: &AttributeTargets,
    beta: f64,
    strict_hull: bool,
    rng: &mut impl Rng,
) -> Result<(Vec<T>, Barycentric<T>)> {
    let targets = if strict_hull {
        targets.clamped()
    } else {
        targets.clone()
    };
    targets.validate(model.basis.attribute_count())?;
    check_ranges(model)?;
    let alpha = sample_alpha::<T>(model.anchors.len(), beta, rng)?;
    let mut latent = model.anchors.combine(&alpha.alpha)?;
    for (m, v) in targets.iter() {
        set_coordinate(model, &mut latent, m, T::lit(v));
    }
    Ok((latent, alpha))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edited<T> {
    pub latent: Vec<T>,
    /// The requested value lies outside `[0, 1]`.
    pub extrapolated: bool,
}

/// Sets attribute `m` of `latent` to the normalized `value`, leaving every
/// other PCA coordinate unchanged.
pub fn edit<T: Scalar>(
    model: &PersonalizedModel<T>,
    latent: &[T],
    m: usize,
    value: f64,
    allow_extrapolation: bool,
) -> Result<Edited<T>> {
    model.basis.check_attribute(m)?;
    if latent.len() != model.latent_dim() {
        return Err(Error::Dimension {
            context: "latent",
            expected: model.latent_dim(),
            got: latent.len(),
        });
    }
    if model.basis.bounds[m].is_degenerate() {
        return Err(Error::DegenerateRange(model.schema().attributes[m].name.clone()));
    }
    let extrapolated = !(0.0..=1.0).contains(&value);
    if !value.is_finite() || (extrapolated && !allow_extrapolation) {
        return Err(Error::Range {
            what: format!("edit value for `{}`", model.schema().attributes[m].name),
            value,
            min: 0.0,
            max: 1.0,
        });
    }
    let mut out = latent.to_vec();
    set_coordinate(model, &mut out, m, T::lit(value));
    Ok(Edited {
        latent: out,
        extrapolated,
    })
}

/// Where the α-space optimization starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStart {
    /// Equal weight on every anchor.
    #[default]
    Uniform,
    /// Nine tenths of the weight on the anchor whose degraded rendering
    /// has the lowest reconstruction loss. Avoids basins far from the
    /// observation when the hull is wide.
    BestAnchor,
}

/// Settings of the α-space optimizations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveConfig {
    pub iters: usize,
    pub start: SolveStart,
    pub learning_rate: f64,
    pub beta: f64,
    /// Weight of the attribute penalty.
    pub lambda: f64,
    pub grad_weight: f64,
    pub norm: LossNorm,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            iters: 400,
            start: SolveStart::Uniform,
            learning_rate: 0.05,
            beta: super::DEFAULT_BETA,
            lambda: 1.0,
            grad_weight: 0.5,
            norm: LossNorm::L1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Solved<T> {
    pub alpha: Barycentric<T>,
    pub latent: Vec<T>,
    pub image: Image,
    /// Objective of the returned (best) iterate.
    pub loss: f64,
    /// Objective at each iteration, before the update.
    pub trace: Vec<f64>,
}

fn alpha_from_z<T: Scalar>(z: &[T], beta: T) -> (Vec<T>, Barycentric<T>) {
    let max = z.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    let e: Vec<T> = z.iter().map(|&v| (v - max).exp()).collect();
    let total = e.iter().fold(T::zero(), |s, &v| s + v);
    let s: Vec<T> = e.iter().map(|&v| v / total).collect();
    let b = Barycentric::dilate(&s, beta);
    (s, b)
}

/// Minimizes `recon(Q(G(Wα)), I) + λ Σ_m ‖(Wα − μ)·d_m − denorm(a_m)‖`
/// over `α = (1 + Nβ)·softmax(z) − β`, returning the best iterate. The
/// logits start at zero or at the best anchor, per [`SolveConfig::start`].
pub fn enhance_with<T: Scalar>(
    model: &PersonalizedModel<T>,
    generator: &Mlp<T>,
    degraded: &Image,
    q: &Degradation,
    targets: &AttributeTargets,
    config: &SolveConfig,
) -> Result<Solved<T>> {
    let res = model.resolution();
    q.validate(res)?;
    let out_res = q.output_resolution(res);
    if degraded.resolution() != out_res {
        return Err(Error::Dimension {
            context: "degraded image",
            expected: out_res.pixels(),
            got: degraded.pixels.len(),
        });
    }
    targets.validate(model.basis.attribute_count())?;
    if !targets.is_empty() && config.lambda > 0.0 {
        check_ranges(model)?;
    }
    let goal: Vec<T> = match q {
        Degradation::Mask { .. } => q.apply(out_res, &degraded.to_values::<T>()),
        _ => degraded.to_values(),
    };
    let loss = ReconLoss::new(out_res.width, out_res.height, config.grad_weight);
    let n = model.anchors.len();
    let beta = T::lit(config.beta);
    let scale = T::one() + T::lit(n as f64) * beta;
    let lambda = T::lit(config.lambda);
    let penalized: Vec<(usize, T)> = if config.lambda > 0.0 {
        targets
            .iter()
            .map(|(m, v)| (m, model.basis.denormalize(m, T::lit(v))))
            .collect()
    } else {
        Vec::new()
    };

    let mut z = vec![T::zero(); n];
    if config.start == SolveStart::BestAnchor && n > 1 {
        let mut pick = (f64::INFINITY, 0);
        for (k, a) in model.anchors.iter().enumerate() {
            let (v, _) = loss.eval(&q.apply(res, &generator.forward(a)?), &goal)?;
            if v.as_f64() < pick.0 {
                pick = (v.as_f64(), k);
            }
        }
        z[pick.1] = T::lit((9.0 * (n - 1) as f64).ln());
    }
    let mut adam = AdamState::new("alpha logits", n);
    let lr = T::lit(config.learning_rate);
    let mut trace = Vec::with_capacity(config.iters);
    let mut best: Option<(f64, Vec<T>)> = None;
    let evaluate = |z: &[T]| -> Result<(f64, Vec<T>)> {
        let (s, alpha) = alpha_from_z(z, beta);
        let w = model.anchors.combine(&alpha.alpha)?;
        let t = generator.forward_trace(&w)?;
        let (mut value, g_out) = loss.eval(&q.apply(res, t.output()), &goal)?;
        let g_img = q.adjoint(res, &g_out);
        let mut g_w = generator.input_gradient(&t, &g_img)?;
        for &(m, target) in &penalized {
            let r = model.basis.raw_projection(&w, m) - target;
            value += lambda * config.norm.value(r);
            axpy(lambda * config.norm.derivative(r), model.basis.direction(m), &mut g_w);
        }
        if !value.is_finite() {
            return Err(Error::NonFiniteLoss { epoch: 0, anchor: 0 });
        }
        // chain through W and the dilated softmax
        let g_alpha: Vec<T> = model.anchors.iter().map(|a| dot(a, &g_w)).collect();
        let mean = dot(&s, &g_alpha);
        let g_z = s
            .iter()
            .zip(&g_alpha)
            .map(|(&si, &gi)| scale * si * (gi - mean))
            .collect();
        Ok((value.as_f64(), g_z))
    };
    for _ in 0..config.iters {
        let (value, g_z) = evaluate(&z)?;
        trace.push(value);
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, z.clone()));
        }
        adam.step(&mut z, &g_z, lr)?;
    }
    let (final_value, _) = evaluate(&z)?;
    if best.as_ref().is_none_or(|(b, _)| final_value < *b) {
        best = Some((final_value, z.clone()));
    }
    let (loss_value, z_best) = best.expect("at least one evaluation");
    let (_, alpha) = alpha_from_z(&z_best, beta);
    let latent = model.anchors.combine(&alpha.alpha)?;
    Ok(Solved {
        image: generate_with(generator, res, &latent)?,
        alpha,
        latent,
        loss: loss_value,
        trace,
    })
}

/// Attribute-constrained enhancement with the model's own generator.
pub fn enhance<T: Scalar>(
    model: &PersonalizedModel<T>,
    degraded: &Image,
    q: &Degradation,
    targets: &AttributeTargets,
    config: &SolveConfig,
) -> Result<Solved<T>> {
    enhance_with(model, &model.generator, degraded, q, targets, config)
}

/// Projects an image into the dilated anchor hull: enhancement with the
/// identity degradation and no attribute targets.
pub fn invert<T: Scalar>(model: &PersonalizedModel<T>, image: &Image, config: &SolveConfig) -> Result<Solved<T>> {
    enhance(
        model,
        image,
        &Degradation::Identity,
        &AttributeTargets::none(model.basis.attribute_count()),
        config,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PivotConfig {
    pub iters: usize,
    pub learning_rate: f64,
    pub grad_weight: f64,
}

impl Default for PivotConfig {
    fn default() -> Self {
        Self {
            iters: 100,
            learning_rate: 5e-4,
            grad_weight: 0.5,
        }
    }
}

/// Fine-tunes a copy of `generator` so that `G'(latent)` matches `image`.
/// Returns the best iterate; the input generator is untouched.
pub fn pivotal_tune<T: Scalar>(
    generator: &Mlp<T>,
    latent: &[T],
    image: &Image,
    config: &PivotConfig,
) -> Result<Mlp<T>> {
    let res = image.resolution();
    if generator.output_dim() != res.pixels() {
        return Err(Error::Dimension {
            context: "pivot image",
            expected: generator.output_dim(),
            got: res.pixels(),
        });
    }
    let target = image.to_values::<T>();
    let loss = ReconLoss::new(res.width, res.height, config.grad_weight);
    let mut tuned = generator.clone();
    let mut best = (f64::INFINITY, tuned.clone());
    let mut adam = AdamState::new("pivot generator", tuned.num_params());
    let lr = T::lit(config.learning_rate);
    let mut grads = vec![T::zero(); tuned.num_params()];
    for step in 0..=config.iters {
        let t = tuned.forward_trace(latent)?;
        let (value, g) = loss.eval(t.output(), &target)?;
        let v = value.as_f64();
        if !v.is_finite() {
            return Err(Error::NonFiniteLoss { epoch: step, anchor: 0 });
        }
        if v < best.0 {
            best = (v, tuned.clone());
        }
        if step == config.iters {
            break;
        }
        grads.iter_mut().for_each(|x| *x = T::zero());
        tuned.accumulate_param_grads(&t, &g, &mut grads)?;
        adam.step(tuned.params_mut(), &grads, lr)?;
    }
    Ok(best.1)
}
