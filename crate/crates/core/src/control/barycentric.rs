use microlp::{ComparisonOp, OptimizationDirection, Problem};
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latentspace::AnchorSet;
use crate::scalar::Scalar;

pub const DEFAULT_BETA: f64 = 0.05;
const INVARIANT_TOLERANCE: f64 = 1e-9;

/// Affine weights over the anchors, allowed to dip to `-beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Barycentric<T> {
    pub alpha: Vec<T>,
    pub beta: T,
}

impl<T: Scalar> Barycentric<T> {
    /// Maps a point `u` of the plain simplex onto the dilated simplex.
    pub fn dilate(u: &[T], beta: T) -> Self {
        let n = T::lit(u.len() as f64);
        let scale = T::one() + n * beta;
        Self {
            alpha: u.iter().map(|&v| scale * v - beta).collect(),
            beta,
        }
    }

    /// Uniform weights `1/n`.
    pub fn uniform(n: usize, beta: T) -> Self {
        let v = T::one() / T::lit(n as f64);
        Self {
            alpha: vec![v; n],
            beta,
        }
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn sum(&self) -> T {
        self.alpha.iter().fold(T::zero(), |s, &a| s + a)
    }

    pub fn min(&self) -> T {
        self.alpha.iter().fold(T::infinity(), |m, &a| m.min(a))
    }

    pub fn satisfies_invariants(&self) -> bool {
        let tol = T::lit(INVARIANT_TOLERANCE);
        !self.alpha.is_empty()
            && self.beta >= T::zero()
            && (self.sum() - T::one()).abs() <= tol
            && self.min() >= -self.beta - tol
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::Range {
            what: "beta".into(),
            value: beta,
            min: 0.0,
            max: f64::INFINITY,
        });
    }
    Ok(())
}

/// Draws `u ~ Dirichlet(1, …, 1)` and dilates it by `beta`.
pub fn sample_alpha<T: Scalar>(n: usize, beta: f64, rng: &mut impl Rng) -> Result<Barycentric<T>> {
    check_beta(beta)?;
    if n == 0 {
        return Err(Error::TooFewAnchors { needed: 1, got: 0 });
    }
    let e: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = e.iter().sum();
    let u: Vec<T> = e.iter().map(|&v| T::lit(v / total)).collect();
    let mut b = Barycentric::dilate(&u, T::lit(beta));
    // fold the rounding error of the sum into the largest weight
    let drift = b.sum() - T::one();
    if let Some(i) = (0..n).max_by(|&i, &j| b.alpha[i].as_f64().total_cmp(&b.alpha[j].as_f64())) {
        b.alpha[i] -= drift;
    }
    Ok(b)
}

/// Result of testing whether a latent lies in the dilated anchor hull.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HullCheck {
    pub inside: bool,
    /// Smallest L1 distance between the latent and any dilated-hull point.
    pub residual: f64,
}

/// Solves `min ‖Wα − w‖₁` subject to `Σα = 1`, `α ≥ −β`.
pub fn hull_membership<T: Scalar>(anchors: &AnchorSet<T>, beta: f64, latent: &[T]) -> Result<HullCheck> {
    check_beta(beta)?;
    if latent.len() != anchors.dim() {
        return Err(Error::Dimension {
            context: "latent",
            expected: anchors.dim(),
            got: latent.len(),
        });
    }
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let alpha: Vec<_> = (0..anchors.len())
        .map(|_| lp.add_var(0.0, (-beta, f64::INFINITY)))
        .collect();
    lp.add_constraint(
        alpha.iter().map(|&a| (a, 1.0)).collect::<Vec<_>>().as_slice(),
        ComparisonOp::Eq,
        1.0,
    );
    for (j, &target) in latent.iter().enumerate() {
        let over = lp.add_var(1.0, (0.0, f64::INFINITY));
        let under = lp.add_var(1.0, (0.0, f64::INFINITY));
        let mut row: Vec<_> = alpha
            .iter()
            .enumerate()
            .map(|(n, &a)| (a, anchors.anchor(n)[j].as_f64()))
            .collect();
        row.push((over, -1.0));
        row.push((under, 1.0));
        lp.add_constraint(row.as_slice(), ComparisonOp::Eq, target.as_f64());
    }
    let solution = lp.solve().map_err(|e| Error::Lp(e.to_string()))?;
    let residual = solution.objective().max(0.0);
    Ok(HullCheck {
        inside: residual <= 1e-7 * (1.0 + latent.iter().map(|v| v.as_f64().abs()).sum::<f64>()),
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latentspace::{Attribute, AttributeSchema, QuantizedLabel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dilation_of_a_vertex() {
        let b = Barycentric::<f64>::dilate(&[1.0, 0.0, 0.0], 0.05);
        assert!((b.alpha[0] - 1.10).abs() < 1e-15);
        assert!((b.alpha[1] + 0.05).abs() < 1e-15 && (b.alpha[2] + 0.05).abs() < 1e-15);
        assert!((b.sum() - 1.0).abs() < 1e-15);
        assert!(b.satisfies_invariants());
    }

    #[test]
    fn zero_beta_stays_on_simplex() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let b = sample_alpha::<f64>(7, 0.0, &mut rng).unwrap();
            assert!(b.alpha.iter().all(|&a| a >= 0.0));
            assert!(b.satisfies_invariants());
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(sample_alpha::<f64>(3, -0.1, &mut rng).is_err());
        assert!(sample_alpha::<f64>(0, 0.1, &mut rng).is_err());
    }

    fn square() -> AnchorSet<f64> {
        let schema = AttributeSchema::new(vec![Attribute::discrete("a", vec![0.0, 1.0])]).unwrap();
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        let labels = [0, 1, 0, 1].iter().map(|&l| QuantizedLabel(vec![l])).collect();
        AnchorSet::new(pts, labels, schema).unwrap()
    }

    #[test]
    fn hull_membership_square() {
        let s = square();
        assert!(hull_membership(&s, 0.0, &[0.5, 0.5]).unwrap().inside);
        assert!(hull_membership(&s, 0.0, &[1.0, 1.0]).unwrap().inside);
        let out = hull_membership(&s, 0.0, &[1.5, 0.5]).unwrap();
        assert!(!out.inside);
        assert!((out.residual - 0.5).abs() < 1e-9);
        // dilation by 0.25 reaches out to 1.5 along x
        assert!(hull_membership(&s, 0.25, &[1.5, 0.5]).unwrap().inside);
    }
}
