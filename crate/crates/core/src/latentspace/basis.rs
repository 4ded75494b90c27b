use serde::{Deserialize, Serialize};

use crate::container::{ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};

use super::organize::{assign_directions, AssignmentCriterion, LossNorm};
use super::pca::{pca, Pca};
use super::AnchorSet;

/// Raw projection interval `[lo, hi]` of one attribute direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Scalar> Bounds<T> {
    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.hi > self.lo)
    }

    /// Raw projection to the unit interval (values outside `[lo, hi]` map
    /// outside `[0, 1]`).
    pub fn normalize(&self, raw: T) -> T {
        (raw - self.lo) / self.width()
    }

    pub fn denormalize(&self, t: T) -> T {
        self.lo + t * self.width()
    }
}

/// How the attribute directions were chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BasisOptions {
    pub norm: LossNorm,
    pub criterion: AssignmentCriterion,
    /// Flip each assigned component so that projections grow with the
    /// attribute level index.
    pub orient: bool,
}

impl BasisOptions {
    pub fn new(norm: LossNorm) -> Self {
        Self {
            norm,
            criterion: AssignmentCriterion::Relative,
            orient: true,
        }
    }
}

/// PCA of the anchors plus the attribute → component assignment and the
/// hypercube of attainable attribute projections.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionBasis<T> {
    pub mean: Vec<T>,
    pub components: Vec<Vec<T>>,
    pub eigenvalues: Vec<T>,
    pub assignment: Vec<usize>,
    pub bounds: Vec<Bounds<T>>,
}

impl<T: Scalar> DirectionBasis<T> {
    /// PCA, assignment and orientation only, without bounds. Used inside
    /// the training loop where a degenerate range is not an error.
    pub fn directions_only(anchors: &AnchorSet<T>, options: BasisOptions) -> Result<Self> {
        let Pca {
            mean,
            mut components,
            eigenvalues,
        } = pca(anchors)?;
        let assignment = assign_directions(anchors, &components, options.norm, options.criterion)?;
        if options.orient {
            for (m, &c) in assignment.iter().enumerate() {
                if level_correlation(anchors, m, &components[c]) < T::zero() {
                    components[c].iter_mut().for_each(|v| *v = -*v);
                }
            }
        }
        Ok(Self {
            mean,
            components,
            eigenvalues,
            assignment,
            bounds: Vec::new(),
        })
    }

    pub fn fit(anchors: &AnchorSet<T>, options: BasisOptions) -> Result<Self> {
        let mut basis = Self::directions_only(anchors, options)?;
        basis.bounds = hypercube_bounds(anchors, &basis)?;
        Ok(basis)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn rank(&self) -> usize {
        self.components.len()
    }

    pub fn attribute_count(&self) -> usize {
        self.assignment.len()
    }

    pub fn direction(&self, m: usize) -> &[T] {
        &self.components[self.assignment[m]]
    }

    pub fn directions(&self) -> Vec<&[T]> {
        (0..self.attribute_count()).map(|m| self.direction(m)).collect()
    }

    /// `(w − μ)·d_m`.
    pub fn raw_projection(&self, w: &[T], m: usize) -> T {
        centered_dot(w, &self.mean, self.direction(m))
    }

    /// Normalized hypercube coordinate of `w` along attribute `m`.
    pub fn coordinate(&self, w: &[T], m: usize) -> T {
        self.bounds[m].normalize(self.raw_projection(w, m))
    }

    pub fn coordinates(&self, w: &[T]) -> Vec<T> {
        (0..self.attribute_count()).map(|m| self.coordinate(w, m)).collect()
    }

    /// All PCA coordinates `Vᵀ(w − μ)`.
    pub fn pca_coordinates(&self, w: &[T]) -> Vec<T> {
        self.components.iter().map(|v| centered_dot(w, &self.mean, v)).collect()
    }

    pub fn normalize(&self, m: usize, raw: T) -> T {
        self.bounds[m].normalize(raw)
    }

    pub fn denormalize(&self, m: usize, t: T) -> T {
        self.bounds[m].denormalize(t)
    }

    pub fn check_attribute(&self, m: usize) -> Result<()> {
        if m >= self.attribute_count() {
            return Err(Error::UnknownAttribute(format!("#{m}")));
        }
        Ok(())
    }

    pub fn encode(&self, w: &mut ByteWriter) {
        w.u32(self.dim() as u32);
        w.u32(self.rank() as u32);
        w.u32(self.attribute_count() as u32);
        w.f64s(self.mean.iter().map(|v| v.as_f64()));
        for c in &self.components {
            w.f64s(c.iter().map(|v| v.as_f64()));
        }
        w.f64s(self.eigenvalues.iter().map(|v| v.as_f64()));
        for &a in &self.assignment {
            w.u32(a as u32);
        }
        for b in &self.bounds {
            w.f64(b.lo.as_f64());
            w.f64(b.hi.as_f64());
        }
    }

    pub fn decode(r: &mut ByteReader<'_>) -> Result<Self> {
        let d = r.u32()? as usize;
        let rank = r.u32()? as usize;
        let m = r.u32()? as usize;
        let lift = |v: Vec<f64>| v.into_iter().map(T::lit).collect::<Vec<T>>();
        let mean = lift(r.f64s(d)?);
        let components = (0..rank).map(|_| r.f64s(d).map(lift)).collect::<Result<Vec<_>>>()?;
        let eigenvalues = lift(r.f64s(rank)?);
        let assignment = (0..m)
            .map(|_| r.u32().map(|v| v as usize))
            .collect::<Result<Vec<_>>>()?;
        if assignment.iter().any(|&a| a >= rank) {
            return Err(Error::Format("basis assignment exceeds rank".into()));
        }
        let bounds = (0..m)
            .map(|_| {
                Ok(Bounds {
                    lo: T::lit(r.f64()?),
                    hi: T::lit(r.f64()?),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            mean,
            components,
            eigenvalues,
            assignment,
            bounds,
        })
    }
}

fn centered_dot<T: Scalar>(w: &[T], mean: &[T], d: &[T]) -> T {
    dot(w, d) - dot(mean, d)
}

/// Covariance between level index and projection along `direction`.
fn level_correlation<T: Scalar>(anchors: &AnchorSet<T>, m: usize, direction: &[T]) -> T {
    let n = T::lit(anchors.len() as f64);
    let levels: Vec<T> = (0..anchors.len()).map(|k| T::lit(anchors.level(k, m) as f64)).collect();
    let proj: Vec<T> = anchors.iter().map(|w| dot(w, direction)).collect();
    let ml = levels.iter().fold(T::zero(), |s, &v| s + v) / n;
    let mp = proj.iter().fold(T::zero(), |s, &v| s + v) / n;
    levels
        .iter()
        .zip(&proj)
        .fold(T::zero(), |s, (&l, &p)| s + (l - ml) * (p - mp))
}

/// Per-attribute min/max over anchors of `(w − μ)·d_m`.
pub fn hypercube_bounds<T: Scalar>(anchors: &AnchorSet<T>, basis: &DirectionBasis<T>) -> Result<Vec<Bounds<T>>> {
    (0..basis.attribute_count())
        .map(|m| {
            let (lo, hi) = anchors
                .iter()
                .map(|w| basis.raw_projection(w, m))
                .fold((T::infinity(), T::neg_infinity()), |(lo, hi), p| (lo.min(p), hi.max(p)));
            let b = Bounds { lo, hi };
            if b.is_degenerate() {
                Err(Error::DegenerateRange(anchors.schema().attributes[m].name.clone()))
            } else {
                Ok(b)
            }
        })
        .collect()
}
