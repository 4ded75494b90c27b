use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::toyface::Resolution;

/// Known corruption `Q` applied to generator output during enhancement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Degradation {
    Identity,
    /// Keeps pixels where `keep` is true and zeroes the rest.
    Mask {
        width: usize,
        height: usize,
        keep: Vec<bool>,
    },
    /// Box average over `factor × factor` blocks.
    Downsample {
        factor: usize,
    },
}

impl Degradation {
    pub fn mask(res: Resolution, keep: Vec<bool>) -> Result<Self> {
        let q = Degradation::Mask {
            width: res.width,
            height: res.height,
            keep,
        };
        q.validate(res)?;
        Ok(q)
    }

    /// Checks the operator against the resolution it will be applied to.
    pub fn validate(&self, res: Resolution) -> Result<()> {
        match self {
            Degradation::Identity => Ok(()),
            Degradation::Mask { width, height, keep } => {
                if (*width, *height) != (res.width, res.height) || keep.len() != res.pixels() {
                    return Err(Error::Degradation(format!(
                        "mask is {width}x{height} with {} entries, image is {}x{}",
                        keep.len(),
                        res.width,
                        res.height
                    )));
                }
                Ok(())
            }
            Degradation::Downsample { factor } => {
                if *factor == 0 || !res.width.is_multiple_of(*factor) || !res.height.is_multiple_of(*factor) {
                    return Err(Error::Degradation(format!(
                        "downsample factor {factor} does not divide {}x{}",
                        res.width, res.height
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn output_resolution(&self, res: Resolution) -> Resolution {
        match self {
            Degradation::Downsample { factor } => Resolution {
                width: res.width / factor,
                height: res.height / factor,
            },
            _ => res,
        }
    }

    pub fn apply<T: Scalar>(&self, res: Resolution, x: &[T]) -> Vec<T> {
        match self {
            Degradation::Identity => x.to_vec(),
            Degradation::Mask { keep, .. } => x
                .iter()
                .zip(keep)
                .map(|(&v, &k)| if k { v } else { T::zero() })
                .collect(),
            Degradation::Downsample { factor } => {
                let k = *factor;
                let out = self.output_resolution(res);
                let inv = T::one() / T::lit((k * k) as f64);
                let mut y = vec![T::zero(); out.pixels()];
                for r in 0..res.height {
                    for c in 0..res.width {
                        y[(r / k) * out.width + c / k] += x[r * res.width + c] * inv;
                    }
                }
                y
            }
        }
    }

    /// Transpose of [`Self::apply`], mapping an output-space gradient back.
    pub fn adjoint<T: Scalar>(&self, res: Resolution, g: &[T]) -> Vec<T> {
        match self {
            Degradation::Identity | Degradation::Mask { .. } => self.apply(res, g),
            Degradation::Downsample { factor } => {
                let k = *factor;
                let out = self.output_resolution(res);
                let inv = T::one() / T::lit((k * k) as f64);
                let mut x = vec![T::zero(); res.pixels()];
                for r in 0..res.height {
                    for c in 0..res.width {
                        x[r * res.width + c] = g[(r / k) * out.width + c / k] * inv;
                    }
                }
                x
            }
        }
    }

    pub fn keep_fraction(&self) -> f64 {
        match self {
            Degradation::Mask { keep, .. } => keep.iter().filter(|&&k| k).count() as f64 / keep.len().max(1) as f64,
            _ => 1.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn res4() -> Resolution {
        Resolution { width: 4, height: 4 }
    }

    #[test]
    fn downsample_averages_blocks() {
        let x: Vec<f64> = (0..16).map(|v| v as f64).collect();
        let q = Degradation::Downsample { factor: 2 };
        assert_eq!(q.apply(res4(), &x), vec![2.5, 4.5, 10.5, 12.5]);
        assert!(Degradation::Downsample { factor: 3 }.validate(res4()).is_err());
    }

    #[test]
    fn adjoint_satisfies_inner_product_identity() {
        let x: Vec<f64> = (0..16).map(|v| (v as f64 * 0.37).sin()).collect();
        let y = vec![0.3, -1.0, 2.0, 0.5];
        let q = Degradation::Downsample { factor: 2 };
        let lhs: f64 = q.apply(res4(), &x).iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(q.adjoint(res4(), &y)).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn mask_zeroes_hidden_pixels() {
        let keep: Vec<bool> = (0..16).map(|i| i % 3 != 0).collect();
        let q = Degradation::mask(res4(), keep.clone()).unwrap();
        let y = q.apply(res4(), &[1.0; 16]);
        assert!(y.iter().zip(&keep).all(|(&v, &k)| v == if k { 1.0 } else { 0.0 }));
        assert!(Degradation::mask(res4(), vec![true; 15]).is_err());
    }

    #[test]
    fn serde_shape() {
        let q: Degradation = serde_json::from_str(r#"{"kind":"downsample","factor":4}"#).unwrap();
        assert_eq!(q, Degradation::Downsample { factor: 4 });
        let q: Degradation = serde_json::from_str(r#"{"kind":"identity"}"#).unwrap();
        assert_eq!(q, Degradation::Identity);
    }
}
