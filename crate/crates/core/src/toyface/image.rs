use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Resolution {
    pub width: usize,
    pub height: usize,
}

impl Default for Resolution {
    fn default() -> Self {
        Self { width: 32, height: 32 }
    }
}

impl Resolution {
    pub fn pixels(&self) -> usize {
        self.width * self.height
    }
}

/// Single-channel image, row-major, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::Dimension {
                context: "image pixels",
                expected: width * height,
                got: pixels.len(),
            });
        }
        if let Some(&bad) = pixels.iter().find(|p| !(p.is_finite() && (0.0..=1.0).contains(*p))) {
            return Err(Error::Range {
                what: "pixel".into(),
                value: bad,
                min: 0.0,
                max: 1.0,
            });
        }
        Ok(Self { width, height, pixels })
    }

    /// Builds an image from a network output, clamping into `[0, 1]`.
    pub fn from_values<T: Scalar>(res: Resolution, values: &[T]) -> Result<Self> {
        if values.len() != res.pixels() {
            return Err(Error::Dimension {
                context: "image from values",
                expected: res.pixels(),
                got: values.len(),
            });
        }
        let pixels = values.iter().map(|v| v.as_f64().clamp(0.0, 1.0)).collect();
        Self::new(res.width, res.height, pixels)
    }

    pub fn resolution(&self) -> Resolution {
        Resolution {
            width: self.width,
            height: self.height,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn to_values<T: Scalar>(&self) -> Vec<T> {
        self.pixels.iter().map(|&p| T::lit(p)).collect()
    }

    pub fn mirrored(&self) -> Self {
        let mut pixels = Vec::with_capacity(self.pixels.len());
        for row in self.pixels.chunks(self.width) {
            pixels.extend(row.iter().rev());
        }
        Self {
            width: self.width,
            height: self.height,
            pixels,
        }
    }

    pub fn mse(&self, other: &Image) -> f64 {
        mse(&self.pixels, &other.pixels)
    }

    pub fn psnr(&self, other: &Image) -> f64 {
        psnr(&self.pixels, &other.pixels)
    }
}

pub fn mse(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// Peak signal-to-noise ratio for unit-range images, in dB.
pub fn psnr(a: &[f64], b: &[f64]) -> f64 {
    let m = mse(a, b);
    if m == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * m.log10()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_pixels() {
        assert!(Image::new(2, 1, vec![0.0, 1.5]).is_err());
        assert!(Image::new(2, 1, vec![0.0]).is_err());
        assert!(Image::new(2, 1, vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn psnr_of_known_offset() {
        let a = Image::new(2, 2, vec![0.5; 4]).unwrap();
        let b = Image::new(2, 2, vec![0.6; 4]).unwrap();
        assert!((a.psnr(&b) - 20.0).abs() < 1e-9);
        assert!(a.psnr(&a).is_infinite());
    }

    #[test]
    fn mirror_twice_is_identity() {
        let a = Image::new(3, 2, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        assert_eq!(a.mirrored().get(0, 1), 0.6);
        assert_eq!(a.mirrored().mirrored(), a);
    }
}
