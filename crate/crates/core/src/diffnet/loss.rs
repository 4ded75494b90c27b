use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Mean squared error plus a weighted mean squared error between the
/// horizontal and vertical forward-difference fields of the two images.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconLoss {
    pub width: usize,
    pub height: usize,
    pub grad_weight: f64,
}

impl ReconLoss {
    pub fn new(width: usize, height: usize, grad_weight: f64) -> Self {
        Self {
            width,
            height,
            grad_weight,
        }
    }

    /// Loss value and its exact gradient with respect to `a`.
    pub fn eval<T: Scalar>(&self, a: &[T], b: &[T]) -> Result<(T, Vec<T>)> {
        let n = self.width * self.height;
        if a.len() != n || b.len() != n {
            return Err(Error::Dimension {
                context: "reconstruction loss",
                expected: n,
                got: if a.len() != n { a.len() } else { b.len() },
            });
        }
        let inv_n = T::one() / T::lit(n as f64);
        let two = T::lit(2.0);
        let mut value = T::zero();
        let mut grad: Vec<T> = a
            .iter()
            .zip(b)
            .map(|(&x, &y)| {
                let d = x - y;
                value += d * d;
                two * d * inv_n
            })
            .collect();
        value *= inv_n;

        let diff_count = self.height * (self.width - 1) + self.width * (self.height - 1);
        if self.grad_weight != 0.0 && diff_count > 0 {
            let w = T::lit(self.grad_weight);
            let scale = w / T::lit(diff_count as f64);
            let mut acc = T::zero();
            let mut pair = |i: usize, j: usize, grad: &mut [T]| {
                // e = (a_j - a_i) - (b_j - b_i)
                let e = (a[j] - a[i]) - (b[j] - b[i]);
                acc += e * e;
                let g = two * scale * e;
                grad[j] += g;
                grad[i] -= g;
            };
            for y in 0..self.height {
                for x in 0..self.width - 1 {
                    let i = y * self.width + x;
                    pair(i, i + 1, &mut grad);
                }
            }
            for y in 0..self.height - 1 {
                for x in 0..self.width {
                    let i = y * self.width + x;
                    pair(i, i + self.width, &mut grad);
                }
            }
            value += scale * acc;
        }
        Ok((value, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(rng: &mut impl Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random()).collect()
    }

    #[test]
    fn identical_images_have_zero_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = random_image(&mut rng, 20);
        let (v, g) = ReconLoss::new(5, 4, 0.5).eval(&a, &a).unwrap();
        assert_eq!(v, 0.0);
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn constant_offset_only_costs_mse() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = random_image(&mut rng, 20);
        let a: Vec<f64> = b.iter().map(|x| x + 0.25).collect();
        let (v, _) = ReconLoss::new(5, 4, 0.5).eval(&a, &b).unwrap();
        assert!((v - 0.0625).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let loss = ReconLoss::new(6, 5, 0.5);
        let a = random_image(&mut rng, 30);
        let b = random_image(&mut rng, 30);
        let (_, g) = loss.eval(&a, &b).unwrap();
        let h = 1e-4;
        for i in 0..30 {
            let mut ap = a.clone();
            let mut am = a.clone();
            ap[i] += h;
            am[i] -= h;
            let fd = (loss.eval(&ap, &b).unwrap().0 - loss.eval(&am, &b).unwrap().0) / (2.0 * h);
            let rel = (fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-12);
            assert!(rel < 1e-4, "pixel {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(ReconLoss::new(2, 2, 0.5).eval(&[0.0f64; 4], &[0.0; 3]).is_err());
    }
}
