use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Bias-corrected ADAM moments for one named parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    name: String,
    step: u64,
    first_moment: Vec<T>,
    second_moment: Vec<T>,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(name: impl Into<String>, len: usize) -> Self {
        Self {
            name: name.into(),
            step: 0,
            first_moment: vec![T::zero(); len],
            second_moment: vec![T::zero(); len],
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps: T::lit(1e-8),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.first_moment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first_moment.is_empty()
    }

    /// One ADAM update of `params` in place.
    pub fn step(&mut self, params: &mut [T], grads: &[T], lr: T) -> Result<()> {
        if params.len() != self.len() || grads.len() != self.len() {
            return Err(Error::Dimension {
                context: "adam step",
                expected: self.len(),
                got: if params.len() != self.len() {
                    params.len()
                } else {
                    grads.len()
                },
            });
        }
        if !(lr > T::zero()) {
            return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
        }
        if !grads.iter().all(|g| g.is_finite()) {
            return Err(Error::NonFiniteGradient {
                tensor: self.name.clone(),
            });
        }
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let inv_bc1 = T::one() / (T::one() - b1.powi(t));
        let inv_bc2 = T::one() / (T::one() - b2.powi(t));
        let (c1, c2) = (T::one() - b1, T::one() - b2);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first_moment.iter_mut())
            .zip(self.second_moment.iter_mut())
        {
            *m = b1 * *m + c1 * g;
            *v = b2 * *v + c2 * g * g;
            let m_hat = *m * inv_bc1;
            let v_hat = *v * inv_bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}
