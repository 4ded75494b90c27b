use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::AnchorSet;

/// Principal axes of an anchor cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca<T> {
    pub mean: Vec<T>,
    /// Unit principal directions, by descending eigenvalue.
    pub components: Vec<Vec<T>>,
    pub eigenvalues: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcaRefresh {
    #[default]
    Epoch,
    Step,
}

/// Eigen-decomposition of a symmetric `n × n` row-major matrix by cyclic
/// Jacobi rotations. Returns eigenvalues and eigenvectors (as columns of the
/// returned row-major matrix), unsorted.
pub fn symmetric_eigen<T: Scalar>(matrix: &[T], n: usize) -> (Vec<T>, Vec<T>) {
    let mut a = matrix.to_vec();
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }
    let scale = a.iter().fold(T::zero(), |s, x| s + *x * *x).sqrt();
    if scale == T::zero() {
        return (vec![T::zero(); n], v);
    }
    let tol = T::epsilon() * scale;
    for _sweep in 0..100 {
        let mut off = T::zero();
        for p in 0..n {
            for q in p + 1..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() <= T::min_positive_value() {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i * n + i]).collect(), v)
}

/// Flips `v` so its largest-magnitude entry (first on ties) is positive.
pub(crate) fn canonical_sign<T: Scalar>(v: &mut [T]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < T::zero() {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// PCA of the anchors with `1/(N−1)` covariance normalization; keeps
/// `min(d, N−1)` components.
pub fn pca<T: Scalar>(anchors: &AnchorSet<T>) -> Result<Pca<T>> {
    let n = anchors.len();
    if n < 2 {
        return Err(Error::TooFewAnchors { needed: 2, got: n });
    }
    let d = anchors.dim();
    let inv_n = T::one() / T::lit(n as f64);
    let mut mean = vec![T::zero(); d];
    for row in anchors.iter() {
        crate::scalar::axpy(inv_n, row, &mut mean);
    }
    let mut cov = vec![T::zero(); d * d];
    let mut centred = vec![T::zero(); d];
    for row in anchors.iter() {
        for ((c, &x), &mu) in centred.iter_mut().zip(row).zip(&mean) {
            *c = x - mu;
        }
        for i in 0..d {
            for j in i..d {
                cov[i * d + j] += centred[i] * centred[j];
            }
        }
    }
    let inv = T::one() / T::lit((n - 1) as f64);
    for i in 0..d {
        for j in i..d {
            let v = cov[i * d + j] * inv;
            cov[i * d + j] = v;
            cov[j * d + i] = v;
        }
    }
    let (values, vectors) = symmetric_eigen(&cov, d);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| values[b].as_f64().total_cmp(&values[a].as_f64()).then(a.cmp(&b)));
    let r = d.min(n - 1);
    let mut components = Vec::with_capacity(r);
    let mut eigenvalues = Vec::with_capacity(r);
    for &k in &order[..r] {
        let mut v: Vec<T> = (0..d).map(|i| vectors[i * d + k]).collect();
        canonical_sign(&mut v);
        components.push(v);
        eigenvalues.push(values[k].max(T::zero()));
    }
    Ok(Pca {
        mean,
        components,
        eigenvalues,
    })
}
