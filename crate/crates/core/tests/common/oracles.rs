//! Independent checks of analytic gradients and of the PCA, shared by the
//! oracle tests and the acceptance run.

use latorg::diffnet::{Activation, Mlp, ReconLoss};
use latorg::latentspace::{anchor_gradient, anchor_loss_with, pca, AnchorSet, Groups, LossNorm};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use super::{central_differences, dot, random_anchors, relative_error, rng};

pub const H: f64 = 1e-4;

/// Largest error seen over a batch of randomized cases, and where.
#[derive(Debug, Clone, Default)]
pub struct Worst {
    pub cases: usize,
    pub error: f64,
    pub at: String,
}

impl Worst {
    fn record(&mut self, error: f64, at: impl FnOnce() -> String) {
        if error > self.error || self.at.is_empty() {
            self.error = self.error.max(error);
            self.at = at();
        }
    }

    fn compare(&mut self, analytic: &[f64], numeric: &[f64], what: &str) {
        assert_eq!(analytic.len(), numeric.len(), "{what}: length mismatch");
        for (i, (a, n)) in analytic.iter().zip(numeric).enumerate() {
            let e = relative_error(*a, *n);
            self.record(e, || format!("{what}[{i}]: {a} vs {n}"));
        }
    }
}

/// MLP parameter and input gradients on random 8-16-10 nets.
pub fn mlp_gradients(cases: u64) -> Worst {
    let activations = [
        (Activation::Tanh, Activation::Logistic),
        (Activation::Tanh, Activation::Identity),
        (Activation::Logistic, Activation::Tanh),
        (Activation::Identity, Activation::Logistic),
    ];
    let mut worst = Worst::default();
    for case in 0..cases {
        let mut r = rng(100 + case);
        let (hidden, output) = activations[case as usize % activations.len()];
        let net = Mlp::<f64>::random(&[8, 16, 10], hidden, output, &mut r).unwrap();
        let x: Vec<f64> = (0..8).map(|_| r.random_range(-1.5..1.5)).collect();
        let g: Vec<f64> = (0..10).map(|_| r.random_range(-1.0..1.0)).collect();
        let (param_grad, input_grad) = net.backward(&x, &g).unwrap();

        let numeric_input = central_differences(&x, H, |xi| dot(&net.forward(xi).unwrap(), &g));
        worst.compare(&input_grad, &numeric_input, &format!("net {case} input"));

        let mut probe = net.clone();
        let numeric_params = central_differences(net.params(), H, |p| {
            probe.params_mut().copy_from_slice(p);
            dot(&probe.forward(&x).unwrap(), &g)
        });
        worst.compare(&param_grad, &numeric_params, &format!("net {case} params"));
        worst.cases += 1;
    }
    worst
}

/// Reconstruction loss gradient on random image pairs.
pub fn recon_gradients(cases: u64) -> Worst {
    let mut worst = Worst::default();
    for case in 0..cases {
        let mut r = rng(300 + case);
        let (w, h) = (5, 4);
        let loss = ReconLoss::new(w, h, r.random_range(0.0..1.0));
        let a: Vec<f64> = (0..w * h).map(|_| r.random_range(0.0..1.0)).collect();
        let b: Vec<f64> = (0..w * h).map(|_| r.random_range(0.0..1.0)).collect();
        let (_, grad) = loss.eval(&a, &b).unwrap();
        let numeric = central_differences(&a, H, |x| loss.eval(x, &b).unwrap().0);
        worst.compare(&grad, &numeric, &format!("pair {case}"));
        worst.cases += 1;
    }
    worst
}

/// Residual of anchor `n` at position `x` for attribute `m`: its projection
/// minus the mean projection of the other members of its level, or `None`
/// for a group of one.
fn residual(anchors: &AnchorSet<f64>, n: usize, m: usize, x: &[f64], d: &[f64]) -> Option<f64> {
    let level = anchors.level(n, m);
    let others: Vec<f64> = (0..anchors.len())
        .filter(|&k| k != n && anchors.level(k, m) == level)
        .map(|k| dot(anchors.anchor(k), d))
        .collect();
    (!others.is_empty()).then(|| dot(x, d) - others.iter().sum::<f64>() / others.len() as f64)
}

/// Anchor `n`'s own loss terms with every other anchor held fixed.
pub fn own_terms(anchors: &AnchorSet<f64>, n: usize, x: &[f64], dirs: &[Vec<f64>], norm: LossNorm) -> f64 {
    dirs.iter()
        .enumerate()
        .filter_map(|(m, d)| residual(anchors, n, m, x, d))
        .map(|r| match norm {
            LossNorm::L1 => r.abs(),
            LossNorm::L2 => r * r,
        })
        .sum()
}

/// Anchor-loss value and per-anchor gradients (centroids and directions
/// frozen) on random anchor sets, alternating L1 and L2. Sets whose
/// residuals come near the L1 kink are skipped.
pub fn anchor_gradients(cases: usize) -> Worst {
    let mut worst = Worst::default();
    let mut seed = 500;
    while worst.cases < cases {
        seed += 1;
        let mut r = rng(seed);
        let anchors = random_anchors(r.random_range(6..16), 5, &mut r);
        let dirs: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..5).map(|_| r.random_range(-1.0..1.0)).collect())
            .collect();
        let near_kink = (0..anchors.len()).any(|n| {
            dirs.iter()
                .enumerate()
                .any(|(m, d)| residual(&anchors, n, m, anchors.anchor(n), d).is_some_and(|r| r.abs() < 1e-2))
        });
        if near_kink {
            continue;
        }
        let norm = if worst.cases % 2 == 0 {
            LossNorm::L1
        } else {
            LossNorm::L2
        };
        let refs: Vec<&[f64]> = dirs.iter().map(Vec::as_slice).collect();
        let (value, grads) = anchor_loss_with(&anchors, &refs, norm);
        let groups = Groups::new(&anchors);

        let total: f64 = (0..anchors.len())
            .map(|n| own_terms(&anchors, n, anchors.anchor(n), &dirs, norm))
            .sum();
        worst.record(relative_error(value, total), || {
            format!("set {seed} value: {value} vs {total}")
        });
        for n in 0..anchors.len() {
            let numeric = central_differences(anchors.anchor(n), H, |x| own_terms(&anchors, n, x, &dirs, norm));
            worst.compare(&grads[n], &numeric, &format!("set {seed} anchor {n}"));
            let (_, single) = anchor_gradient(&anchors, &groups, &refs, n, norm);
            worst.compare(&single, &numeric, &format!("set {seed} anchor {n} alone"));
        }
        worst.cases += 1;
    }
    worst
}

/// Worst eigenvalue error and worst `1 − |cos|` between our components and
/// nalgebra's, over random 16-d anchor sets with a separated spectrum.
pub fn pca_against_dense(cases: u64) -> (Worst, Worst) {
    let (mut values, mut vectors) = (Worst::default(), Worst::default());
    for case in 0..cases {
        let mut r = rng(900 + case);
        let dim = 16;
        let n = r.random_range(5..60);
        let mut anchors = random_anchors(n, dim, &mut r);
        let stretch: Vec<f64> = (0..dim).map(|i| 0.3 + i as f64 * 0.25).collect();
        for k in 0..n {
            anchors
                .anchor_mut(k)
                .iter_mut()
                .zip(&stretch)
                .for_each(|(v, s)| *v *= s);
        }

        let data = DMatrix::from_fn(n, dim, |i, j| anchors.anchor(i)[j]);
        let mean = data.row_mean();
        let centred = DMatrix::from_fn(n, dim, |i, j| data[(i, j)] - mean[j]);
        let eig = SymmetricEigen::new(centred.transpose() * &centred / (n as f64 - 1.0));
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

        let ours = pca(&anchors).unwrap();
        let rank = dim.min(n - 1);
        if ours.components.len() != rank {
            values.record(f64::INFINITY, || {
                format!("set {case}: rank {} vs {rank}", ours.components.len())
            });
        }
        for (k, &idx) in order[..rank.min(ours.components.len())].iter().enumerate() {
            let expected = eig.eigenvalues[idx];
            let got = ours.eigenvalues[k];
            values.record((got - expected).abs(), || {
                format!("set {case} eigenvalue {k}: {got} vs {expected}")
            });
            let oracle: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
            let cosine = dot(&ours.components[k], &oracle).abs();
            vectors.record((1.0 - cosine).abs(), || {
                format!("set {case} component {k}: |cos| {cosine}")
            });
        }
        values.cases += 1;
        vectors.cases += 1;
    }
    (values, vectors)
}
