//! Property tests over randomized fixtures.

mod common;

use common::{dot, fixture_model, random_anchors, rng, structured_anchors};
use latorg::control::{
    edit, enhance, sample_alpha, sample_latent, synthesize, AttributeTargets, Degradation, SolveConfig,
};
use latorg::diffnet::AdamState;
use latorg::latentspace::{
    anchor_loss, anchor_loss_with, assign_directions, pca, AssignmentCriterion, BasisOptions, DirectionBasis, LossNorm,
};
use latorg::metrics::{is_monotone_within, MeanStd};
use latorg::toyface::{render, Resolution, ToyFaceParams};
use proptest::prelude::*;

fn norm_strategy() -> impl Strategy<Value = LossNorm> {
    prop_oneof![Just(LossNorm::L1), Just(LossNorm::L2)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn principal_components_are_orthonormal(seed in any::<u64>(), n in 3usize..40, dim in 2usize..12) {
        let anchors = random_anchors(n, dim, &mut rng(seed));
        let p = pca(&anchors).unwrap();
        let mut frob = 0.0;
        for (i, a) in p.components.iter().enumerate() {
            for (j, b) in p.components.iter().enumerate() {
                let e = dot(a, b) - if i == j { 1.0 } else { 0.0 };
                frob += e * e;
            }
        }
        prop_assert!(frob.sqrt() < 1e-6);
        prop_assert!(p.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn anchor_loss_ignores_anchor_order(seed in any::<u64>(), n in 4usize..20, norm in norm_strategy()) {
        let mut r = rng(seed);
        let anchors = random_anchors(n, 4, &mut r);
        let dirs = [vec![0.6, 0.8, 0.0, 0.0], vec![0.0, 0.0, 1.0, 0.0]];
        let refs: Vec<&[f64]> = dirs.iter().map(Vec::as_slice).collect();
        let order: Vec<usize> = {
            use rand::seq::SliceRandom;
            let mut o: Vec<usize> = (0..n).collect();
            o.shuffle(&mut r);
            o
        };
        let (a, ga) = anchor_loss_with(&anchors, &refs, norm);
        let (b, gb) = anchor_loss_with(&anchors.permuted(&order), &refs, norm);
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        for (k, &src) in order.iter().enumerate() {
            for (x, y) in gb[k].iter().zip(&ga[src]) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn anchor_loss_ignores_translation(seed in any::<u64>(), shift in prop::collection::vec(-5.0f64..5.0, 4), norm in norm_strategy()) {
        let anchors = random_anchors(12, 4, &mut rng(seed));
        let mut moved = anchors.clone();
        for k in 0..moved.len() {
            moved.anchor_mut(k).iter_mut().zip(&shift).for_each(|(v, s)| *v += s);
        }
        let basis = DirectionBasis::directions_only(&anchors, BasisOptions::new(norm)).unwrap();
        let (a, _) = anchor_loss(&anchors, &basis, norm);
        let (b, _) = anchor_loss(&moved, &basis, norm);
        prop_assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn assignment_is_deterministic(seed in any::<u64>(), n in 6usize..24) {
        let anchors = random_anchors(n, 5, &mut rng(seed));
        let p = pca(&anchors).unwrap();
        for criterion in [AssignmentCriterion::Relative, AssignmentCriterion::Raw] {
            let first = assign_directions(&anchors, &p.components, LossNorm::L1, criterion).unwrap();
            let second = assign_directions(&anchors.clone(), &pca(&anchors).unwrap().components, LossNorm::L1, criterion).unwrap();
            prop_assert_eq!(&first, &second);
            prop_assert!(first[0] != first[1]);
        }
    }

    #[test]
    fn dilated_simplex_samples_hold_invariants(seed in any::<u64>(), n in 1usize..64, beta in 0.0f64..0.5) {
        let mut r = rng(seed);
        for _ in 0..20 {
            let a = sample_alpha::<f64>(n, beta, &mut r).unwrap();
            prop_assert!(a.satisfies_invariants());
            prop_assert_eq!(a.len(), n);
        }
    }

    #[test]
    fn synthesis_hits_targets(seed in any::<u64>(), t0 in 0.0f64..=1.0, t1 in 0.0f64..=1.0, beta in 0.0f64..0.2) {
        let model = fixture_model(seed % 8);
        let targets = AttributeTargets::none(2).with(0, t0).with(1, t1);
        let s = synthesize(&model, &targets, beta, false, &mut rng(seed)).unwrap();
        prop_assert!(s.alpha.satisfies_invariants());
        prop_assert!((model.basis.coordinate(&s.latent, 0) - t0).abs() < 1e-9);
        prop_assert!((model.basis.coordinate(&s.latent, 1) - t1).abs() < 1e-9);
    }

    #[test]
    fn edit_moves_exactly_one_pca_coordinate(seed in any::<u64>(), m in 0usize..2, value in 0.0f64..=1.0) {
        let model = fixture_model(seed % 8);
        let (w, _) = sample_latent(&model, &AttributeTargets::none(2), 0.05, false, &mut rng(seed)).unwrap();
        let e = edit(&model, &w, m, value, false).unwrap();
        let before = model.basis.pca_coordinates(&w);
        let after = model.basis.pca_coordinates(&e.latent);
        let moved = model.basis.assignment[m];
        for (k, (a, b)) in before.iter().zip(&after).enumerate() {
            if k != moved {
                prop_assert!((a - b).abs() < 1e-9, "coordinate {} moved by {}", k, b - a);
            }
        }
        prop_assert!((model.basis.coordinate(&e.latent, m) - value).abs() < 1e-9);
    }

    #[test]
    fn edits_on_distinct_attributes_commute(seed in any::<u64>(), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let model = fixture_model(seed % 8);
        let (w, _) = sample_latent(&model, &AttributeTargets::none(2), 0.05, false, &mut rng(seed)).unwrap();
        let ab = edit(&model, &edit(&model, &w, 0, a, false).unwrap().latent, 1, b, false).unwrap().latent;
        let ba = edit(&model, &edit(&model, &w, 1, b, false).unwrap().latent, 0, a, false).unwrap().latent;
        for (x, y) in ab.iter().zip(&ba) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn adam_first_step_has_closed_form(g in prop::collection::vec(-100.0f64..100.0, 1..8), lr in 1e-5f64..1.0) {
        let mut state = AdamState::new("p", g.len());
        let start: Vec<f64> = (0..g.len()).map(|i| i as f64 - 1.0).collect();
        let mut p = start.clone();
        state.step(&mut p, &g, lr).unwrap();
        for ((after, before), gi) in p.iter().zip(&start).zip(&g) {
            let expected = before - lr * gi / (gi.abs() + 1e-8);
            prop_assert!((after - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn degradation_adjoint_identity(seed in any::<u64>(), factor in prop_oneof![Just(1usize), Just(2), Just(4)], masked in any::<bool>()) {
        use rand::Rng;
        let res = Resolution { width: 8, height: 8 };
        let mut r = rng(seed);
        let q = if masked {
            Degradation::mask(res, (0..64).map(|_| r.random_bool(0.6)).collect()).unwrap()
        } else {
            Degradation::Downsample { factor }
        };
        let x: Vec<f64> = (0..64).map(|_| r.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..q.output_resolution(res).pixels()).map(|_| r.random_range(-1.0..1.0)).collect();
        let lhs = dot(&q.apply(res, &x), &y);
        let rhs = dot(&x, &q.adjoint(res, &y));
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn spread_ignores_sample_order(mut values in prop::collection::vec(-10.0f64..10.0, 2..50), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let a = MeanStd::of(&values);
        values.shuffle(&mut rng(seed));
        let b = MeanStd::of(&values);
        prop_assert!((a.mean - b.mean).abs() < 1e-12 && (a.std - b.std).abs() < 1e-12);
        prop_assert!(a.std >= 0.0);
    }

    #[test]
    fn increasing_sequences_are_monotone(start in -5.0f64..5.0, steps in prop::collection::vec(0.0f64..1.0, 1..30), tol in 0.0f64..1.0) {
        let seq: Vec<f64> = steps.iter().scan(start, |s, d| { *s += d; Some(*s) }).collect();
        prop_assert!(is_monotone_within(&seq, tol));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn renders_stay_in_unit_range(yaw in -30.0f64..30.0, pitch in -15.0f64..15.0, expression in 0.0f64..=1.0) {
        let img = render(&ToyFaceParams::neutral().with_pose(yaw, pitch, expression), Resolution::default()).unwrap();
        prop_assert!(img.pixels.iter().all(|p| (0.0..=1.0).contains(p)));
    }
}

#[test]
fn strong_penalty_drives_attribute_to_target() {
    for seed in 0..4 {
        let model = common::model_over(structured_anchors(18, 5, 0.2, &mut rng(seed)), seed);
        let image = model.generate(model.anchors.anchor(0)).unwrap();
        for target in [0.2, 0.7] {
            let targets = AttributeTargets::none(2).with(0, target);
            let config = SolveConfig {
                lambda: 1e3,
                iters: 400,
                ..SolveConfig::default()
            };
            let solved = enhance(&model, &image, &Degradation::Identity, &targets, &config).unwrap();
            let reached = model.basis.coordinate(&solved.latent, 0);
            assert!((reached - target).abs() < 1e-3, "seed {seed}: {reached} vs {target}");
            assert!(solved.alpha.satisfies_invariants());
        }
    }
}

#[test]
fn descent_on_frozen_basis_shrinks_group_spread() {
    use latorg::latentspace::within_group_std;
    for seed in 0..6 {
        let mut anchors = random_anchors(24, 6, &mut rng(seed));
        let basis = DirectionBasis::directions_only(&anchors, BasisOptions::new(LossNorm::L2)).unwrap();
        let initial: Vec<f64> = (0..2)
            .map(|m| within_group_std(&anchors, m, basis.direction(m)))
            .collect();
        let mut last = f64::INFINITY;
        for _ in 0..400 {
            let (value, grads) = anchor_loss(&anchors, &basis, LossNorm::L2);
            assert!(value < last || value < 1e-20, "seed {seed}: {value} after {last}");
            last = value;
            for (n, g) in grads.iter().enumerate() {
                anchors
                    .anchor_mut(n)
                    .iter_mut()
                    .zip(g)
                    .for_each(|(w, gi)| *w -= 0.05 * gi);
            }
        }
        for m in 0..2 {
            let spread = within_group_std(&anchors, m, basis.direction(m));
            assert!(
                spread <= 1e-6 * initial[m].max(1.0),
                "seed {seed} attribute {m}: {spread}"
            );
        }
    }
}
