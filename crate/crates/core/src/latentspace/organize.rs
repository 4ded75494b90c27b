//! Group structure, centroids, the anchor loss and direction assignment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};

use super::AnchorSet;

/// Norm applied to each scalar anchor residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossNorm {
    #[default]
    L1,
    L2,
}

impl LossNorm {
    #[inline]
    pub fn value<T: Scalar>(self, r: T) -> T {
        match self {
            LossNorm::L1 => r.abs(),
            LossNorm::L2 => r * r,
        }
    }

    /// Derivative; the L1 subgradient at zero is zero.
    #[inline]
    pub fn derivative<T: Scalar>(self, r: T) -> T {
        match self {
            LossNorm::L1 => {
                if r > T::zero() {
                    T::one()
                } else if r < T::zero() {
                    -T::one()
                } else {
                    T::zero()
                }
            }
            LossNorm::L2 => T::lit(2.0) * r,
        }
    }
}

/// How candidate components are scored when assigning attribute directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentCriterion {
    /// Raw direction loss.
    Raw,
    /// Direction loss divided by the same norm of the projections about
    /// their mean, i.e. the share of spread not explained by the groups.
    #[default]
    Relative,
}

/// Members of every (attribute, level) group.
#[derive(Debug, Clone)]
pub struct Groups {
    /// `members[m][level]` lists anchor indices.
    members: Vec<Vec<Vec<usize>>>,
}

impl Groups {
    pub fn new<T: Scalar>(anchors: &AnchorSet<T>) -> Self {
        let members = anchors
            .schema()
            .attributes
            .iter()
            .enumerate()
            .map(|(m, a)| {
                let mut levels = vec![Vec::new(); a.level_count()];
                for n in 0..anchors.len() {
                    levels[anchors.level(n, m)].push(n);
                }
                levels
            })
            .collect();
        Self { members }
    }

    pub fn of(&self, m: usize, level: usize) -> &[usize] {
        &self.members[m][level]
    }

    pub fn levels(&self, m: usize) -> impl Iterator<Item = &[usize]> {
        self.members[m].iter().map(Vec::as_slice)
    }
}

/// Anchors other than `n` that share its level of attribute `m`.
pub fn group_indices<T: Scalar>(anchors: &AnchorSet<T>, n: usize, m: usize) -> Vec<usize> {
    let level = anchors.level(n, m);
    (0..anchors.len())
        .filter(|&k| k != n && anchors.level(k, m) == level)
        .collect()
}

/// Mean projection onto `direction` of the other members of `n`'s group, or
/// `None` when `n` is alone in its group.
pub fn centroid<T: Scalar>(anchors: &AnchorSet<T>, n: usize, m: usize, direction: &[T]) -> Option<T> {
    let group = group_indices(anchors, n, m);
    if group.is_empty() {
        return None;
    }
    let sum = group
        .iter()
        .fold(T::zero(), |s, &k| s + dot(anchors.anchor(k), direction));
    Some(sum / T::lit(group.len() as f64))
}

pub fn projections<T: Scalar>(anchors: &AnchorSet<T>, direction: &[T]) -> Vec<T> {
    anchors.iter().map(|w| dot(w, direction)).collect()
}

/// `Σ_n ‖p_n − c_{n,m}‖` given precomputed projections; singletons skipped.
fn loss_from_projections<T: Scalar>(groups: &Groups, m: usize, proj: &[T], norm: LossNorm) -> T {
    let mut total = T::zero();
    for members in groups.levels(m) {
        if members.len() < 2 {
            continue;
        }
        let sum = members.iter().fold(T::zero(), |s, &k| s + proj[k]);
        let denom = T::lit((members.len() - 1) as f64);
        for &n in members {
            let c = (sum - proj[n]) / denom;
            total += norm.value(proj[n] - c);
        }
    }
    total
}

/// Direction loss of attribute `m` along `candidate`.
pub fn direction_loss<T: Scalar>(anchors: &AnchorSet<T>, m: usize, candidate: &[T], norm: LossNorm) -> T {
    let groups = Groups::new(anchors);
    loss_from_projections(&groups, m, &projections(anchors, candidate), norm)
}

fn spread<T: Scalar>(proj: &[T], norm: LossNorm) -> T {
    let mean = proj.iter().fold(T::zero(), |s, &p| s + p) / T::lit(proj.len() as f64);
    proj.iter().fold(T::zero(), |s, &p| s + norm.value(p - mean))
}

/// Score of every (attribute, component) pair under `criterion`.
pub fn assignment_scores<T: Scalar>(
    anchors: &AnchorSet<T>,
    components: &[Vec<T>],
    norm: LossNorm,
    criterion: AssignmentCriterion,
) -> Vec<Vec<T>> {
    let groups = Groups::new(anchors);
    let projs: Vec<Vec<T>> = components.iter().map(|v| projections(anchors, v)).collect();
    (0..anchors.attribute_count())
        .map(|m| {
            projs
                .iter()
                .map(|p| {
                    let raw = loss_from_projections(&groups, m, p, norm);
                    match criterion {
                        AssignmentCriterion::Raw => raw,
                        AssignmentCriterion::Relative => {
                            let s = spread(p, norm);
                            if s > T::zero() {
                                raw / s
                            } else {
                                T::infinity()
                            }
                        }
                    }
                })
                .collect()
        })
        .collect()
}

/// Assigns one distinct component to each attribute. Attributes choose in
/// ascending order of their best score; ties go to the lower index.
pub fn assign_directions<T: Scalar>(
    anchors: &AnchorSet<T>,
    components: &[Vec<T>],
    norm: LossNorm,
    criterion: AssignmentCriterion,
) -> Result<Vec<usize>> {
    let m_count = anchors.attribute_count();
    if components.len() < m_count {
        return Err(Error::TooFewComponents {
            needed: m_count,
            got: components.len(),
        });
    }
    let scores = assignment_scores(anchors, components, norm, criterion);
    Ok(greedy_exclusive(&scores))
}

pub(crate) fn greedy_exclusive<T: Scalar>(scores: &[Vec<T>]) -> Vec<usize> {
    let ranked = |row: &[T]| {
        let mut idx: Vec<usize> = (0..row.len()).collect();
        idx.sort_by(|&a, &b| row[a].as_f64().total_cmp(&row[b].as_f64()).then(a.cmp(&b)));
        idx
    };
    let mut order: Vec<usize> = (0..scores.len()).collect();
    let best = |m: usize| ranked(&scores[m])[0];
    order.sort_by(|&a, &b| {
        scores[a][best(a)]
            .as_f64()
            .total_cmp(&scores[b][best(b)].as_f64())
            .then(a.cmp(&b))
    });
    let mut taken = vec![false; scores[0].len()];
    let mut assignment = vec![0; scores.len()];
    for m in order {
        let pick = ranked(&scores[m])
            .into_iter()
            .find(|&c| !taken[c])
            .expect("enough components");
        taken[pick] = true;
        assignment[m] = pick;
    }
    assignment
}

/// Anchor loss over the given attribute directions, with per-anchor
/// gradients that hold directions and centroids fixed.
pub fn anchor_loss_with<T: Scalar>(anchors: &AnchorSet<T>, directions: &[&[T]], norm: LossNorm) -> (T, Vec<Vec<T>>) {
    let groups = Groups::new(anchors);
    let mut value = T::zero();
    let mut grads = vec![vec![T::zero(); anchors.dim()]; anchors.len()];
    for (m, d) in directions.iter().enumerate() {
        let proj = projections(anchors, d);
        for members in groups.levels(m) {
            if members.len() < 2 {
                continue;
            }
            let sum = members.iter().fold(T::zero(), |s, &k| s + proj[k]);
            let denom = T::lit((members.len() - 1) as f64);
            for &n in members {
                let r = proj[n] - (sum - proj[n]) / denom;
                value += norm.value(r);
                crate::scalar::axpy(norm.derivative(r), d, &mut grads[n]);
            }
        }
    }
    (value, grads)
}

/// Gradient of anchor `n`'s own residual terms, centroids and directions fixed.
pub fn anchor_gradient<T: Scalar>(
    anchors: &AnchorSet<T>,
    groups: &Groups,
    directions: &[&[T]],
    n: usize,
    norm: LossNorm,
) -> (T, Vec<T>) {
    let w = anchors.anchor(n);
    let mut grad = vec![T::zero(); anchors.dim()];
    let mut value = T::zero();
    for (m, d) in directions.iter().enumerate() {
        let members = groups.of(m, anchors.level(n, m));
        if members.len() < 2 {
            continue;
        }
        let others = members
            .iter()
            .filter(|&&k| k != n)
            .fold(T::zero(), |s, &k| s + dot(anchors.anchor(k), d));
        let c = others / T::lit((members.len() - 1) as f64);
        let r = dot(w, d) - c;
        value += norm.value(r);
        crate::scalar::axpy(norm.derivative(r), d, &mut grad);
    }
    (value, grad)
}

/// Pooled within-group standard deviation of projections onto `direction`
/// for attribute `m` (groups of one are ignored).
pub fn within_group_std<T: Scalar>(anchors: &AnchorSet<T>, m: usize, direction: &[T]) -> T {
    let groups = Groups::new(anchors);
    let proj = projections(anchors, direction);
    let (mut ss, mut count) = (T::zero(), 0usize);
    for members in groups.levels(m) {
        if members.len() < 2 {
            continue;
        }
        let mean = members.iter().fold(T::zero(), |s, &k| s + proj[k]) / T::lit(members.len() as f64);
        for &k in members {
            ss += (proj[k] - mean) * (proj[k] - mean);
        }
        count += members.len();
    }
    if count == 0 {
        T::zero()
    } else {
        (ss / T::lit(count as f64)).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latentspace::{Attribute, AttributeSchema, QuantizedLabel};

    fn schema(m: usize) -> AttributeSchema {
        AttributeSchema::new(
            (0..m)
                .map(|i| Attribute::discrete(&format!("a{i}"), vec![0.0, 1.0, 2.0, 3.0]))
                .collect(),
        )
        .unwrap()
    }

    fn set(points: Vec<Vec<f64>>, levels: Vec<Vec<usize>>) -> AnchorSet<f64> {
        let m = levels[0].len();
        AnchorSet::new(points, levels.into_iter().map(QuantizedLabel).collect(), schema(m)).unwrap()
    }

    #[test]
    fn group_membership() {
        let s = set(vec![vec![0.0]; 3], vec![vec![0], vec![0], vec![1]]);
        assert_eq!(group_indices(&s, 0, 0), vec![1]);
        assert!(group_indices(&s, 2, 0).is_empty());
        let s = set(
            vec![vec![0.0]; 6],
            vec![vec![0], vec![0], vec![0], vec![1], vec![1], vec![2]],
        );
        assert_eq!(group_indices(&s, 3, 0), vec![4]);
    }

    #[test]
    fn centroids_by_hand() {
        let s = set(
            vec![vec![1.0, 0.0], vec![3.0, 0.0], vec![0.0, 5.0]],
            vec![vec![0], vec![0], vec![1]],
        );
        assert_eq!(centroid(&s, 0, 0, &[1.0, 0.0]), Some(3.0));
        assert_eq!(centroid(&s, 2, 0, &[1.0, 0.0]), None);
        let s = set(
            vec![vec![9.0, 9.0], vec![0.0, 2.0], vec![4.0, 2.0]],
            vec![vec![0], vec![0], vec![0]],
        );
        assert_eq!(centroid(&s, 0, 0, &[1.0, 0.0]), Some(2.0));
    }

    #[test]
    fn three_anchor_fixture_loss_is_four() {
        let s = set(
            vec![vec![1.0, 0.0], vec![3.0, 0.0], vec![0.0, 5.0]],
            vec![vec![0], vec![0], vec![1]],
        );
        assert_eq!(direction_loss(&s, 0, &[1.0, 0.0], LossNorm::L1), 4.0);
        let (v, g) = anchor_loss_with(&s, &[&[1.0, 0.0]], LossNorm::L1);
        assert_eq!(v, 4.0);
        // residual of w1 is 1 - 3 < 0, so its gradient is -d
        assert_eq!(g[0], vec![-1.0, 0.0]);
        assert_eq!(g[1], vec![1.0, 0.0]);
        assert_eq!(g[2], vec![0.0, 0.0]);
        // candidate orthogonal to the in-group variation
        assert_eq!(direction_loss(&s, 0, &[0.0, 1.0], LossNorm::L1), 0.0);
    }

    #[test]
    fn organized_fixture_has_zero_loss_and_gradient() {
        let s = set(
            vec![vec![1.0, 0.0], vec![1.0, 7.0], vec![2.0, -1.0], vec![2.0, 3.0]],
            vec![vec![0], vec![0], vec![1], vec![1]],
        );
        let (v, g) = anchor_loss_with(&s, &[&[1.0, 0.0]], LossNorm::L1);
        assert_eq!(v, 0.0);
        assert!(g.iter().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn per_anchor_gradient_matches_full() {
        let s = set(
            vec![vec![1.0, 0.5], vec![3.0, 0.1], vec![0.0, 5.0], vec![0.2, 4.0]],
            vec![vec![0, 1], vec![0, 0], vec![1, 0], vec![1, 1]],
        );
        let dirs: [&[f64]; 2] = [&[1.0, 0.0], &[0.0, 1.0]];
        let (_, full) = anchor_loss_with(&s, &dirs, LossNorm::L2);
        let groups = Groups::new(&s);
        for n in 0..4 {
            let (_, g) = anchor_gradient(&s, &groups, &dirs, n, LossNorm::L2);
            for (a, b) in g.iter().zip(&full[n]) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn greedy_resolves_collisions_by_best_score() {
        // both attributes prefer component 0; attribute 1 is better there
        let scores = vec![vec![0.3, 0.5, 0.9], vec![0.1, 0.8, 0.4]];
        assert_eq!(greedy_exclusive(&scores), vec![1, 0]);
        assert_eq!(greedy_exclusive(&[vec![0.5, 0.2, 0.9]]), vec![1]);
    }

    #[test]
    fn too_few_components() {
        let s = set(vec![vec![0.0, 1.0]; 3], vec![vec![0, 0], vec![1, 1], vec![2, 2]]);
        assert!(matches!(
            assign_directions(&s, &[vec![1.0, 0.0]], LossNorm::L1, AssignmentCriterion::Raw),
            Err(Error::TooFewComponents { .. })
        ));
    }
}
