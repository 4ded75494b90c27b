//! Latent geometry: attribute schema, anchors, PCA, the anchor loss and the
//! attribute hypercube.

mod anchors;
mod basis;
mod organize;
mod pca;
mod schema;

pub use anchors::AnchorSet;
pub use basis::{hypercube_bounds, BasisOptions, Bounds, DirectionBasis};
pub use organize::{
    anchor_gradient, anchor_loss_with, assign_directions, assignment_scores, centroid, direction_loss, group_indices,
    projections, within_group_std, AssignmentCriterion, Groups, LossNorm,
};
pub use pca::{pca, symmetric_eigen, Pca, PcaRefresh};
pub use schema::{Attribute, AttributeKind, AttributeSchema, QuantizedLabel};

/// Anchor loss over the assigned directions of `basis`.
pub fn anchor_loss<T: crate::Scalar>(
    anchors: &AnchorSet<T>,
    basis: &DirectionBasis<T>,
    norm: LossNorm,
) -> (T, Vec<Vec<T>>) {
    anchor_loss_with(anchors, &basis.directions(), norm)
}
