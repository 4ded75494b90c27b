//! Dense networks with hand-written reverse-mode gradients, ADAM, and the
//! pixel reconstruction loss.

mod adam;
mod loss;
mod mlp;

pub use adam::AdamState;
pub use loss::ReconLoss;
pub use mlp::{Activation, Mlp, Trace};
