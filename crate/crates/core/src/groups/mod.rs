//! Compact group actions on `ℝ^d`: specifications, elements, Haar sampling,
//! orbit selectors, maximal invariants and representative inversions.

mod element;
mod invariant;
mod orbit;
mod spec;

pub use element::{Block, GroupElement, Permutation, Rotation, ROTATION_TOL};
pub use invariant::{maximal_invariant, minkowski_q, InvariantKind};
pub use orbit::{inversion_kernel_sample, orbit_selector, representative_inversion, so_inversion};
pub use spec::{haar_rotation, GroupFamily, GroupSpec};
