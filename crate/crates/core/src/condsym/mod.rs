//! Tests of conditional equivariance and invariance, reduced to conditional
//! independence `X ⊥ τ(X)⁻¹Y | M(X)`: the kernel conditional independence
//! (KCI) test and a conditional permutation test with kernel conditional
//! density swaps.

mod cp;
mod kci;

pub use cp::{cp_test, kcde_swap_odds, multiple_correlation_statistic, CpConfig, SwapTable};
pub use kci::{kci_null_samples, kci_statistic, kci_test, null_samples_from_matrices, KciConfig, KciMatrices};

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::groups::{maximal_invariant, representative_inversion, GroupSpec, InvariantKind};
use crate::points::Points;

/// How the group acts on the response space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseAction {
    /// `gy = y`: equivariance reduces to invariance of `Y | X`.
    Trivial,
    /// The response lives in the same space and the group acts the same way.
    Same,
}

/// The symmetry whose conditional form is tested.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CondSpec {
    pub group: GroupSpec,
    pub invariant: InvariantKind,
    pub response: ResponseAction,
}

impl CondSpec {
    /// Uses the family's default maximal invariant.
    pub fn new(group: GroupSpec, response: ResponseAction) -> Result<Self> {
        let invariant = InvariantKind::default_for(&group).ok_or_else(|| Error::UnsupportedFamily(group.to_string()))?;
        Ok(Self {
            group,
            invariant,
            response,
        })
    }
}

/// Observations with their maximal invariants and inverted responses.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedDataset {
    pub x: Points,
    pub y: Points,
    pub m: Points,
    pub z: Points,
}

impl PairedDataset {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Assembles a dataset from precomputed parts after checking row counts.
    pub fn from_parts(x: Points, y: Points, m: Points, z: Points) -> Result<Self> {
        for other in [&y, &m, &z] {
            check_dim(x.len(), other.len())?;
        }
        Ok(Self { x, y, m, z })
    }
}

/// Computes `M(X_i)` and `Z_i = τ(X_i)⁻¹Y_i` (or `Z = Y` for a trivial
/// action on responses).
pub fn transform_responses(x: &Points, y: &Points, spec: &CondSpec) -> Result<PairedDataset> {
    check_dim(x.len(), y.len())?;
    check_dim(spec.group.dim(), x.dim())?;
    let mut m_rows = Vec::with_capacity(x.len());
    for xi in x.rows() {
        m_rows.push(maximal_invariant(&spec.group, spec.invariant, xi)?);
    }
    let m = if m_rows.is_empty() {
        Points::zeros(0, 1)
    } else {
        Points::from_rows(&m_rows)?
    };
    let z = match spec.response {
        ResponseAction::Trivial => y.clone(),
        ResponseAction::Same => {
            check_dim(spec.group.dim(), y.dim())?;
            let mut z = Points::zeros(y.len(), y.dim());
            for i in 0..x.len() {
                let tau = representative_inversion(&spec.group, x.row(i))?;
                tau.inverse().act_into(y.row(i), z.row_mut(i));
            }
            z
        }
    };
    Ok(PairedDataset {
        x: x.clone(),
        y: y.clone(),
        m,
        z,
    })
}
