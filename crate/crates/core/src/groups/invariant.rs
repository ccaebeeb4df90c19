use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::spec::{plane_of, GroupFamily, GroupSpec};
use crate::error::{check_dim, Error, Result};
use crate::points::norm;

/// Choice of maximal invariant `M(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InvariantKind {
    /// `‖x‖`.
    Norm,
    /// Order statistics of the coordinates.
    SortedVector,
    /// `E² − p_x² − p_y² − p_z²` for each stacked four-momentum.
    MinkowskiQ,
    /// `(‖p₁‖, ‖p₂‖)` for the two planar blocks.
    PerBlockNorm,
    /// `(‖p₁‖, ‖p₂‖, p₁·p₂, sign(p₁ × p₂))` for paired planar rotations.
    PairedRotationInvariant,
    /// `(x_axis, in-plane radius)` for rotations about a coordinate axis.
    AxialInvariant,
    /// `x` itself.
    Identity,
}

impl InvariantKind {
    /// Natural maximal invariant for a family, if one is implemented.
    pub fn default_for(spec: &GroupSpec) -> Option<Self> {
        Some(match spec.family() {
            GroupFamily::SpecialOrthogonal => InvariantKind::Norm,
            GroupFamily::Symmetric => InvariantKind::SortedVector,
            GroupFamily::ProductSo2xSo2 => InvariantKind::PerBlockNorm,
            GroupFamily::PairedSo2 => InvariantKind::PairedRotationInvariant,
            GroupFamily::AxialSo2 { .. } => InvariantKind::AxialInvariant,
            GroupFamily::Lorentz => InvariantKind::MinkowskiQ,
            GroupFamily::Trivial => InvariantKind::Identity,
            GroupFamily::DiscreteRotations { .. } => return None,
        })
    }

    fn is_invariant_under(self, family: GroupFamily) -> bool {
        use GroupFamily as F;
        use InvariantKind as K;
        match (self, family) {
            (_, F::Trivial) => true,
            (K::MinkowskiQ, F::Lorentz) => true,
            (_, F::Lorentz) => false,
            (K::MinkowskiQ, _) => false,
            (K::Norm, F::Symmetric) => true,
            (K::Norm, _) => true,
            (K::SortedVector, F::Symmetric) => true,
            (K::PerBlockNorm, F::ProductSo2xSo2 | F::PairedSo2) => true,
            (K::PairedRotationInvariant, F::PairedSo2) => true,
            (K::AxialInvariant, F::AxialSo2 { .. }) => true,
            _ => false,
        }
    }
}

impl fmt::Display for InvariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            InvariantKind::Norm => "norm",
            InvariantKind::SortedVector => "sorted",
            InvariantKind::MinkowskiQ => "minkowski-q",
            InvariantKind::PerBlockNorm => "block-norm",
            InvariantKind::PairedRotationInvariant => "paired-rotation",
            InvariantKind::AxialInvariant => "axial",
            InvariantKind::Identity => "identity",
        };
        f.write_str(s)
    }
}

impl FromStr for InvariantKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "norm" => InvariantKind::Norm,
            "sorted" => InvariantKind::SortedVector,
            "minkowski-q" | "minkowski" => InvariantKind::MinkowskiQ,
            "block-norm" => InvariantKind::PerBlockNorm,
            "paired-rotation" => InvariantKind::PairedRotationInvariant,
            "axial" => InvariantKind::AxialInvariant,
            "identity" => InvariantKind::Identity,
            _ => {
                return Err(Error::InvalidDescriptor {
                    input: s.to_string(),
                    reason: "unknown maximal invariant".into(),
                })
            }
        })
    }
}

/// Minkowski form `E² − p_x² − p_y² − p_z²` of a four-momentum.
pub fn minkowski_q(p: &[f64]) -> f64 {
    p[0] * p[0] - p[1] * p[1] - p[2] * p[2] - p[3] * p[3]
}

/// Evaluates the maximal invariant `kind` at `x`. The kind must be invariant
/// under the spec's group; `MinkowskiQ` needs a Lorentz (or trivial) spec.
pub fn maximal_invariant(spec: &GroupSpec, kind: InvariantKind, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(spec.dim(), x.len())?;
    if !kind.is_invariant_under(spec.family()) {
        return Err(Error::UnsupportedKind {
            kind: kind.to_string(),
            family: spec.to_string(),
        });
    }
    Ok(match kind {
        InvariantKind::Norm => vec![norm(x)],
        InvariantKind::SortedVector => {
            let mut y = x.to_vec();
            y.sort_by(f64::total_cmp);
            y
        }
        InvariantKind::MinkowskiQ => {
            if x.len() % 4 != 0 {
                return Err(Error::DimensionMismatch {
                    expected: 4 * x.len().div_ceil(4),
                    found: x.len(),
                });
            }
            x.chunks_exact(4).map(minkowski_q).collect()
        }
        InvariantKind::PerBlockNorm => vec![norm(&x[..2]), norm(&x[2..])],
        InvariantKind::PairedRotationInvariant => {
            let cross = x[0] * x[3] - x[1] * x[2];
            let sign = if cross > 0.0 {
                1.0
            } else if cross < 0.0 {
                -1.0
            } else {
                0.0
            };
            vec![norm(&x[..2]), norm(&x[2..]), x[0] * x[2] + x[1] * x[3], sign]
        }
        InvariantKind::AxialInvariant => {
            let GroupFamily::AxialSo2 { axis } = spec.family() else {
                return Err(Error::UnsupportedKind {
                    kind: kind.to_string(),
                    family: spec.to_string(),
                });
            };
            let (a, b) = plane_of(3, axis);
            vec![x[axis], x[a].hypot(x[b])]
        }
        InvariantKind::Identity => x.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn examples() {
        let lorentz: GroupSpec = "lorentz(d=4)".parse().unwrap();
        assert_eq!(maximal_invariant(&lorentz, InvariantKind::MinkowskiQ, &[1.0, 1.0, 0.0, 0.0]).unwrap(), vec![0.0]);
        assert_eq!(maximal_invariant(&lorentz, InvariantKind::MinkowskiQ, &[2.0, 1.0, 0.0, 0.0]).unwrap(), vec![3.0]);
        let so2 = GroupSpec::so(2).unwrap();
        assert_eq!(maximal_invariant(&so2, InvariantKind::Norm, &[3.0, 4.0]).unwrap(), vec![5.0]);
    }

    #[test]
    fn incompatible_kinds_rejected() {
        let so3 = GroupSpec::so(3).unwrap();
        assert!(matches!(
            maximal_invariant(&so3, InvariantKind::SortedVector, &[1.0, 2.0, 3.0]),
            Err(Error::UnsupportedKind { .. })
        ));
        let lorentz: GroupSpec = "lorentz(d=4)".parse().unwrap();
        assert!(maximal_invariant(&lorentz, InvariantKind::Norm, &[1.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn lorentz_boost_preserves_q() {
        let lorentz: GroupSpec = "lorentz(d=8)".parse().unwrap();
        let p = [5.0, 1.0, -2.0, 0.5, 3.0, 0.2, 0.1, -2.0];
        let q = maximal_invariant(&lorentz, InvariantKind::MinkowskiQ, &p).unwrap();
        let eta: f64 = 0.7;
        let (ch, sh) = (eta.cosh(), eta.sinh());
        let boosted: Vec<f64> = p
            .chunks(4)
            .flat_map(|v| [ch * v[0] + sh * v[3], v[1], v[2], sh * v[0] + ch * v[3]])
            .collect();
        let qb = maximal_invariant(&lorentz, InvariantKind::MinkowskiQ, &boosted).unwrap();
        for (a, b) in q.iter().zip(&qb) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn invariance_under_haar_draws() {
        let mut rng = RngStream::new(21).rng();
        for desc in ["so(4)", "sym(5)", "so2xso2", "paired-so2", "axial-so2(axis=2)"] {
            let g: GroupSpec = desc.parse().unwrap();
            let kind = InvariantKind::default_for(&g).unwrap();
            for _ in 0..200 {
                let x: Vec<f64> = (0..g.dim()).map(|_| rng.sample(StandardNormal)).collect();
                let h = g.sample_one(&mut rng);
                let a = maximal_invariant(&g, kind, &x).unwrap();
                let b = maximal_invariant(&g, kind, &h.act(&x).unwrap()).unwrap();
                let diff = a.iter().zip(&b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
                assert!(diff <= 1e-9, "{desc}: {diff}");
            }
        }
    }
}
