//! Orbit selectors `γ`, representative inversions `τ` with `τ(x)·γ(x) = x`,
//! and samplers for the inversion kernel `ζ(x, ·)`.

use rand::seq::SliceRandom;
use rand::Rng;

use super::element::{GroupElement, Permutation, Rotation};
use super::spec::{embed_planar, haar_rotation, plane_of, product2, GroupFamily, GroupSpec};
use crate::error::{check_dim, Error, Result};
use crate::points::norm;

fn unsupported(spec: &GroupSpec) -> Error {
    Error::UnsupportedFamily(spec.to_string())
}

/// Canonical representative of the orbit of `x`.
///
/// * `SO(d)`: `‖x‖·e₁`
/// * `S_d`: coordinates sorted ascending
/// * `SO(2)×SO(2)`: `(‖p₁‖, 0, ‖p₂‖, 0)`
/// * paired `SO(2)`: rotate both blocks so that `p₁` lands on the positive
///   first axis (or `p₂` when `p₁ = 0`)
/// * axial `SO(2)`: in-plane component rotated onto the first plane axis
pub fn orbit_selector(spec: &GroupSpec, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(spec.dim(), x.len())?;
    match spec.family() {
        GroupFamily::SpecialOrthogonal => {
            let mut y = vec![0.0; x.len()];
            y[0] = norm(x);
            Ok(y)
        }
        GroupFamily::Symmetric => {
            let mut y = x.to_vec();
            y.sort_by(f64::total_cmp);
            Ok(y)
        }
        GroupFamily::ProductSo2xSo2 => Ok(vec![norm(&x[..2]), 0.0, norm(&x[2..]), 0.0]),
        GroupFamily::PairedSo2 => {
            let theta = paired_angle(x);
            let back = Rotation::planar(-theta);
            let mut y = vec![0.0; 4];
            back.apply_into(&x[..2], &mut y[..2]);
            back.apply_into(&x[2..], &mut y[2..]);
            if x[0] != 0.0 || x[1] != 0.0 {
                y[0] = norm(&x[..2]);
                y[1] = 0.0;
            } else {
                y[2] = norm(&x[2..]);
                y[3] = 0.0;
            }
            Ok(y)
        }
        GroupFamily::AxialSo2 { axis } => {
            let (a, b) = plane_of(3, axis);
            let mut y = x.to_vec();
            y[a] = x[a].hypot(x[b]);
            y[b] = 0.0;
            Ok(y)
        }
        GroupFamily::Trivial => Ok(x.to_vec()),
        _ => Err(unsupported(spec)),
    }
}

fn paired_angle(x: &[f64]) -> f64 {
    if x[0] != 0.0 || x[1] != 0.0 {
        x[1].atan2(x[0])
    } else {
        x[3].atan2(x[2])
    }
}

/// Rotation carrying `‖x‖·e₁` to `x` in the plane spanned by `e₁` and `x`.
///
/// `τ(x) = I − e₁e₁ᵀ − x̃x̃ᵀ + [e₁, x̃] R_θ [e₁, x̃]ᵀ` with `x̃` the unit
/// component of `x` orthogonal to `e₁` and `cos θ = x₁/‖x‖`.
pub fn so_inversion(x: &[f64]) -> Result<Rotation> {
    let d = x.len();
    let r = norm(x);
    if r == 0.0 {
        return Err(Error::ZeroVector);
    }
    let mut perp = x.to_vec();
    perp[0] = 0.0;
    let perp_norm = norm(&perp);
    if perp_norm == 0.0 {
        if x[0] > 0.0 {
            return Ok(Rotation::identity(d));
        }
        // Anti-parallel: half turn in the (e₁, e₂) plane.
        let mut m = Rotation::identity(d).as_slice().to_vec();
        m[0] = -1.0;
        m[d + 1] = -1.0;
        return Ok(Rotation::from_row_major_unchecked(d, m));
    }
    let xt: Vec<f64> = perp.iter().map(|v| v / perp_norm).collect();
    let c = x[0] / r;
    let s = perp_norm / r;
    // I + (c−1)(e₁e₁ᵀ + x̃x̃ᵀ) + s(x̃e₁ᵀ − e₁x̃ᵀ); note x̃₁ = 0.
    let mut m = Rotation::identity(d).as_slice().to_vec();
    m[0] += c - 1.0;
    for i in 1..d {
        for j in 1..d {
            m[i * d + j] += (c - 1.0) * xt[i] * xt[j];
        }
        m[i * d] += s * xt[i];
        m[i] -= s * xt[i];
    }
    Ok(Rotation::from_row_major_unchecked(d, m))
}

/// Stable ascending argsort; as a permutation it maps the sorted vector
/// back onto `x`.
fn sort_permutation(x: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    idx
}

/// Group element `τ(x)` with `τ(x)·γ(x) = x`.
pub fn representative_inversion(spec: &GroupSpec, x: &[f64]) -> Result<GroupElement> {
    check_dim(spec.dim(), x.len())?;
    match spec.family() {
        GroupFamily::SpecialOrthogonal => Ok(GroupElement::Rotation(so_inversion(x)?)),
        GroupFamily::Symmetric => Ok(GroupElement::Permutation(Permutation::from_vec_unchecked(
            sort_permutation(x),
        ))),
        GroupFamily::ProductSo2xSo2 => Ok(product2(so_inversion(&x[..2])?, so_inversion(&x[2..])?)),
        GroupFamily::PairedSo2 => {
            if x.iter().all(|&v| v == 0.0) {
                return Err(Error::ZeroVector);
            }
            let r = Rotation::planar(paired_angle(x));
            Ok(product2(r.clone(), r))
        }
        GroupFamily::AxialSo2 { axis } => {
            let (a, b) = plane_of(3, axis);
            if x[a] == 0.0 && x[b] == 0.0 {
                return Err(Error::ZeroVector);
            }
            Ok(GroupElement::Rotation(embed_planar(3, axis, x[b].atan2(x[a]))))
        }
        GroupFamily::Trivial => Ok(spec.identity()),
        _ => Err(unsupported(spec)),
    }
}

/// Draws `g̃ ~ ζ(x, ·)`: `τ(x)` composed with a uniform element of the
/// stabilizer of `γ(x)`.
///
/// For `SO(d)`, `d ≥ 3`, the stabilizer of `e₁` is `SO(d−1)` embedded in the
/// lower-right block. For `S_d` it permutes tied coordinates. The other
/// families act freely away from the degenerate points, so `g̃ = τ(x)`.
pub fn inversion_kernel_sample<R: Rng + ?Sized>(spec: &GroupSpec, x: &[f64], rng: &mut R) -> Result<GroupElement> {
    let tau = representative_inversion(spec, x)?;
    match spec.family() {
        GroupFamily::SpecialOrthogonal if spec.dim() >= 3 => {
            let h = stabilizer_rotation(spec.dim(), rng);
            Ok(tau.compose(&GroupElement::Rotation(h))?)
        }
        GroupFamily::Symmetric => {
            let mut y = x.to_vec();
            y.sort_by(f64::total_cmp);
            let mut sigma: Vec<usize> = (0..y.len()).collect();
            let mut start = 0;
            while start < y.len() {
                let mut end = start + 1;
                while end < y.len() && y[end] == y[start] {
                    end += 1;
                }
                sigma[start..end].shuffle(rng);
                start = end;
            }
            Ok(tau.compose(&GroupElement::Permutation(Permutation::from_vec_unchecked(sigma)))?)
        }
        _ => Ok(tau),
    }
}

/// `H' = diag(1, H)` with `H` Haar on `SO(d−1)`.
pub(crate) fn stabilizer_rotation<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Rotation {
    let h = haar_rotation(d - 1, rng);
    let mut m = vec![0.0; d * d];
    m[0] = 1.0;
    for i in 1..d {
        for j in 1..d {
            m[i * d + j] = h.get(i - 1, j - 1);
        }
    }
    Rotation::from_row_major_unchecked(d, m)
}
