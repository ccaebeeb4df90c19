use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::element::{Block, GroupElement, Permutation, Rotation};
use crate::error::{Error, Result};

/// Group families acting on `ℝ^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GroupFamily {
    /// `SO(d)` acting by matrix multiplication.
    SpecialOrthogonal,
    /// `S_d` permuting coordinates.
    Symmetric,
    /// `{(g, g)} ⊂ SO(2) × SO(2)` on `ℝ⁴`: the same planar rotation applied
    /// to coordinates `(0,1)` and `(2,3)`.
    PairedSo2,
    /// `SO(2) × SO(2)` on `ℝ⁴` with independent block rotations.
    ProductSo2xSo2,
    /// Cyclic rotations by multiples of `step_deg` in the plane orthogonal
    /// to coordinate `axis` (`d = 3`) or in the plane (`d = 2`).
    DiscreteRotations { step_deg: f64, axis: usize },
    /// Continuous rotations of `ℝ³` about coordinate `axis`.
    AxialSo2 { axis: usize },
    /// Lorentz group on `ℓ` stacked four-momenta. Non-compact: only its
    /// maximal invariant is available.
    Lorentz,
    Trivial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    family: GroupFamily,
    dim: usize,
}

impl GroupSpec {
    pub fn new(family: GroupFamily, dim: usize) -> Result<Self> {
        let bad = |why: &str| Err(Error::BadParameters(format!("{why} (d = {dim})")));
        match family {
            GroupFamily::SpecialOrthogonal if dim < 2 => return bad("SO(d) needs d >= 2"),
            GroupFamily::Symmetric if dim < 1 => return bad("S_d needs d >= 1"),
            GroupFamily::PairedSo2 | GroupFamily::ProductSo2xSo2 if dim != 4 => {
                return bad("paired and product SO(2) groups act on R^4")
            }
            GroupFamily::DiscreteRotations { step_deg, axis } => {
                if !(dim == 2 || dim == 3) {
                    return bad("discrete rotations act on R^2 or R^3");
                }
                if dim == 3 && axis >= 3 {
                    return bad("rotation axis out of range");
                }
                let k = 360.0 / step_deg;
                if !(step_deg > 0.0) || (k - k.round()).abs() > 1e-9 {
                    return bad("rotation step must divide 360 degrees");
                }
            }
            GroupFamily::AxialSo2 { axis } if dim != 3 || axis >= 3 => {
                return bad("axial rotations act on R^3 about axis 0, 1 or 2")
            }
            GroupFamily::Lorentz if dim == 0 || dim % 4 != 0 => {
                return bad("Lorentz group acts on stacked four-momenta")
            }
            GroupFamily::Trivial if dim == 0 => return bad("dimension must be positive"),
            _ => {}
        }
        Ok(Self { family, dim })
    }

    pub fn so(d: usize) -> Result<Self> {
        Self::new(GroupFamily::SpecialOrthogonal, d)
    }

    pub fn sym(d: usize) -> Result<Self> {
        Self::new(GroupFamily::Symmetric, d)
    }

    pub fn trivial(d: usize) -> Result<Self> {
        Self::new(GroupFamily::Trivial, d)
    }

    pub fn family(&self) -> GroupFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_compact(&self) -> bool {
        !matches!(self.family, GroupFamily::Lorentz)
    }

    pub fn is_trivial(&self) -> bool {
        matches!(self.family, GroupFamily::Trivial)
    }

    /// Coordinate blocks for the product families.
    pub fn blocks(&self) -> Option<[[usize; 2]; 2]> {
        match self.family {
            GroupFamily::PairedSo2 | GroupFamily::ProductSo2xSo2 => Some([[0, 1], [2, 3]]),
            _ => None,
        }
    }

    pub fn identity(&self) -> GroupElement {
        match self.family {
            GroupFamily::Symmetric | GroupFamily::Trivial | GroupFamily::Lorentz => {
                GroupElement::Permutation(Permutation::identity(self.dim))
            }
            GroupFamily::PairedSo2 | GroupFamily::ProductSo2xSo2 => {
                product2(Rotation::identity(2), Rotation::identity(2))
            }
            _ => GroupElement::Rotation(Rotation::identity(self.dim)),
        }
    }

    /// Parses a descriptor such as `so(4)`, `sym(10)`, `so2xso2`,
    /// `paired-so2`, `rot-discrete(24deg,d=3,axis=3)`, `axial-so2(axis=3)`,
    /// `lorentz(d=8)` or `trivial`. Axes are 1-based in descriptors.
    /// `default_dim` supplies the dimension for descriptors that omit it.
    pub fn parse(input: &str, default_dim: Option<usize>) -> Result<Self> {
        let fail = |reason: &str| Error::InvalidDescriptor {
            input: input.to_string(),
            reason: reason.to_string(),
        };
        let s = input.trim().to_ascii_lowercase();
        let (name, args) = match s.find('(') {
            Some(open) => {
                let close = s.rfind(')').filter(|&c| c == s.len() - 1).ok_or_else(|| fail("unbalanced parentheses"))?;
                (&s[..open], s[open + 1..close].split(',').map(str::trim).filter(|a| !a.is_empty()).collect::<Vec<_>>())
            }
            None => (s.as_str(), Vec::new()),
        };
        let mut positional = Vec::new();
        let mut d = None;
        let mut axis = None;
        for a in &args {
            if let Some((k, v)) = a.split_once('=') {
                let v: usize = v.trim().parse().map_err(|_| fail("expected an integer value"))?;
                match k.trim() {
                    "d" => d = Some(v),
                    "axis" => axis = Some(v),
                    _ => return Err(fail("unknown key")),
                }
            } else {
                positional.push(*a);
            }
        }
        let one_based_axis = |axis: Option<usize>, default: usize| -> Result<usize> {
            match axis.unwrap_or(default) {
                0 => Err(fail("axes are 1-based")),
                a => Ok(a - 1),
            }
        };
        let int_arg = |i: usize| -> Result<Option<usize>> {
            positional
                .get(i)
                .map(|p| p.parse::<usize>().map_err(|_| fail("expected an integer dimension")))
                .transpose()
        };
        let dim_of = |explicit: Option<usize>| -> Result<usize> {
            let dim = explicit.or(d).or(default_dim).ok_or_else(|| fail("dimension not given"))?;
            match default_dim {
                Some(dd) if dd != dim => Err(Error::DimensionMismatch { expected: dim, found: dd }),
                _ => Ok(dim),
            }
        };
        let spec = match name {
            "so" => Self::new(GroupFamily::SpecialOrthogonal, dim_of(int_arg(0)?)?),
            "sym" | "s" => Self::new(GroupFamily::Symmetric, dim_of(int_arg(0)?)?),
            "so2xso2" => Self::new(GroupFamily::ProductSo2xSo2, dim_of(Some(4))?),
            "paired-so2" => Self::new(GroupFamily::PairedSo2, dim_of(Some(4))?),
            "trivial" => Self::new(GroupFamily::Trivial, dim_of(int_arg(0)?)?),
            "lorentz" => Self::new(GroupFamily::Lorentz, dim_of(int_arg(0)?)?),
            "axial-so2" => Self::new(
                GroupFamily::AxialSo2 { axis: one_based_axis(axis, 3)? },
                dim_of(Some(3))?,
            ),
            "rot-discrete" => {
                let step = positional.first().ok_or_else(|| fail("missing rotation step"))?;
                let step_deg: f64 = step
                    .trim_end_matches("deg")
                    .parse()
                    .map_err(|_| fail("rotation step must look like 24deg"))?;
                let dim = dim_of(None)?;
                Self::new(
                    GroupFamily::DiscreteRotations {
                        step_deg,
                        axis: if dim == 3 { one_based_axis(axis, 3)? } else { 0 },
                    },
                    dim,
                )
            }
            _ => return Err(fail("unknown group family")),
        };
        spec.map_err(|e| match e {
            Error::BadParameters(reason) => fail(&reason),
            other => other,
        })
    }

    /// Draws `count` i.i.d. elements from the normalized Haar measure.
    pub fn sample_haar<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Result<Vec<GroupElement>> {
        if !self.is_compact() {
            return Err(Error::NonCompactGroup(self.to_string()));
        }
        Ok((0..count).map(|_| self.sample_one(rng)).collect())
    }

    /// One Haar draw. Callers must have checked compactness.
    pub(crate) fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> GroupElement {
        match self.family {
            GroupFamily::SpecialOrthogonal => GroupElement::Rotation(haar_rotation(self.dim, rng)),
            GroupFamily::Symmetric => {
                let mut p: Vec<usize> = (0..self.dim).collect();
                p.shuffle(rng);
                GroupElement::Permutation(Permutation::from_vec_unchecked(p))
            }
            GroupFamily::PairedSo2 => {
                let r = haar_rotation(2, rng);
                product2(r.clone(), r)
            }
            GroupFamily::ProductSo2xSo2 => {
                let a = haar_rotation(2, rng);
                product2(a, haar_rotation(2, rng))
            }
            GroupFamily::DiscreteRotations { step_deg, axis } => {
                let k = (360.0 / step_deg).round() as u64;
                let j = rng.random_range(0..k);
                let theta = (j as f64 * step_deg).to_radians();
                GroupElement::Rotation(embed_planar(self.dim, axis, theta))
            }
            GroupFamily::AxialSo2 { axis } => {
                let r = haar_rotation(2, rng);
                GroupElement::Rotation(embed_planar(3, axis, r.angle()))
            }
            GroupFamily::Trivial | GroupFamily::Lorentz => self.identity(),
        }
    }
}

impl FromStr for GroupSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s, None)
    }
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            GroupFamily::SpecialOrthogonal => write!(f, "so({})", self.dim),
            GroupFamily::Symmetric => write!(f, "sym({})", self.dim),
            GroupFamily::PairedSo2 => write!(f, "paired-so2"),
            GroupFamily::ProductSo2xSo2 => write!(f, "so2xso2"),
            GroupFamily::DiscreteRotations { step_deg, axis } => {
                write!(f, "rot-discrete({step_deg}deg,d={},axis={})", self.dim, axis + 1)
            }
            GroupFamily::AxialSo2 { axis } => write!(f, "axial-so2(axis={})", axis + 1),
            GroupFamily::Lorentz => write!(f, "lorentz(d={})", self.dim),
            GroupFamily::Trivial => write!(f, "trivial({})", self.dim),
        }
    }
}

pub(crate) fn product2(a: Rotation, b: Rotation) -> GroupElement {
    GroupElement::Product(vec![
        Block {
            coords: vec![0, 1],
            element: GroupElement::Rotation(a),
        },
        Block {
            coords: vec![2, 3],
            element: GroupElement::Rotation(b),
        },
    ])
}

/// The two in-plane coordinates for a rotation about `axis` in `ℝ³`,
/// ordered so that the embedded rotation is right-handed.
pub(crate) fn plane_of(dim: usize, axis: usize) -> (usize, usize) {
    if dim == 2 {
        return (0, 1);
    }
    match axis {
        0 => (1, 2),
        1 => (2, 0),
        _ => (0, 1),
    }
}

pub(crate) fn embed_planar(dim: usize, axis: usize, theta: f64) -> Rotation {
    let (a, b) = plane_of(dim, axis);
    let mut m = Rotation::identity(dim).as_slice().to_vec();
    let (s, c) = theta.sin_cos();
    m[a * dim + a] = c;
    m[a * dim + b] = -s;
    m[b * dim + a] = s;
    m[b * dim + b] = c;
    Rotation::from_row_major_unchecked(dim, m)
}

/// Haar-distributed element of `SO(d)`: QR of a standard Gaussian matrix
/// with the column signs fixed by `diag(R)`, then the last column negated
/// when the determinant is −1.
pub fn haar_rotation<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Rotation {
    if d == 1 {
        return Rotation::identity(1);
    }
    let a = DMatrix::<f64>::from_fn(d, d, |_, _| rng.sample(StandardNormal));
    let qr = a.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    if q.determinant() < 0.0 {
        q.column_mut(d - 1).neg_mut();
    }
    Rotation::from_matrix_unchecked(&q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn descriptors_round_trip() {
        for (s, fam, d) in [
            ("so(4)", GroupFamily::SpecialOrthogonal, 4),
            ("sym(10)", GroupFamily::Symmetric, 10),
            ("so2xso2", GroupFamily::ProductSo2xSo2, 4),
            ("paired-so2", GroupFamily::PairedSo2, 4),
            ("trivial(3)", GroupFamily::Trivial, 3),
            ("lorentz(d=8)", GroupFamily::Lorentz, 8),
            ("axial-so2(axis=3)", GroupFamily::AxialSo2 { axis: 2 }, 3),
            ("rot-discrete(24deg,d=3,axis=3)", GroupFamily::DiscreteRotations { step_deg: 24.0, axis: 2 }, 3),
        ] {
            let g: GroupSpec = s.parse().unwrap();
            assert_eq!(g.family(), fam, "{s}");
            assert_eq!(g.dim(), d, "{s}");
            assert_eq!(g.to_string().parse::<GroupSpec>().unwrap(), g);
        }
        assert_eq!(GroupSpec::parse("trivial", Some(5)).unwrap().dim(), 5);
        assert!(GroupSpec::parse("trivial", None).is_err());
        assert!(GroupSpec::parse("so(3)", Some(4)).is_err());
        assert!("so(1)".parse::<GroupSpec>().is_err());
        assert!("rot-discrete(7deg,d=2)".parse::<GroupSpec>().is_err());
        assert!("banana(3)".parse::<GroupSpec>().is_err());
    }

    #[test]
    fn trivial_haar_is_identity() {
        let g = GroupSpec::trivial(3).unwrap();
        let mut rng = RngStream::new(1).rng();
        for e in g.sample_haar(&mut rng, 5).unwrap() {
            assert_eq!(e, g.identity());
        }
    }

    #[test]
    fn lorentz_refuses_haar() {
        let g: GroupSpec = "lorentz(d=4)".parse().unwrap();
        let mut rng = RngStream::new(1).rng();
        assert!(matches!(g.sample_haar(&mut rng, 1), Err(Error::NonCompactGroup(_))));
    }

    #[test]
    fn haar_rotations_are_special_orthogonal() {
        let mut rng = RngStream::new(3).rng();
        for d in 2..=10 {
            for _ in 0..50 {
                let r = haar_rotation(d, &mut rng);
                assert!(r.orthogonality_error() < 1e-12);
                assert!((r.to_matrix().determinant() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn paired_draws_share_rotation() {
        let g: GroupSpec = "paired-so2".parse().unwrap();
        let mut rng = RngStream::new(4).rng();
        let e = g.sample_one(&mut rng);
        let y = e.act(&[1.0, 0.0, 1.0, 0.0]).unwrap();
        assert!((y[0] - y[2]).abs() < 1e-15 && (y[1] - y[3]).abs() < 1e-15);
    }

    #[test]
    fn discrete_rotation_angles_on_lattice() {
        let g: GroupSpec = "rot-discrete(24deg,d=3,axis=3)".parse().unwrap();
        let mut rng = RngStream::new(5).rng();
        for e in g.sample_haar(&mut rng, 100).unwrap() {
            let y = e.act(&[1.0, 0.0, 2.0]).unwrap();
            assert!((y[2] - 2.0).abs() < 1e-15);
            let k = y[1].atan2(y[0]).to_degrees().rem_euclid(360.0) / 24.0;
            assert!((k - k.round()).abs() < 1e-9);
        }
    }
}
