use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Orthogonality and determinant tolerance for rotation matrices.
pub const ROTATION_TOL: f64 = 1e-9;

/// A `d × d` rotation matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rotation {
    dim: usize,
    m: Vec<f64>,
}

impl Rotation {
    /// Validates orthogonality and unit determinant.
    pub fn new(dim: usize, row_major: Vec<f64>) -> Result<Self> {
        if dim == 0 || row_major.len() != dim * dim {
            return Err(Error::InvalidRotation(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                row_major.len()
            )));
        }
        let r = Self { dim, m: row_major };
        let err = r.orthogonality_error();
        if !(err <= ROTATION_TOL) {
            return Err(Error::InvalidRotation(format!("|R^T R - I|_max = {err:e}")));
        }
        let det = r.to_matrix().determinant();
        if (det - 1.0).abs() > ROTATION_TOL {
            return Err(Error::InvalidRotation(format!("det = {det}")));
        }
        Ok(r)
    }

    pub(crate) fn from_row_major_unchecked(dim: usize, m: Vec<f64>) -> Self {
        debug_assert_eq!(m.len(), dim * dim);
        Self { dim, m }
    }

    pub(crate) fn from_matrix_unchecked(a: &DMatrix<f64>) -> Self {
        let dim = a.nrows();
        let mut m = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                m.push(a[(i, j)]);
            }
        }
        Self { dim, m }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = vec![0.0; dim * dim];
        for i in 0..dim {
            m[i * dim + i] = 1.0;
        }
        Self { dim, m }
    }

    /// Planar rotation by `theta` radians, counterclockwise.
    pub fn planar(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self {
            dim: 2,
            m: vec![c, -s, s, c],
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[i * self.dim + j]
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.m
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.m)
    }

    pub fn transpose(&self) -> Self {
        let d = self.dim;
        let mut m = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                m[j * d + i] = self.m[i * d + j];
            }
        }
        Self { dim: d, m }
    }

    pub fn mul(&self, other: &Rotation) -> Self {
        let d = self.dim;
        let mut m = vec![0.0; d * d];
        for i in 0..d {
            for k in 0..d {
                let a = self.m[i * d + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..d {
                    m[i * d + j] += a * other.m[k * d + j];
                }
            }
        }
        Self { dim: d, m }
    }

    #[inline]
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        for (i, o) in out.iter_mut().enumerate().take(d) {
            let row = &self.m[i * d..(i + 1) * d];
            *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    /// `‖RᵀR − I‖_max`.
    pub fn orthogonality_error(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for k in 0..d {
                    s += self.m[k * d + i] * self.m[k * d + j];
                }
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((s - target).abs());
            }
        }
        worst
    }

    /// Angle of a planar rotation from its first column, in `(−π, π]`.
    pub fn angle(&self) -> f64 {
        self.m[self.dim].atan2(self.m[0])
    }
}

/// A permutation of `{0, …, d−1}`; entry `i` is the image of position `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(images: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; images.len()];
        for &i in &images {
            if i >= images.len() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidPermutation(images));
            }
        }
        Ok(Self(images))
    }

    pub(crate) fn from_vec_unchecked(images: Vec<usize>) -> Self {
        Self(images)
    }

    pub fn identity(d: usize) -> Self {
        Self((0..d).collect())
    }

    pub fn images(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `self ∘ other`: position `i` goes to `self(other(i))`.
    pub fn then_after(&self, other: &Permutation) -> Self {
        Self(other.0.iter().map(|&j| self.0[j]).collect())
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (i, &j) in self.0.iter().enumerate() {
            inv[j] = i;
        }
        Self(inv)
    }

    /// Moves the entry at position `i` to position `self(i)`.
    #[inline]
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, &j) in self.0.iter().enumerate() {
            out[j] = x[i];
        }
    }
}

/// One factor of a product element acting on a subset of coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub coords: Vec<usize>,
    pub element: GroupElement,
}

/// A concrete group transformation of `ℝ^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GroupElement {
    Rotation(Rotation),
    Permutation(Permutation),
    Product(Vec<Block>),
}

impl GroupElement {
    /// Builds a product element after checking that the blocks partition
    /// `{0, …, d−1}` and each factor matches its block size.
    pub fn product(blocks: Vec<Block>) -> Result<Self> {
        let d: usize = blocks.iter().map(|b| b.coords.len()).sum();
        let mut seen = vec![false; d];
        for b in &blocks {
            check_dim(b.coords.len(), b.element.dim())?;
            for &c in &b.coords {
                if c >= d || std::mem::replace(&mut seen[c], true) {
                    return Err(Error::BadParameters(format!(
                        "product blocks do not partition 0..{d}"
                    )));
                }
            }
        }
        Ok(GroupElement::Product(blocks))
    }

    pub fn dim(&self) -> usize {
        match self {
            GroupElement::Rotation(r) => r.dim(),
            GroupElement::Permutation(p) => p.len(),
            GroupElement::Product(blocks) => blocks.iter().map(|b| b.coords.len()).sum(),
        }
    }

    /// The identity element with the same variant and layout as `self`.
    pub fn identity_like(&self) -> Self {
        match self {
            GroupElement::Rotation(r) => GroupElement::Rotation(Rotation::identity(r.dim())),
            GroupElement::Permutation(p) => GroupElement::Permutation(Permutation::identity(p.len())),
            GroupElement::Product(blocks) => GroupElement::Product(
                blocks
                    .iter()
                    .map(|b| Block {
                        coords: b.coords.clone(),
                        element: b.element.identity_like(),
                    })
                    .collect(),
            ),
        }
    }

    pub fn compose(&self, other: &GroupElement) -> Result<GroupElement> {
        check_dim(self.dim(), other.dim())?;
        match (self, other) {
            (GroupElement::Rotation(a), GroupElement::Rotation(b)) => Ok(GroupElement::Rotation(a.mul(b))),
            (GroupElement::Permutation(a), GroupElement::Permutation(b)) => {
                Ok(GroupElement::Permutation(a.then_after(b)))
            }
            (GroupElement::Product(a), GroupElement::Product(b)) => {
                if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| x.coords != y.coords) {
                    return Err(Error::VariantMismatch);
                }
                let blocks = a
                    .iter()
                    .zip(b)
                    .map(|(x, y)| {
                        Ok(Block {
                            coords: x.coords.clone(),
                            element: x.element.compose(&y.element)?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(GroupElement::Product(blocks))
            }
            _ => Err(Error::VariantMismatch),
        }
    }

    pub fn inverse(&self) -> GroupElement {
        match self {
            GroupElement::Rotation(r) => GroupElement::Rotation(r.transpose()),
            GroupElement::Permutation(p) => GroupElement::Permutation(p.inverse()),
            GroupElement::Product(blocks) => GroupElement::Product(
                blocks
                    .iter()
                    .map(|b| Block {
                        coords: b.coords.clone(),
                        element: b.element.inverse(),
                    })
                    .collect(),
            ),
        }
    }

    pub fn act(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let mut out = vec![0.0; x.len()];
        self.act_into(x, &mut out);
        Ok(out)
    }

    /// Writes `g·x` into `out`. Lengths must equal `self.dim()`.
    #[inline]
    pub fn act_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            GroupElement::Rotation(r) => r.apply_into(x, out),
            GroupElement::Permutation(p) => p.apply_into(x, out),
            GroupElement::Product(blocks) => {
                let mut sub_in = [0.0; 8];
                let mut sub_out = [0.0; 8];
                for b in blocks {
                    let k = b.coords.len();
                    if k <= 8 {
                        for (s, &c) in sub_in.iter_mut().zip(&b.coords) {
                            *s = x[c];
                        }
                        b.element.act_into(&sub_in[..k], &mut sub_out[..k]);
                        for (&v, &c) in sub_out.iter().zip(&b.coords) {
                            out[c] = v;
                        }
                    } else {
                        let xin: Vec<f64> = b.coords.iter().map(|&c| x[c]).collect();
                        let mut xo = vec![0.0; k];
                        b.element.act_into(&xin, &mut xo);
                        for (&v, &c) in xo.iter().zip(&b.coords) {
                            out[c] = v;
                        }
                    }
                }
            }
        }
    }

    /// Max-norm distance between two elements of the same variant, measured
    /// on their matrix representations.
    pub fn distance(&self, other: &GroupElement) -> Result<f64> {
        let a = self.to_matrix();
        let b = other.to_matrix();
        check_dim(a.nrows(), b.nrows())?;
        Ok((a - b).amax())
    }

    /// Dense matrix representation acting on column vectors.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        let mut e = vec![0.0; d];
        let mut col = vec![0.0; d];
        for j in 0..d {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            self.act_into(&e, &mut col);
            for i in 0..d {
                m[(i, j)] = col[i];
            }
        }
        m
    }

    pub fn as_rotation(&self) -> Option<&Rotation> {
        match self {
            GroupElement::Rotation(r) => Some(r),
            _ => None,
        }
    }

    /// Flattened row-major matrix, used to feed group elements to kernels.
    pub fn flatten(&self) -> Vec<f64> {
        match self {
            GroupElement::Rotation(r) => r.as_slice().to_vec(),
            _ => {
                let m = self.to_matrix();
                let d = m.nrows();
                (0..d * d).map(|k| m[(k / d, k % d)]).collect()
            }
        }
    }
}
