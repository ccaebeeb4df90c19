//! Positive-definite kernels, Gram matrices, the median bandwidth heuristic
//! and double centering.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::groups::ROTATION_TOL;
use crate::points::{sq_dist, Points};

/// Anything that evaluates `k(x, y)` on raw coordinate slices.
///
/// Implementations skip input validation; use [`KernelSpec::eval`] for a
/// checked evaluation.
pub trait Kernel: Sync {
    fn k(&self, x: &[f64], y: &[f64]) -> f64;
}

impl<F> Kernel for F
where
    F: Fn(&[f64], &[f64]) -> f64 + Sync,
{
    #[inline]
    fn k(&self, x: &[f64], y: &[f64]) -> f64 {
        self(x, y)
    }
}

/// A concrete kernel family with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `exp(−‖x−y‖² / (2σ²))`.
    GaussianRbf { bandwidth: f64 },
    /// Kernel on SO(3) of the rotation angle between two flattened 3×3 matrices.
    RotationSo3,
    /// `1{x = y}`.
    DiscreteDelta,
}

impl KernelSpec {
    pub fn rbf(bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::BadParameters(format!("bandwidth must be positive, got {bandwidth}")));
        }
        Ok(KernelSpec::GaussianRbf { bandwidth })
    }

    /// Checked evaluation: validates dimensions and, for the SO(3) kernel,
    /// that both inputs are rotations.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dim(x.len(), y.len())?;
        if let KernelSpec::RotationSo3 = self {
            check_rotation3(x)?;
            check_rotation3(y)?;
        }
        Ok(self.k(x, y))
    }

    /// Gram matrix with entry `(i, j) = k(X_i, Y_j)`.
    pub fn gram(&self, x: &Points, y: &Points) -> Result<DMatrix<f64>> {
        check_dim(x.dim(), y.dim())?;
        if let KernelSpec::RotationSo3 = self {
            for r in x.rows().chain(y.rows()) {
                check_rotation3(r)?;
            }
        }
        Ok(gram(self, x, y))
    }

    /// `ln k(x, y)`, exact for the RBF kernel even where `k` underflows.
    pub fn log_k(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            KernelSpec::GaussianRbf { bandwidth } => -sq_dist(x, y) / (2.0 * bandwidth * bandwidth),
            _ => self.k(x, y).ln(),
        }
    }
}

impl Kernel for KernelSpec {
    #[inline]
    fn k(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            KernelSpec::GaussianRbf { bandwidth } => {
                (-sq_dist(x, y) / (2.0 * bandwidth * bandwidth)).exp()
            }
            KernelSpec::RotationSo3 => so3_kernel(x, y),
            KernelSpec::DiscreteDelta => {
                if x == y {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

fn check_rotation3(r: &[f64]) -> Result<()> {
    if r.len() != 9 {
        return Err(Error::InvalidRotation(format!("expected 9 entries, found {}", r.len())));
    }
    let mut err: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let g: f64 = (0..3).map(|k| r[k * 3 + i] * r[k * 3 + j]).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            err = err.max((g - target).abs());
        }
    }
    let det = r[0] * (r[4] * r[8] - r[5] * r[7]) - r[1] * (r[3] * r[8] - r[5] * r[6])
        + r[2] * (r[3] * r[7] - r[4] * r[6]);
    if err > 1e3 * ROTATION_TOL || det <= 0.0 {
        return Err(Error::InvalidRotation(format!("orthogonality error {err:.3e}, det {det:.6}")));
    }
    Ok(())
}

/// Rotation angle of `R₂ᵀR₁` for row-major 3×3 inputs, in `[0, π]`.
pub fn so3_angle(r1: &[f64], r2: &[f64]) -> f64 {
    // R = R₂ᵀ R₁; R_ij = Σ_k r2[k][i] r1[k][j].
    let mut m = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            m[i * 3 + j] = (0..3).map(|k| r2[k * 3 + i] * r1[k * 3 + j]).sum();
        }
    }
    let cos2 = m[0] + m[4] + m[8] - 1.0;
    let ax = m[7] - m[5];
    let ay = m[2] - m[6];
    let az = m[3] - m[1];
    let sin2 = (ax * ax + ay * ay + az * az).sqrt();
    sin2.atan2(cos2)
}

/// `πθ(π−θ) / (8 sin θ)` with the removable singularities at 0 and π filled in.
pub fn so3_kernel_of_angle(theta: f64) -> f64 {
    const GUARD: f64 = 1e-6;
    let phi = PI - theta;
    if theta < GUARD {
        PI * (PI - theta) * (1.0 + theta * theta / 6.0) / 8.0
    } else if phi < GUARD {
        PI * (PI - phi) * (1.0 + phi * phi / 6.0) / 8.0
    } else {
        PI * theta * phi / (8.0 * theta.sin())
    }
}

#[inline]
fn so3_kernel(x: &[f64], y: &[f64]) -> f64 {
    so3_kernel_of_angle(so3_angle(x, y))
}

/// Unchecked Gram matrix for any [`Kernel`].
pub fn gram<K: Kernel + ?Sized>(kernel: &K, x: &Points, y: &Points) -> DMatrix<f64> {
    let (n, m) = (x.len(), y.len());
    let mut data = vec![0.0; n * m];
    if m > 0 {
        data.par_chunks_mut(m).enumerate().for_each(|(i, row)| {
            let xi = x.row(i);
            for (j, v) in row.iter_mut().enumerate() {
                *v = kernel.k(xi, y.row(j));
            }
        });
    }
    DMatrix::from_row_slice(n, m, &data)
}

/// Symmetric Gram matrix of one sample, evaluating each pair once.
pub fn gram_sym<K: Kernel + ?Sized>(kernel: &K, x: &Points) -> DMatrix<f64> {
    let n = x.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        let xi = x.row(i);
        for j in i..n {
            let v = kernel.k(xi, x.row(j));
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// Median of all pairwise Euclidean distances, used directly as the RBF
/// bandwidth. With an even number of pairs the two middle values are averaged.
pub fn median_heuristic(x: &Points) -> Result<f64> {
    let n = x.len();
    if n < 2 {
        return Err(Error::SampleTooSmall { needed: 2, got: n });
    }
    let mut d = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            d.push(sq_dist(x.row(i), x.row(j)).sqrt());
        }
    }
    let med = median_in_place(&mut d);
    if med <= 0.0 {
        return Err(Error::AllPointsIdentical);
    }
    Ok(med)
}

pub(crate) fn median_in_place(v: &mut [f64]) -> f64 {
    let len = v.len();
    let mid = len / 2;
    let (lo, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *m;
    if len % 2 == 1 {
        upper
    } else {
        let lower = lo.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Double centering `HKH` with `H = I − (1/n)𝟙𝟙ᵀ`.
pub fn center(k: &DMatrix<f64>) -> DMatrix<f64> {
    let n = k.nrows();
    assert_eq!(n, k.ncols(), "center expects a square matrix");
    if n == 0 {
        return k.clone();
    }
    let nf = n as f64;
    let row_means: Vec<f64> = (0..n).map(|i| k.row(i).sum() / nf).collect();
    let col_means: Vec<f64> = (0..n).map(|j| k.column(j).sum() / nf).collect();
    let grand = row_means.iter().sum::<f64>() / nf;
    DMatrix::from_fn(n, n, |i, j| k[(i, j)] - row_means[i] - col_means[j] + grand)
}

/// Bandwidth choice in a kernel descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    Median,
    Fixed(f64),
}

/// A kernel as written in configuration: `rbf(median)`, `rbf(1.5)`, `so3`, `delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelDescriptor {
    Rbf(Bandwidth),
    So3,
    Delta,
}

impl KernelDescriptor {
    /// Resolves a data-dependent bandwidth on a training sample.
    pub fn resolve(&self, train: &Points) -> Result<KernelSpec> {
        match *self {
            KernelDescriptor::Rbf(Bandwidth::Median) => KernelSpec::rbf(median_heuristic(train)?),
            KernelDescriptor::Rbf(Bandwidth::Fixed(s)) => KernelSpec::rbf(s),
            KernelDescriptor::So3 => Ok(KernelSpec::RotationSo3),
            KernelDescriptor::Delta => Ok(KernelSpec::DiscreteDelta),
        }
    }

    pub fn needs_data(&self) -> bool {
        matches!(self, KernelDescriptor::Rbf(Bandwidth::Median))
    }
}

impl FromStr for KernelDescriptor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |reason: &str| Error::InvalidDescriptor {
            input: s.to_string(),
            reason: reason.to_string(),
        };
        let t = s.trim().to_ascii_lowercase();
        match t.as_str() {
            "so3" => return Ok(KernelDescriptor::So3),
            "delta" => return Ok(KernelDescriptor::Delta),
            "rbf" => return Ok(KernelDescriptor::Rbf(Bandwidth::Median)),
            _ => {}
        }
        let inner = t
            .strip_prefix("rbf(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| bad("expected rbf(..), so3 or delta"))?
            .trim();
        if inner == "median" {
            return Ok(KernelDescriptor::Rbf(Bandwidth::Median));
        }
        let sigma: f64 = inner.parse().map_err(|_| bad("bandwidth is not a number"))?;
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(bad("bandwidth must be positive"));
        }
        Ok(KernelDescriptor::Rbf(Bandwidth::Fixed(sigma)))
    }
}

impl fmt::Display for KernelDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelDescriptor::Rbf(Bandwidth::Median) => f.write_str("rbf(median)"),
            KernelDescriptor::Rbf(Bandwidth::Fixed(s)) => write!(f, "rbf({s})"),
            KernelDescriptor::So3 => f.write_str("so3"),
            KernelDescriptor::Delta => f.write_str("delta"),
        }
    }
}
