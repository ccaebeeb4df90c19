//! Maximum mean discrepancy estimators: two-sample U/V statistics, the
//! invariance statistic against a Monte Carlo orbit average, the shortcut for
//! equivariant kernels, a Nyström approximation and the pooled bootstrap test.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::groups::{GroupElement, GroupSpec};
use crate::invariance::TestResult;
use crate::kernels::{gram, gram_sym, Kernel};
use crate::points::Points;
use crate::rng::RngStream;
use crate::stats::mc_pvalue;

/// Relative cutoff for the pseudo-inverse used by the Nyström estimator.
pub const PINV_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimatorKind {
    U,
    V,
    Nystrom,
    EquivariantShortcut,
}

/// A squared-MMD estimate with the sample sizes it was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmdEstimate {
    pub value: f64,
    pub kind: EstimatorKind,
    pub n1: usize,
    pub n2: usize,
    /// Group draws per observation, for the invariance statistics.
    pub m: Option<usize>,
}

fn need(n: usize, min: usize) -> Result<()> {
    if n < min {
        Err(Error::SampleTooSmall { needed: min, got: n })
    } else {
        Ok(())
    }
}

/// Sums `f(i)` over `0..n` in a fixed order, so results do not depend on
/// how rayon splits the range.
fn ordered_sum<F: Fn(usize) -> f64 + Sync + Send>(n: usize, f: F) -> f64 {
    let parts: Vec<f64> = (0..n).into_par_iter().map(f).collect();
    parts.iter().sum()
}

fn within_sum_offdiag<K: Kernel + ?Sized>(x: &Points, kernel: &K) -> f64 {
    let n = x.len();
    2.0 * ordered_sum(n, |i| {
        let xi = x.row(i);
        (i + 1..n).map(|j| kernel.k(xi, x.row(j))).sum::<f64>()
    })
}

fn within_sum_full<K: Kernel + ?Sized>(x: &Points, kernel: &K) -> f64 {
    let diag: f64 = x.rows().map(|r| kernel.k(r, r)).sum();
    within_sum_offdiag(x, kernel) + diag
}

fn cross_sum<K: Kernel + ?Sized>(x: &Points, y: &Points, kernel: &K) -> f64 {
    ordered_sum(x.len(), |i| {
        let xi = x.row(i);
        y.rows().map(|yj| kernel.k(xi, yj)).sum::<f64>()
    })
}

/// Unbiased two-sample estimate of MMD².
pub fn mmd_u<K: Kernel + ?Sized>(x: &Points, y: &Points, kernel: &K) -> Result<MmdEstimate> {
    check_dim(x.dim(), y.dim())?;
    need(x.len(), 2)?;
    need(y.len(), 2)?;
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let value = within_sum_offdiag(x, kernel) / (n1 * (n1 - 1.0))
        + within_sum_offdiag(y, kernel) / (n2 * (n2 - 1.0))
        - 2.0 * cross_sum(x, y, kernel) / (n1 * n2);
    Ok(MmdEstimate {
        value,
        kind: EstimatorKind::U,
        n1: x.len(),
        n2: y.len(),
        m: None,
    })
}

/// Biased (V-statistic) estimate of MMD², the squared RKHS distance between
/// the two empirical mean embeddings.
pub fn mmd_v<K: Kernel + ?Sized>(x: &Points, y: &Points, kernel: &K) -> Result<MmdEstimate> {
    check_dim(x.dim(), y.dim())?;
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptySample);
    }
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let value = within_sum_full(x, kernel) / (n1 * n1) + within_sum_full(y, kernel) / (n2 * n2)
        - 2.0 * cross_sum(x, y, kernel) / (n1 * n2);
    Ok(MmdEstimate {
        value,
        kind: EstimatorKind::V,
        n1: x.len(),
        n2: y.len(),
        m: None,
    })
}

/// Independent Haar draws `G_{ℓ,i}` and `H_{r,j}`, one per (slot, observation).
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitDraws {
    n: usize,
    m: usize,
    g: Vec<GroupElement>,
    h: Vec<GroupElement>,
}

impl OrbitDraws {
    pub fn sample<R: Rng + ?Sized>(spec: &GroupSpec, n: usize, m: usize, rng: &mut R) -> Result<Self> {
        if m == 0 {
            return Err(Error::BadParameters("need at least one group draw per observation".into()));
        }
        let g = spec.sample_haar(rng, n * m)?;
        let h = spec.sample_haar(rng, n * m)?;
        Ok(Self { n, m, g, h })
    }

    /// Builds draws from explicit elements laid out slot-major (`ℓ·n + i`).
    pub fn from_elements(n: usize, m: usize, g: Vec<GroupElement>, h: Vec<GroupElement>) -> Result<Self> {
        check_dim(n * m, g.len())?;
        check_dim(n * m, h.len())?;
        Ok(Self { n, m, g, h })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn g(&self, slot: usize, i: usize) -> &GroupElement {
        &self.g[slot * self.n + i]
    }

    pub fn h(&self, slot: usize, i: usize) -> &GroupElement {
        &self.h[slot * self.n + i]
    }

    fn apply(elements: &[GroupElement], x: &Points, n: usize) -> Points {
        let d = x.dim();
        let mut out = Points::zeros(elements.len(), d);
        for (k, e) in elements.iter().enumerate() {
            e.act_into(x.row(k % n), out.row_mut(k));
        }
        out
    }

    /// `(G_{ℓ,i} X_i)` and `(H_{r,j} X_j)`, each stacked slot-major.
    pub fn transformed(&self, x: &Points) -> Result<(Points, Points)> {
        check_dim(self.n, x.len())?;
        if let Some(e) = self.g.first() {
            check_dim(e.dim(), x.dim())?;
        }
        Ok((Self::apply(&self.g, x, self.n), Self::apply(&self.h, x, self.n)))
    }
}

fn invariance_terms<K: Kernel + ?Sized>(
    x: &Points,
    gx: &Points,
    hx: &Points,
    m: usize,
    kernel: &K,
    include_diag: bool,
) -> f64 {
    let n = x.len();
    let mf = m as f64;
    ordered_sum(n, |i| {
        let xi = x.row(i);
        let mut s = 0.0;
        for j in 0..n {
            if i == j && !include_diag {
                continue;
            }
            let mut a = kernel.k(xi, x.row(j));
            let mut b = 0.0;
            for l in 0..m {
                let gi = gx.row(l * n + i);
                for r in 0..m {
                    b += kernel.k(gi, hx.row(r * n + j));
                }
            }
            let mut c = 0.0;
            for l in 0..m {
                c += kernel.k(xi, gx.row(l * n + j));
            }
            a += b / (mf * mf) - 2.0 * c / mf;
            s += a;
        }
        s
    })
}

/// Unbiased invariance statistic evaluated with fixed draws.
pub fn invariance_u_with_draws<K: Kernel + ?Sized>(x: &Points, draws: &OrbitDraws, kernel: &K) -> Result<f64> {
    need(x.len(), 2)?;
    let (gx, hx) = draws.transformed(x)?;
    let n = x.len() as f64;
    Ok(invariance_terms(x, &gx, &hx, draws.m, kernel, false) / (n * (n - 1.0)))
}

/// Biased (V-form) invariance statistic evaluated with fixed draws.
pub fn invariance_v_with_draws<K: Kernel + ?Sized>(x: &Points, draws: &OrbitDraws, kernel: &K) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::EmptySample);
    }
    let (gx, hx) = draws.transformed(x)?;
    let n = x.len() as f64;
    Ok(invariance_terms(x, &gx, &hx, draws.m, kernel, true) / (n * n))
}

/// Unbiased MMD² between the empirical measure and its Monte Carlo orbit
/// average. The draws are returned so a conditional test can reuse them.
pub fn mmd_invariance_u<K: Kernel + ?Sized, R: Rng + ?Sized>(
    x: &Points,
    spec: &GroupSpec,
    m: usize,
    rng: &mut R,
    kernel: &K,
) -> Result<(MmdEstimate, OrbitDraws)> {
    need(x.len(), 2)?;
    check_dim(spec.dim(), x.dim())?;
    let draws = OrbitDraws::sample(spec, x.len(), m, rng)?;
    let value = invariance_u_with_draws(x, &draws, kernel)?;
    let est = MmdEstimate {
        value,
        kind: EstimatorKind::U,
        n1: x.len(),
        n2: x.len(),
        m: Some(m),
    };
    Ok((est, draws))
}

/// Shortcut statistic with fixed draws; only the `G` draws are used.
pub fn shortcut_with_draws<K: Kernel + ?Sized>(x: &Points, draws: &OrbitDraws, kernel: &K) -> Result<f64> {
    need(x.len(), 2)?;
    check_dim(draws.n, x.len())?;
    let gx = OrbitDraws::apply(&draws.g, x, draws.n);
    let n = x.len();
    let m = draws.m;
    let total = ordered_sum(n, |i| {
        let xi = x.row(i);
        let mut s = 0.0;
        for j in (0..n).filter(|&j| j != i) {
            let c: f64 = (0..m).map(|l| kernel.k(xi, gx.row(l * n + j))).sum();
            s += kernel.k(xi, x.row(j)) - c / m as f64;
        }
        s
    });
    Ok(total / (n as f64 * (n as f64 - 1.0)))
}

/// Invariance statistic simplified for kernels with
/// `∫ k(gx, x') dλ(g) = ∫ k(x, gx') dλ(g)`. The caller is responsible for
/// that condition; for other kernels the value is not an MMD estimate.
pub fn mmd_equivariant_shortcut<K: Kernel + ?Sized, R: Rng + ?Sized>(
    x: &Points,
    spec: &GroupSpec,
    m: usize,
    rng: &mut R,
    kernel: &K,
) -> Result<MmdEstimate> {
    need(x.len(), 2)?;
    check_dim(spec.dim(), x.dim())?;
    let draws = OrbitDraws::sample(spec, x.len(), m, rng)?;
    Ok(MmdEstimate {
        value: shortcut_with_draws(x, &draws, kernel)?,
        kind: EstimatorKind::EquivariantShortcut,
        n1: x.len(),
        n2: x.len(),
        m: Some(m),
    })
}

/// How Nyström landmarks are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Landmarks {
    /// `J` indices drawn uniformly with replacement.
    Random(usize),
    /// Every observation, in order. Deterministic; reproduces the V-statistic.
    Full,
}

/// Landmark indices. The same indices select landmarks from the original
/// sample and from every transformed copy, so `t^G_a = G_{ℓ,i_a} X_{i_a}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkDraws {
    idx: Vec<usize>,
}

impl LandmarkDraws {
    pub fn sample<R: Rng + ?Sized>(n: usize, landmarks: Landmarks, rng: &mut R) -> Result<Self> {
        match landmarks {
            Landmarks::Full => Ok(Self { idx: (0..n).collect() }),
            Landmarks::Random(j) => {
                if j == 0 || j > n {
                    return Err(Error::BadLandmarkCount { landmarks: j, n });
                }
                Ok(Self {
                    idx: (0..j).map(|_| rng.random_range(0..n)).collect(),
                })
            }
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.idx
    }
}

/// Symmetric pseudo-inverse with eigenvalues below `PINV_RTOL·max|λ|` dropped.
pub fn pinv_symmetric(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let eig = SymmetricEigen::new(a.clone());
    let smax = eig.eigenvalues.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let tol = PINV_RTOL * smax;
    let mut out = DMatrix::zeros(n, n);
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam.abs() > tol {
            let v = eig.eigenvectors.column(k);
            out += (v * v.transpose()) / lam;
        }
    }
    out
}

struct Embedded {
    t: Points,
    psi: DVector<f64>,
}

fn embed<K: Kernel + ?Sized>(sample: &Points, idx: &[usize], kernel: &K) -> Embedded {
    let t = sample.select(idx);
    let ktt = gram_sym(kernel, &t);
    let ktx = gram(kernel, &t, sample);
    let ones = DVector::from_element(sample.len(), 1.0 / sample.len() as f64);
    let psi = pinv_symmetric(&ktt) * (ktx * ones);
    Embedded { t, psi }
}

fn bilinear<K: Kernel + ?Sized>(a: &Embedded, b: &Embedded, kernel: &K) -> f64 {
    let k = gram(kernel, &a.t, &b.t);
    (a.psi.transpose() * k * &b.psi)[(0, 0)]
}

/// Nyström statistic with fixed group and landmark draws.
pub fn nystrom_with_draws<K: Kernel + ?Sized>(
    x: &Points,
    draws: &OrbitDraws,
    lm: &LandmarkDraws,
    kernel: &K,
) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::EmptySample);
    }
    let (gx, hx) = draws.transformed(x)?;
    let n = x.len();
    let m = draws.m;
    let slot = |p: &Points, l: usize| p.select(&(l * n..(l + 1) * n).collect::<Vec<_>>());
    let base = embed(x, &lm.idx, kernel);
    let ge: Vec<Embedded> = (0..m).map(|l| embed(&slot(&gx, l), &lm.idx, kernel)).collect();
    let he: Vec<Embedded> = (0..m).map(|r| embed(&slot(&hx, r), &lm.idx, kernel)).collect();
    let mf = m as f64;
    let mut value = bilinear(&base, &base, kernel);
    for g in &ge {
        for h in &he {
            value += bilinear(g, h, kernel) / (mf * mf);
        }
        value -= 2.0 * bilinear(&base, g, kernel) / mf;
    }
    Ok(value)
}

/// Nyström approximation of the biased invariance statistic.
pub fn mmd_nystrom<K: Kernel + ?Sized, R: Rng + ?Sized>(
    x: &Points,
    spec: &GroupSpec,
    m: usize,
    landmarks: Landmarks,
    rng: &mut R,
    kernel: &K,
) -> Result<MmdEstimate> {
    need(x.len(), 1)?;
    check_dim(spec.dim(), x.dim())?;
    let draws = OrbitDraws::sample(spec, x.len(), m, rng)?;
    let lm = LandmarkDraws::sample(x.len(), landmarks, rng)?;
    Ok(MmdEstimate {
        value: nystrom_with_draws(x, &draws, &lm, kernel)?,
        kind: EstimatorKind::Nystrom,
        n1: x.len(),
        n2: x.len(),
        m: Some(m),
    })
}

/// Two-sample MMD test calibrated by resampling both samples with
/// replacement from the pooled data.
pub fn two_sample_mmd_test<K: Kernel + ?Sized>(
    x: &Points,
    y: &Points,
    kernel: &K,
    b: usize,
    stream: RngStream,
) -> Result<TestResult> {
    let observed = mmd_u(x, y, kernel)?.value;
    let pooled = x.stack(y)?;
    let (n1, n2, np) = (x.len(), y.len(), pooled.len());
    let null: Vec<f64> = (0..b)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.substream(i as u64).rng();
            let ix: Vec<usize> = (0..n1).map(|_| rng.random_range(0..np)).collect();
            let iy: Vec<usize> = (0..n2).map(|_| rng.random_range(0..np)).collect();
            mmd_u(&pooled.select(&ix), &pooled.select(&iy), kernel).map(|e| e.value)
        })
        .collect::<Result<_>>()?;
    let p = mc_pvalue(observed, &null);
    Ok(TestResult::new("2s-mmd", observed, p, null, stream))
}
