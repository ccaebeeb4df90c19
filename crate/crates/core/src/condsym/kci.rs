use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{transform_responses, CondSpec, PairedDataset};
use crate::error::{Error, Result};
use crate::invariance::TestResult;
use crate::kernels::{center, gram_sym, KernelSpec};
use crate::rng::RngStream;

/// Kernels and tuning constants of the KCI test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KciConfig {
    pub kx: KernelSpec,
    pub ky: KernelSpec,
    pub km: KernelSpec,
    /// Ridge `ε` in `R_M = ε(K̄_M + εI)⁻¹`.
    pub epsilon: f64,
    /// Null samples drawn from the spectral approximation.
    pub b: usize,
}

impl KciConfig {
    pub const DEFAULT_EPSILON: f64 = 1e-3;
    pub const DEFAULT_B: usize = 1000;

    pub fn new(kx: KernelSpec, ky: KernelSpec, km: KernelSpec) -> Self {
        Self {
            kx,
            ky,
            km,
            epsilon: Self::DEFAULT_EPSILON,
            b: Self::DEFAULT_B,
        }
    }
}

/// The two residualized, centered Gram matrices whose trace inner product
/// is the KCI statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct KciMatrices {
    /// `K̄_{XM|M}`.
    pub a: DMatrix<f64>,
    /// `K̄_{Y|M}`.
    pub b: DMatrix<f64>,
}

impl KciMatrices {
    pub fn build(data: &PairedDataset, cfg: &KciConfig) -> Result<Self> {
        let n = data.len();
        if n < 3 {
            return Err(Error::SampleTooSmall { needed: 3, got: n });
        }
        if !(cfg.epsilon > 0.0) {
            return Err(Error::BadParameters("epsilon must be positive".into()));
        }
        let ky = gram_sym(&cfg.ky, &data.z);
        let km = gram_sym(&cfg.km, &data.m);
        let kxm = gram_sym(&cfg.kx, &data.x).component_mul(&km);
        let reg = center(&km) + DMatrix::identity(n, n) * cfg.epsilon;
        let chol = reg.cholesky().ok_or(Error::SingularSolve)?;
        let r = chol.inverse() * cfg.epsilon;
        let a = &r * center(&kxm) * &r;
        let b = &r * center(&ky) * &r;
        Ok(Self {
            a: symmetrize(a),
            b: symmetrize(b),
        })
    }

    /// `(1/n) Tr(A B)`.
    pub fn statistic(&self) -> f64 {
        let n = self.a.nrows() as f64;
        self.a.component_mul(&self.b).sum() / n
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// `T_KCI = (1/n) Tr(K̄_{XM|M} K̄_{Y|M})`.
pub fn kci_statistic(data: &PairedDataset, cfg: &KciConfig) -> Result<f64> {
    Ok(KciMatrices::build(data, cfg)?.statistic())
}

/// Draws from the spectral null `(1/n) Σ_k ν_k z_k²`, where `ν_k` are the
/// eigenvalues of the Hadamard product `A ∘ B` above `1e−10·max` and the
/// `z_k` are i.i.d. standard normal.
///
/// With `A = Σ λ_i u_i u_iᵀ` and `B = Σ μ_j v_j v_jᵀ` the product is `WWᵀ` for
/// `W = [√(λ_i μ_j) u_i ∘ v_j]`, so this matches simulating the weighted
/// chi-square built from both spectra, without forming the `n²` columns.
pub fn null_samples_from_matrices<R: Rng + ?Sized>(a: &DMatrix<f64>, b: &DMatrix<f64>, count: usize, rng: &mut R) -> Vec<f64> {
    let n = a.nrows() as f64;
    let eig = SymmetricEigen::new(a.component_mul(b));
    let max = eig.eigenvalues.iter().fold(0.0f64, |acc, &v| acc.max(v));
    let weights: Vec<f64> = if max > 0.0 {
        eig.eigenvalues.iter().copied().filter(|&v| v >= 1e-10 * max).collect()
    } else {
        Vec::new()
    };
    (0..count)
        .map(|_| {
            weights
                .iter()
                .map(|w| {
                    let z: f64 = rng.sample(StandardNormal);
                    w * z * z
                })
                .sum::<f64>()
                / n
        })
        .collect()
}

/// Null samples for the KCI statistic of `data`.
pub fn kci_null_samples(data: &PairedDataset, cfg: &KciConfig, stream: RngStream, count: usize) -> Result<Vec<f64>> {
    let mats = KciMatrices::build(data, cfg)?;
    Ok(null_samples_from_matrices(&mats.a, &mats.b, count, &mut stream.rng()))
}

/// KCI test of `X ⊥ τ(X)⁻¹Y | M(X)` with p-value `(1/B) Σ 1{T ≤ T_b}`.
pub fn kci_test(
    x: &crate::points::Points,
    y: &crate::points::Points,
    spec: &CondSpec,
    cfg: &KciConfig,
    alpha: f64,
    stream: RngStream,
) -> Result<TestResult> {
    if cfg.b < 1 {
        return Err(Error::BadMonteCarloBudget(cfg.b));
    }
    let data = transform_responses(x, y, spec)?;
    let mats = KciMatrices::build(&data, cfg)?;
    let t = mats.statistic();
    let null = null_samples_from_matrices(&mats.a, &mats.b, cfg.b, &mut stream.rng());
    let p = null.iter().filter(|&&tb| t <= tb).count() as f64 / cfg.b as f64;
    Ok(TestResult::new("kci", t, p, null, stream).at_level(alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::points::Points;
    use rand::Rng;

    fn dataset(seed: u64, n: usize) -> PairedDataset {
        let mut rng = RngStream::new(seed).rng();
        let mut pts = |d: usize| Points::new((0..n * d).map(|_| rng.sample(StandardNormal)).collect(), d).unwrap();
        let (x, y, m, z) = (pts(2), pts(2), pts(1), pts(2));
        PairedDataset::from_parts(x, y, m, z).unwrap()
    }

    fn cfg() -> KciConfig {
        let k = KernelSpec::rbf(1.0).unwrap();
        KciConfig::new(k, k, k)
    }

    #[test]
    fn constant_response_gives_zero() {
        let mut d = dataset(1, 8);
        d.z = Points::new(vec![1.0; 16], 2).unwrap();
        let c = KciConfig { ky: KernelSpec::DiscreteDelta, ..cfg() };
        assert!(kci_statistic(&d, &c).unwrap().abs() < 1e-12);
        let null = kci_null_samples(&d, &c, RngStream::new(1), 50).unwrap();
        assert!(null.iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn matches_dense_oracle() {
        let d = dataset(2, 3);
        let c = KciConfig { epsilon: 1.0, ..cfg() };
        let n = 3;
        let k = |s: &KernelSpec, p: &Points| DMatrix::from_fn(n, n, |i, j| s.eval(p.row(i), p.row(j)).unwrap());
        let h = DMatrix::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64);
        let km = k(&c.km, &d.m);
        let kxm = k(&c.kx, &d.x).component_mul(&km);
        let ky = k(&c.ky, &d.z);
        let r = (&h * &km * &h + DMatrix::identity(n, n)).try_inverse().unwrap();
        let a = &r * (&h * kxm * &h) * &r;
        let b = &r * (&h * ky * &h) * &r;
        let oracle = (a * b).trace() / n as f64;
        let got = kci_statistic(&d, &c).unwrap();
        assert!((got - oracle).abs() <= 1e-12 * oracle.abs().max(1e-300), "{got} vs {oracle}");
    }

    #[test]
    fn relabeling_invariance_and_nonnegativity() {
        let d = dataset(3, 12);
        let perm: Vec<usize> = (0..12).rev().collect();
        let p = PairedDataset::from_parts(d.x.select(&perm), d.y.select(&perm), d.m.select(&perm), d.z.select(&perm)).unwrap();
        let a = kci_statistic(&d, &cfg()).unwrap();
        let b = kci_statistic(&p, &cfg()).unwrap();
        assert!((a - b).abs() < 1e-9);
        assert!(a >= -1e-9);
    }

    #[test]
    fn rank_one_null_is_scaled_chi_square() {
        let n = 5;
        let mut e = DMatrix::zeros(n, n);
        e[(0, 0)] = 1.0;
        let draws = null_samples_from_matrices(&e, &e, 10_000, &mut RngStream::new(4).rng());
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let sd = (2.0f64).sqrt() / n as f64 / 100.0;
        assert!((mean - 1.0 / n as f64).abs() <= 4.0 * sd);
        let zero = DMatrix::zeros(n, n);
        assert!(null_samples_from_matrices(&zero, &e, 10, &mut RngStream::new(4).rng()).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn null_samples_reproducible() {
        let d = dataset(5, 10);
        let a = kci_null_samples(&d, &cfg(), RngStream::new(9), 20).unwrap();
        let b = kci_null_samples(&d, &cfg(), RngStream::new(9), 20).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_small_sample_rejected() {
        let d = dataset(6, 2);
        assert!(matches!(kci_statistic(&d, &cfg()), Err(Error::SampleTooSmall { .. })));
    }
}
