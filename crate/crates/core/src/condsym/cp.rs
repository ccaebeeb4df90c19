use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::PairedDataset;
use crate::error::{Error, Result};
use crate::invariance::TestResult;
use crate::kernels::KernelSpec;
use crate::points::Points;
use crate::rng::{RngStream, StreamRng};

/// Settings of the conditional permutation test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpConfig {
    pub ky: KernelSpec,
    pub km: KernelSpec,
    /// Sweeps for the burn-in and for each of the `b` chains.
    pub s: usize,
    pub b: usize,
}

fn log_sum_exp(v: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.collect();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `ln Σ_r k_Y(z, Z_r) k_M(m, M_r)` over the original sample.
fn log_joint(data: &PairedDataset, ky: &KernelSpec, km: &KernelSpec, z: &[f64], m: &[f64]) -> Result<f64> {
    let v = log_sum_exp((0..data.len()).map(|r| ky.log_k(z, data.z.row(r)) + km.log_k(m, data.m.row(r))));
    if v == f64::NEG_INFINITY || v.is_nan() {
        return Err(Error::DegenerateDensity);
    }
    Ok(v)
}

/// Odds `p/(1−p)` of swapping the responses currently at positions `i` and
/// `j`. `assignment[k]` is the index of the original response now sitting at
/// position `k`.
pub fn kcde_swap_odds(
    data: &PairedDataset,
    cfg: &CpConfig,
    i: usize,
    j: usize,
    assignment: &[usize],
) -> Result<f64> {
    if i == j {
        return Err(Error::BadParameters("swap needs two distinct positions".into()));
    }
    let zi = data.z.row(assignment[i]);
    let zj = data.z.row(assignment[j]);
    let (mi, mj) = (data.m.row(i), data.m.row(j));
    let f = |z: &[f64], m: &[f64]| log_joint(data, &cfg.ky, &cfg.km, z, m);
    let log_odds = f(zj, mi)? + f(zi, mj)? - f(zi, mi)? - f(zj, mj)?;
    Ok(log_odds.exp())
}

/// Precomputed `ln F[a, i] = ln Σ_r k_Y(Z_a, Z_r) k_M(M_i, M_r)`, which makes
/// each swap decision O(1).
#[derive(Debug, Clone)]
pub struct SwapTable {
    n: usize,
    log_f: Vec<f64>,
}

impl SwapTable {
    pub fn new(data: &PairedDataset, cfg: &CpConfig) -> Result<Self> {
        let n = data.len();
        let lz = DMatrix::from_fn(n, n, |a, r| cfg.ky.log_k(data.z.row(a), data.z.row(r)));
        let lm = DMatrix::from_fn(n, n, |i, r| cfg.km.log_k(data.m.row(i), data.m.row(r)));
        let log_f: Vec<f64> = (0..n * n)
            .into_par_iter()
            .map(|k| {
                let (a, i) = (k / n, k % n);
                log_sum_exp((0..n).map(|r| lz[(a, r)] + lm[(i, r)]))
            })
            .collect();
        if log_f.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateDensity);
        }
        Ok(Self { n, log_f })
    }

    #[inline]
    fn get(&self, a: usize, i: usize) -> f64 {
        self.log_f[a * self.n + i]
    }

    pub fn log_odds(&self, i: usize, j: usize, assignment: &[usize]) -> f64 {
        let (a, b) = (assignment[i], assignment[j]);
        self.get(b, i) + self.get(a, j) - self.get(a, i) - self.get(b, j)
    }

    /// One sweep: a random matching of `⌊n/2⌋` disjoint pairs, each swapped
    /// independently with probability `odds / (1 + odds)`.
    pub fn sweep<R: Rng + ?Sized>(&self, assignment: &mut [usize], rng: &mut R) {
        let mut order: Vec<usize> = (0..self.n).collect();
        order.shuffle(rng);
        for pair in order.chunks_exact(2) {
            let (i, j) = (pair[0], pair[1]);
            let p = 1.0 / (1.0 + (-self.log_odds(i, j, assignment)).exp());
            if rng.random::<f64>() < p {
                assignment.swap(i, j);
            }
        }
    }
}

fn run_chain(table: &SwapTable, start: &[usize], sweeps: usize, rng: &mut StreamRng) -> Vec<usize> {
    let mut a = start.to_vec();
    for _ in 0..sweeps {
        table.sweep(&mut a, rng);
    }
    a
}

/// Conditional permutation test. After `S` burn-in sweeps from the identity,
/// `B` independent chains run `S` more sweeps each; the p-value is
/// `(1 + Σ 1{T(observed) ≤ T(chain b)}) / (1 + B)`.
pub fn cp_test<T>(data: &PairedDataset, cfg: &CpConfig, statistic: T, alpha: f64, stream: RngStream) -> Result<TestResult>
where
    T: Fn(&Points, &Points, &Points) -> Result<f64> + Sync,
{
    let n = data.len();
    if n < 4 {
        return Err(Error::SampleTooSmall { needed: 4, got: n });
    }
    if cfg.s < 1 {
        return Err(Error::BadParameters("need at least one sweep".into()));
    }
    let observed = statistic(&data.x, &data.z, &data.m)?;
    if cfg.b == 0 {
        return Ok(TestResult::new("cp", observed, 1.0, Vec::new(), stream).at_level(alpha));
    }
    let table = SwapTable::new(data, cfg)?;
    let identity: Vec<usize> = (0..n).collect();
    let start = run_chain(&table, &identity, cfg.s, &mut stream.substream(0).rng());
    let null: Vec<f64> = (0..cfg.b)
        .into_par_iter()
        .map(|b| {
            let perm = run_chain(&table, &start, cfg.s, &mut stream.substream(b as u64 + 1).rng());
            statistic(&data.x, &data.z.select(&perm), &data.m)
        })
        .collect::<Result<_>>()?;
    let hits = null.iter().filter(|&&t| observed <= t).count();
    let p = (1 + hits) as f64 / (1 + cfg.b) as f64;
    Ok(TestResult::new("cp", observed, p, null, stream).at_level(alpha))
}

/// Multiple correlation `R = √(1 − SSE/SST)` of the first principal
/// coordinate of `Z` regressed by least squares on `[1, X]`. `M` is accepted
/// for signature compatibility with other CP statistics and is unused.
pub fn multiple_correlation_statistic(x: &Points, z: &Points, _m: &Points) -> Result<f64> {
    let n = x.len();
    let p = x.dim() + 1;
    if n <= p {
        return Err(Error::SampleTooSmall { needed: p + 1, got: n });
    }
    let response = first_principal_coordinate(z);
    let design = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { x.row(i)[j - 1] });
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return Err(Error::RankDeficientDesign);
    }
    let coef = svd.solve(&response, 0.0).map_err(|_| Error::RankDeficientDesign)?;
    let fitted = &design * coef;
    let mean = response.mean();
    let sst: f64 = response.iter().map(|v| (v - mean).powi(2)).sum();
    if sst <= 0.0 {
        return Ok(0.0);
    }
    let sse: f64 = response.iter().zip(fitted.iter()).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((1.0 - sse / sst).max(0.0).sqrt().min(1.0))
}

fn first_principal_coordinate(z: &Points) -> DVector<f64> {
    let n = z.len();
    let d = z.dim();
    if d == 1 {
        return DVector::from_iterator(n, z.rows().map(|r| r[0]));
    }
    let means: Vec<f64> = (0..d).map(|c| z.rows().map(|r| r[c]).sum::<f64>() / n as f64).collect();
    let centered = DMatrix::from_fn(n, d, |i, c| z.row(i)[c] - means[c]);
    let cov = centered.transpose() * &centered;
    let eig = SymmetricEigen::new(cov);
    let top = eig.eigenvalues.imax();
    centered * eig.eigenvectors.column(top)
}
