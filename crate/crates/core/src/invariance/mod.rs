//! Tests of distributional invariance under a compact group: the conditional
//! Monte Carlo test, its power estimate, the inversion-based variant and two
//! baselines (transformation two-sample MMD and Cramér–Wold projections).

mod cw;
mod result;

pub use cw::{cw_statistic, random_directions};
pub use result::{rejects, TestResult, DEFAULT_ALPHA};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::groups::{inversion_kernel_sample, GroupElement, GroupSpec};
use crate::kernels::Kernel;
use crate::mmd::{
    invariance_u_with_draws, mmd_u, nystrom_with_draws, two_sample_mmd_test, LandmarkDraws, Landmarks,
    OrbitDraws,
};
use crate::points::Points;
use crate::rng::{RngStream, StreamRng};
use crate::stats::{binomial_cdf, mc_pvalue, mc_pvalue_randomized};

/// Statistic used inside the conditional Monte Carlo test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InvarianceStatistic {
    /// Unbiased MMD against the Monte Carlo orbit average.
    MmdU,
    /// Nyström approximation of the biased MMD.
    MmdNystrom { landmarks: Landmarks },
    /// Worst-case KS distance over random projections and transformations.
    Cw { directions: usize, transforms: usize },
}

/// Parameters of the conditional Monte Carlo test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    /// Group draws per observation inside the statistic.
    pub m: usize,
    /// Monte Carlo null iterates.
    pub b: usize,
    pub statistic: InvarianceStatistic,
    /// Reuse the statistic's own random draws for every null iterate.
    pub reuse_transforms: bool,
    /// Break ties between null and observed statistics at random.
    pub randomized_ties: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            m: 2,
            b: 200,
            statistic: InvarianceStatistic::MmdU,
            reuse_transforms: true,
            randomized_ties: false,
        }
    }
}

fn mc_method(s: &InvarianceStatistic) -> &'static str {
    match s {
        InvarianceStatistic::MmdU => "mmd",
        InvarianceStatistic::MmdNystrom { .. } => "nmmd",
        InvarianceStatistic::Cw { .. } => "cw",
    }
}

/// Applies one fresh Haar element to every observation.
pub fn randomize_orbits<R: Rng + ?Sized>(x: &Points, spec: &GroupSpec, rng: &mut R) -> Result<Points> {
    check_dim(spec.dim(), x.dim())?;
    let gs = spec.sample_haar(rng, x.len())?;
    let mut out = Points::zeros(x.len(), x.dim());
    for (i, g) in gs.iter().enumerate() {
        g.act_into(x.row(i), out.row_mut(i));
    }
    Ok(out)
}

/// Generic conditional Monte Carlo test.
///
/// `prepare` draws whatever auxiliary randomness the statistic needs and
/// returns the statistic as a closure. The observed value uses the draws from
/// stream 0; null iterate `b` re-randomizes every observation along its orbit
/// with stream `b + 1` and either reuses the observed draws or prepares fresh
/// ones from the same stream.
pub fn mc_test_with<P, S>(
    x: &Points,
    spec: &GroupSpec,
    b: usize,
    reuse: bool,
    randomized_ties: bool,
    method: &str,
    stream: RngStream,
    prepare: P,
) -> Result<TestResult>
where
    P: Fn(&mut StreamRng) -> Result<S> + Sync,
    S: Fn(&Points) -> Result<f64> + Sync,
{
    if x.len() < 2 {
        return Err(Error::SampleTooSmall { needed: 2, got: x.len() });
    }
    if b < 1 {
        return Err(Error::BadMonteCarloBudget(b));
    }
    check_dim(spec.dim(), x.dim())?;
    if !spec.is_compact() {
        return Err(Error::NonCompactGroup(spec.to_string()));
    }
    let stat = prepare(&mut stream.substream(0).rng())?;
    let observed = stat(x)?;
    let null: Vec<f64> = (0..b)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.substream(i as u64 + 1).rng();
            let xb = randomize_orbits(x, spec, &mut rng)?;
            if reuse {
                stat(&xb)
            } else {
                prepare(&mut rng)?(&xb)
            }
        })
        .collect::<Result<_>>()?;
    let p = if randomized_ties {
        mc_pvalue_randomized(observed, &null, &mut stream.substream(u64::MAX).rng())
    } else {
        mc_pvalue(observed, &null)
    };
    Ok(TestResult::new(method, observed, p, null, stream))
}

/// Conditional Monte Carlo test of `G`-invariance with exact finite-sample
/// validity.
pub fn mc_invariance_test<K: Kernel + ?Sized>(
    x: &Points,
    spec: &GroupSpec,
    cfg: &McConfig,
    kernel: &K,
    stream: RngStream,
) -> Result<TestResult> {
    let n = x.len();
    let m = cfg.m;
    let method = mc_method(&cfg.statistic);
    match cfg.statistic {
        InvarianceStatistic::MmdU => mc_test_with(x, spec, cfg.b, cfg.reuse_transforms, cfg.randomized_ties, method, stream, |rng| {
            let draws = OrbitDraws::sample(spec, n, m, rng)?;
            Ok(move |xb: &Points| invariance_u_with_draws(xb, &draws, kernel))
        }),
        InvarianceStatistic::MmdNystrom { landmarks } => {
            mc_test_with(x, spec, cfg.b, cfg.reuse_transforms, cfg.randomized_ties, method, stream, |rng| {
                let draws = OrbitDraws::sample(spec, n, m, rng)?;
                let lm = LandmarkDraws::sample(n, landmarks, rng)?;
                Ok(move |xb: &Points| nystrom_with_draws(xb, &draws, &lm, kernel))
            })
        }
        InvarianceStatistic::Cw { directions, transforms } => {
            cw_mc(x, spec, directions, transforms, cfg.b, cfg.reuse_transforms, cfg.randomized_ties, stream)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cw_mc(
    x: &Points,
    spec: &GroupSpec,
    j: usize,
    l: usize,
    b: usize,
    reuse: bool,
    ties: bool,
    stream: RngStream,
) -> Result<TestResult> {
    if j == 0 {
        return Err(Error::BadProjectionCount);
    }
    if l == 0 {
        return Err(Error::BadParameters("need at least one transformation".into()));
    }
    let d = x.dim();
    mc_test_with(x, spec, b, reuse, ties, "cw", stream, |rng| {
        let dirs = random_directions(j, d, rng);
        let gs = spec.sample_haar(rng, l)?;
        Ok(move |xb: &Points| cw_statistic(xb, &gs, &dirs))
    })
}

/// Default number of CW transformations.
pub const CW_DEFAULT_TRANSFORMS: usize = 2;

/// Cramér–Wold test: `J` random directions, `L` Haar transformations, null
/// calibrated by per-observation orbit re-randomization with both held fixed.
pub fn cw_test(x: &Points, spec: &GroupSpec, j: usize, l: usize, b: usize, stream: RngStream) -> Result<TestResult> {
    cw_mc(x, spec, j, l, b, true, false, stream)
}

/// Probability that the Monte Carlo test rejects when each null statistic
/// independently exceeds the observed one with probability `p0`:
/// `Σ_{ℓ=0}^{⌊α(B+1)−1⌋} C(B,ℓ) p0^ℓ (1−p0)^{B−ℓ}`.
pub fn conditional_power_binomial(p0: f64, b: usize, alpha: f64) -> f64 {
    let upper = (alpha * (b as f64 + 1.0) - 1.0 + 1e-9).floor() as i64;
    binomial_cdf(upper, b as u64, p0.clamp(0.0, 1.0))
}

/// Bootstrap estimate of the power of the Monte Carlo test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerEstimate {
    pub beta_hat: f64,
    pub betas: Vec<f64>,
    pub p0: Vec<f64>,
    pub m: usize,
    pub b: usize,
    pub c: usize,
    pub alpha: f64,
}

/// Power estimate with an arbitrary test. `test` receives a bootstrap
/// resample and a dedicated stream and must return a Monte Carlo result
/// with `b` null iterates.
pub fn power_estimate_with<T>(
    x: &Points,
    c: usize,
    b: usize,
    m: usize,
    alpha: f64,
    stream: RngStream,
    test: T,
) -> Result<PowerEstimate>
where
    T: Fn(&Points, RngStream) -> Result<TestResult> + Sync,
{
    if c < 1 {
        return Err(Error::BadParameters("need at least one bootstrap replicate".into()));
    }
    if b < 1 {
        return Err(Error::BadMonteCarloBudget(b));
    }
    let n = x.len();
    let per: Vec<(f64, f64)> = (0..c)
        .into_par_iter()
        .map(|ci| {
            let s = stream.substream(ci as u64);
            let mut rng = s.substream(0).rng();
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let res = test(&x.select(&idx), s.substream(1))?;
            let p0 = ((res.p_value * (b as f64 + 1.0) - 1.0) / b as f64).clamp(0.0, 1.0);
            Ok((p0, conditional_power_binomial(p0, b, alpha)))
        })
        .collect::<Result<_>>()?;
    let (p0, betas): (Vec<f64>, Vec<f64>) = per.into_iter().unzip();
    let beta_hat = betas.iter().sum::<f64>() / c as f64;
    Ok(PowerEstimate {
        beta_hat,
        betas,
        p0,
        m,
        b,
        c,
        alpha,
    })
}

/// Power estimate of [`mc_invariance_test`] on bootstrap resamples of `x`.
pub fn power_estimate<K: Kernel + ?Sized>(
    x: &Points,
    spec: &GroupSpec,
    cfg: &McConfig,
    c: usize,
    alpha: f64,
    kernel: &K,
    stream: RngStream,
) -> Result<PowerEstimate> {
    power_estimate_with(x, c, cfg.b, cfg.m, alpha, stream, |xc, s| {
        mc_invariance_test(xc, spec, cfg, kernel, s)
    })
}

fn flatten_all(elements: &[GroupElement]) -> Result<Points> {
    let rows: Vec<Vec<f64>> = elements.iter().map(|g| g.flatten()).collect();
    Points::from_rows(&rows)
}

/// Invariance test through representative inversions: compares draws from
/// the inversion kernel at each observation to fresh Haar draws. Under
/// invariance the inversions are themselves Haar distributed.
pub fn inversion_mc_test<K: Kernel + ?Sized>(
    x: &Points,
    spec: &GroupSpec,
    b: usize,
    kernel: &K,
    stream: RngStream,
) -> Result<TestResult> {
    if spec.is_trivial() {
        return Err(Error::UnsupportedFamily(spec.to_string()));
    }
    if !spec.is_compact() {
        return Err(Error::NonCompactGroup(spec.to_string()));
    }
    check_dim(spec.dim(), x.dim())?;
    if x.len() < 2 {
        return Err(Error::SampleTooSmall { needed: 2, got: x.len() });
    }
    let mut rng = stream.substream(0).rng();
    let taus: Vec<GroupElement> = x
        .rows()
        .map(|xi| inversion_kernel_sample(spec, xi, &mut rng))
        .collect::<Result<_>>()?;
    let reference = flatten_all(&spec.sample_haar(&mut rng, x.len())?)?;
    let observed = mmd_u(&flatten_all(&taus)?, &reference, kernel)?.value;
    let null: Vec<f64> = (0..b)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.substream(i as u64 + 1).rng();
            let hs = spec.sample_haar(&mut rng, taus.len())?;
            let moved: Vec<GroupElement> = hs.iter().zip(&taus).map(|(h, t)| h.compose(t)).collect::<Result<_>>()?;
            Ok(mmd_u(&flatten_all(&moved)?, &reference, kernel)?.value)
        })
        .collect::<Result<_>>()?;
    let p = mc_pvalue(observed, &null);
    Ok(TestResult::new("inversion", observed, p, null, stream))
}

/// Baseline: transform each observation by one Haar element and run a
/// pooled-bootstrap two-sample MMD test between the original and transformed
/// samples.
pub fn transformation_two_sample_test<K: Kernel + ?Sized>(
    x: &Points,
    spec: &GroupSpec,
    kernel: &K,
    b: usize,
    alpha: f64,
    stream: RngStream,
) -> Result<TestResult> {
    let y = randomize_orbits(x, spec, &mut stream.substream(0).rng())?;
    Ok(two_sample_mmd_test(x, &y, kernel, b, stream.substream(1))?.at_level(alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;
    use rand_distr::StandardNormal;

    fn gaussian(n: usize, d: usize, seed: u64) -> Points {
        let mut rng = RngStream::new(seed).rng();
        Points::new((0..n * d).map(|_| rng.sample(StandardNormal)).collect(), d).unwrap()
    }

    fn rbf() -> KernelSpec {
        KernelSpec::rbf(1.0).unwrap()
    }

    #[test]
    fn binomial_power_examples() {
        assert_eq!(conditional_power_binomial(0.0, 4, 0.2), 1.0);
        assert_eq!(conditional_power_binomial(1.0, 4, 0.2), 0.0);
        assert!((conditional_power_binomial(0.5, 4, 0.2) - 0.0625).abs() < 1e-15);
        assert_eq!(conditional_power_binomial(0.0, 4, 0.1), 0.0);
    }

    #[test]
    fn pvalue_extremes_with_stub_statistics() {
        let x = gaussian(5, 2, 1);
        let so2 = GroupSpec::so(2).unwrap();
        let s = RngStream::new(0);
        // observed statistic uses stream 0, nulls never reach it
        let low = mc_test_with(&x, &so2, 9, true, false, "stub", s, |_| {
            Ok(|xb: &Points| Ok(if xb.row(0) == gaussian(5, 2, 1).row(0) { 1.0 } else { 0.0 }))
        })
        .unwrap();
        assert_eq!(low.p_value, 0.1);
        let high = mc_test_with(&x, &so2, 9, true, false, "stub", s, |_| Ok(|_: &Points| Ok(0.0))).unwrap();
        assert_eq!(high.p_value, 1.0);
    }

    #[test]
    fn power_with_stub_tests() {
        let x = gaussian(5, 2, 1);
        let s = RngStream::new(3);
        let b = 19;
        let sure = power_estimate_with(&x, 1, b, 2, 0.05, s, |_, st| {
            Ok(TestResult::new("stub", 1.0, 1.0 / (b as f64 + 1.0), vec![0.0; b], st))
        })
        .unwrap();
        assert_eq!(sure.p0, vec![0.0]);
        assert_eq!(sure.beta_hat, 1.0);
        let never = power_estimate_with(&x, 1, b, 2, 0.05, s, |_, st| {
            Ok(TestResult::new("stub", 0.0, 1.0, vec![1.0; b], st))
        })
        .unwrap();
        assert_eq!(never.p0, vec![1.0]);
        assert_eq!(never.beta_hat, 0.0);
    }

    #[test]
    fn pvalues_on_lattice_and_deterministic() {
        let x = gaussian(20, 2, 4);
        let so2 = GroupSpec::so(2).unwrap();
        let cfg = McConfig { b: 19, ..Default::default() };
        let a = mc_invariance_test(&x, &so2, &cfg, &rbf(), RngStream::new(5)).unwrap();
        let b = mc_invariance_test(&x, &so2, &cfg, &rbf(), RngStream::new(5)).unwrap();
        assert_eq!(a, b);
        let k = a.p_value * 20.0 - 1.0;
        assert!((k - k.round()).abs() < 1e-12);
        assert_eq!(a.null_stats.len(), 19);
    }

    #[test]
    fn preconditions() {
        let x = gaussian(10, 2, 4);
        let so2 = GroupSpec::so(2).unwrap();
        let cfg = McConfig { b: 0, ..Default::default() };
        assert_eq!(
            mc_invariance_test(&x, &so2, &cfg, &rbf(), RngStream::new(1)),
            Err(Error::BadMonteCarloBudget(0))
        );
        assert_eq!(cw_test(&x, &so2, 0, 2, 9, RngStream::new(1)), Err(Error::BadProjectionCount));
        let triv = GroupSpec::trivial(2).unwrap();
        assert!(matches!(
            inversion_mc_test(&x, &triv, 9, &rbf(), RngStream::new(1)),
            Err(Error::UnsupportedFamily(_))
        ));
        let lorentz: GroupSpec = "lorentz(d=4)".parse().unwrap();
        let x4 = gaussian(10, 4, 1);
        let cfg = McConfig { b: 9, ..Default::default() };
        assert!(matches!(
            mc_invariance_test(&x4, &lorentz, &cfg, &rbf(), RngStream::new(1)),
            Err(Error::NonCompactGroup(_))
        ));
    }

    #[test]
    fn other_statistics_run() {
        let x = gaussian(30, 2, 6);
        let so2 = GroupSpec::so(2).unwrap();
        for statistic in [
            InvarianceStatistic::MmdNystrom { landmarks: Landmarks::Random(6) },
            InvarianceStatistic::Cw { directions: 6, transforms: 2 },
        ] {
            for reuse in [true, false] {
                let cfg = McConfig { b: 9, statistic, reuse_transforms: reuse, ..Default::default() };
                let r = mc_invariance_test(&x, &so2, &cfg, &rbf(), RngStream::new(2)).unwrap();
                assert!(r.p_value > 0.0 && r.p_value <= 1.0);
            }
        }
        let t = transformation_two_sample_test(&x, &so2, &rbf(), 9, 0.05, RngStream::new(1)).unwrap();
        assert!(t.p_value > 0.0 && t.p_value <= 1.0);
    }
}
