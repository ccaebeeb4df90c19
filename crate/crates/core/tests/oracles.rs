mod common;

use rand::Rng;
use rand_distr::StandardNormal;

use common::rel_err;
use symtest_core::condsym::{kcde_swap_odds, kci_statistic, transform_responses, CondSpec, CpConfig, KciConfig, ResponseAction};
use symtest_core::invariance::{cw_statistic, random_directions};
use symtest_core::kernels::Kernel;
use symtest_core::mmd::{
    invariance_u_with_draws, mmd_u, mmd_v, shortcut_with_draws, two_sample_mmd_test, OrbitDraws,
};
use symtest_core::stats::rejection_rate;
use symtest_core::{GroupElement, GroupSpec, KernelSpec, Points, RngStream};

fn gaussian(seed: u64, n: usize, d: usize) -> Points {
    let mut rng = RngStream::new(seed).rng();
    Points::new((0..n * d).map(|_| rng.sample(StandardNormal)).collect(), d).unwrap()
}

fn slots(draws: &OrbitDraws, h: bool) -> Vec<Vec<GroupElement>> {
    (0..draws.m())
        .map(|l| (0..draws.n()).map(|i| if h { draws.h(l, i) } else { draws.g(l, i) }.clone()).collect())
        .collect()
}

#[test]
fn two_sample_estimators_match_loops() {
    let k = KernelSpec::rbf(0.9).unwrap();
    let kf = |a: &[f64], b: &[f64]| k.k(a, b);
    for seed in 0..5 {
        let x = gaussian(seed, 5, 3);
        let y = gaussian(seed + 50, 4, 3);
        assert!(rel_err(mmd_u(&x, &y, &k).unwrap().value, common::mmd_u(&x, &y, &kf)) <= 1e-13);
        assert!(rel_err(mmd_v(&x, &y, &k).unwrap().value, common::mmd_v(&x, &y, &kf)) <= 1e-13);
    }
}

#[test]
fn invariance_statistic_matches_loops() {
    let k = KernelSpec::rbf(1.1).unwrap();
    let kf = |a: &[f64], b: &[f64]| k.k(a, b);
    for (seed, spec, m) in [(1, GroupSpec::so(3).unwrap(), 1), (2, GroupSpec::sym(3).unwrap(), 2), (3, GroupSpec::so(2).unwrap(), 3)] {
        let x = gaussian(seed, 3, spec.dim());
        let draws = OrbitDraws::sample(&spec, 3, m, &mut RngStream::new(seed + 9).rng()).unwrap();
        let got = invariance_u_with_draws(&x, &draws, &k).unwrap();
        let want = common::invariance_u(&x, &slots(&draws, false), &slots(&draws, true), &kf);
        assert!(rel_err(got, want) <= 1e-13, "{got} vs {want}");
    }
}

#[test]
fn shortcut_matches_loops() {
    let k = KernelSpec::rbf(1.0).unwrap();
    let kf = |a: &[f64], b: &[f64]| k.k(a, b);
    let spec = GroupSpec::so(2).unwrap();
    let x = gaussian(4, 3, 2);
    let draws = OrbitDraws::sample(&spec, 3, 2, &mut RngStream::new(4).rng()).unwrap();
    let got = shortcut_with_draws(&x, &draws, &k).unwrap();
    assert!(rel_err(got, common::shortcut(&x, &slots(&draws, false), &kf)) <= 1e-13);
}

#[test]
fn shortcut_and_full_agree_in_expectation() {
    let k = KernelSpec::rbf(1.0).unwrap();
    let spec = GroupSpec::so(2).unwrap();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for seed in 0..200u64 {
        let x = gaussian(1000 + seed, 20, 2);
        let draws = OrbitDraws::sample(&spec, 20, 2, &mut RngStream::new(seed).rng()).unwrap();
        a.push(invariance_u_with_draws(&x, &draws, &k).unwrap());
        b.push(shortcut_with_draws(&x, &draws, &k).unwrap());
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let var = |v: &[f64]| {
        let m = mean(v);
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    };
    let se = ((var(&a) + var(&b)) / 200.0).sqrt();
    assert!((mean(&a) - mean(&b)).abs() <= 3.0 * se);
}

#[test]
fn cw_matches_ecdf_enumeration() {
    let spec = GroupSpec::so(3).unwrap();
    for seed in 0..5 {
        let mut rng = RngStream::new(seed).rng();
        let x = gaussian(seed + 70, 5, 3);
        let gs = spec.sample_haar(&mut rng, 2).unwrap();
        let dirs = random_directions(4, 3, &mut rng);
        let got = cw_statistic(&x, &gs, &dirs).unwrap();
        assert!(rel_err(got, common::cw(&x, &gs, &dirs)) <= 1e-12);
    }
}

#[test]
fn kci_matches_dense_formula() {
    let spec = CondSpec::new(GroupSpec::so(2).unwrap(), ResponseAction::Same).unwrap();
    let (kx, kz, km) = (KernelSpec::rbf(0.7).unwrap(), KernelSpec::rbf(1.3).unwrap(), KernelSpec::rbf(0.5).unwrap());
    for (seed, eps) in [(1u64, 1e-3), (2, 0.1), (3, 1.0)] {
        let data = transform_responses(&gaussian(seed, 5, 2), &gaussian(seed + 1, 5, 2), &spec).unwrap();
        let cfg = KciConfig { epsilon: eps, ..KciConfig::new(kx, kz, km) };
        let got = kci_statistic(&data, &cfg).unwrap();
        let want = common::kci(
            &data.x,
            &data.z,
            &data.m,
            &|a, b| kx.k(a, b),
            &|a, b| kz.k(a, b),
            &|a, b| km.k(a, b),
            eps,
        );
        assert!(rel_err(got, want) <= 1e-9, "{got} vs {want}");
    }
}

#[test]
fn swap_odds_match_density_ratio() {
    let spec = CondSpec::new(GroupSpec::so(2).unwrap(), ResponseAction::Same).unwrap();
    let data = transform_responses(&gaussian(5, 5, 2), &gaussian(6, 5, 2), &spec).unwrap();
    let cfg = CpConfig { ky: KernelSpec::rbf(0.8).unwrap(), km: KernelSpec::rbf(0.6).unwrap(), s: 1, b: 1 };
    let identity: Vec<usize> = (0..5).collect();
    for (i, j) in [(0, 1), (1, 4), (2, 3)] {
        let got = kcde_swap_odds(&data, &cfg, i, j, &identity).unwrap();
        let want = common::swap_odds(&data.z, &data.m, &|a, b| cfg.ky.k(a, b), &|a, b| cfg.km.k(a, b), i, j);
        assert!(rel_err(got, want) <= 1e-12, "{got} vs {want}");
    }
}

#[test]
fn bootstrap_two_sample_test_holds_level() {
    let k = KernelSpec::rbf(1.0).unwrap();
    let pvals: Vec<f64> = (0..200u64)
        .map(|r| {
            let x = gaussian(2 * r, 100, 1);
            let y = gaussian(2 * r + 1, 100, 1);
            two_sample_mmd_test(&x, &y, &k, 99, RngStream::new(r)).unwrap().p_value
        })
        .collect();
    let (rate, _) = rejection_rate(&pvals, 0.05);
    assert!((0.02..=0.10).contains(&rate), "rate {rate}");
}
