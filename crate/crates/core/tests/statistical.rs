use rand::Rng;
use rand_distr::StandardNormal;

use symtest_core::groups::{inversion_kernel_sample, representative_inversion};
use symtest_core::invariance::{mc_invariance_test, McConfig};
use symtest_core::kernels::Kernel;
use symtest_core::mmd::{mmd_invariance_u, mmd_u, mmd_v};
use symtest_core::stats::{ks_distance, ks_pvalue, rejection_rate};
use symtest_core::{Generator, GroupElement, GroupSpec, KernelSpec, Points, RngStream};

fn gaussian(seed: u64, n: usize, d: usize) -> Points {
    let mut rng = RngStream::new(seed).rng();
    Points::new((0..n * d).map(|_| rng.sample(StandardNormal)).collect(), d).unwrap()
}

#[test]
fn haar_so2_left_translate_is_uniform() {
    let spec = GroupSpec::so(2).unwrap();
    let mut rng = RngStream::new(11).rng();
    let h = GroupElement::Rotation(symtest_core::groups::Rotation::planar(1.1));
    let angles: Vec<f64> = spec
        .sample_haar(&mut rng, 10_000)
        .unwrap()
        .iter()
        .map(|g| {
            let m = h.compose(g).unwrap().to_matrix();
            m[(1, 0)].atan2(m[(0, 0)])
        })
        .collect();
    let pi = std::f64::consts::PI;
    let d = ks_distance(&angles, |a| ((a + pi) / (2.0 * pi)).clamp(0.0, 1.0));
    assert!(ks_pvalue(d, angles.len()) > 0.01, "KS distance {d}");
}

#[test]
fn stabilizer_block_fixes_first_axis() {
    let mut rng = RngStream::new(12).rng();
    for d in 3..6 {
        let spec = GroupSpec::so(d).unwrap();
        for _ in 0..200 {
            let x: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let tau = representative_inversion(&spec, &x).unwrap();
            let g = inversion_kernel_sample(&spec, &x, &mut rng).unwrap();
            let h = tau.inverse().compose(&g).unwrap().to_matrix();
            assert!((h[(0, 0)] - 1.0).abs() <= 1e-12);
            for k in 1..d {
                assert!(h[(0, k)].abs() <= 1e-12 && h[(k, 0)].abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn u_and_v_differ_by_diagonal_terms() {
    let k = KernelSpec::rbf(0.8).unwrap();
    for (seed, n) in [(1u64, 5usize), (2, 20), (3, 60)] {
        let x = gaussian(seed, n, 3);
        let y = gaussian(seed + 100, n, 3);
        let u = mmd_u(&x, &y, &k).unwrap().value;
        let v = mmd_v(&x, &y, &k).unwrap().value;
        let nf = n as f64;
        let mut oracle = 0.0;
        for s in [&x, &y] {
            let (mut off, mut diag) = (0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    let kij = k.k(s.row(i), s.row(j));
                    if i == j {
                        diag += kij;
                    } else {
                        off += kij;
                    }
                }
            }
            oracle += off * (1.0 / (nf * nf) - 1.0 / (nf * (nf - 1.0))) + diag / (nf * nf);
        }
        assert!((v - u - oracle).abs() <= 1e-12, "n = {n}");
        assert!((v - u).abs() <= 2.0 / nf);
    }
}

#[test]
fn mmd_u_is_unbiased_on_two_point_laws() {
    // X ~ Bernoulli(0.3), Y ~ Bernoulli(0.7) on {0, 1} with an RBF kernel.
    let k = KernelSpec::rbf(1.0).unwrap();
    let c = (-0.5f64).exp();
    let same = |p: f64| p * p + (1.0 - p) * (1.0 - p) + 2.0 * p * (1.0 - p) * c;
    let (p, q) = (0.3, 0.7);
    let cross = p * q + (1.0 - p) * (1.0 - q) + (p * (1.0 - q) + q * (1.0 - p)) * c;
    let exact = same(p) + same(q) - 2.0 * cross;

    let mut rng = RngStream::new(13).rng();
    let draw = |prob: f64, rng: &mut symtest_core::rng::StreamRng| {
        Points::new((0..5).map(|_| if rng.random::<f64>() < prob { 1.0 } else { 0.0 }).collect(), 1).unwrap()
    };
    let vals: Vec<f64> = (0..10_000)
        .map(|_| {
            let x = draw(p, &mut rng);
            let y = draw(q, &mut rng);
            mmd_u(&x, &y, &k).unwrap().value
        })
        .collect();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
    let se = (var / vals.len() as f64).sqrt();
    assert!((mean - exact).abs() <= 4.0 * se, "mean {mean} exact {exact} se {se}");
}

#[test]
fn invariance_estimate_is_bitwise_deterministic() {
    let x = gaussian(14, 30, 3);
    let spec = GroupSpec::so(3).unwrap();
    let k = KernelSpec::rbf(1.0).unwrap();
    let a = mmd_invariance_u(&x, &spec, 3, &mut RngStream::new(5).rng(), &k).unwrap().0;
    let b = mmd_invariance_u(&x, &spec, 3, &mut RngStream::new(5).rng(), &k).unwrap().0;
    assert_eq!(a.value.to_bits(), b.value.to_bits());
}

fn null_rate(generator: &Generator, spec: &GroupSpec, reps: usize, seed: u64) -> f64 {
    let cfg = McConfig { b: 19, ..McConfig::default() };
    let root = RngStream::new(seed);
    let pvals: Vec<f64> = (0..reps)
        .map(|r| {
            let s = root.substream(r as u64);
            let x = generator.sample(30, &mut s.substream(0).rng()).unwrap().x;
            let k = KernelSpec::rbf(symtest_core::kernels::median_heuristic(&x).unwrap()).unwrap();
            mc_invariance_test(&x, spec, &cfg, &k, s.substream(1)).unwrap().p_value
        })
        .collect();
    rejection_rate(&pvals, 0.05).0
}

#[test]
fn isotropic_gaussian_holds_nominal_size() {
    let rate = null_rate(&"gauss-iso(d=3)".parse().unwrap(), &GroupSpec::so(3).unwrap(), 300, 15);
    let sd = (0.05f64 * 0.95 / 300.0).sqrt();
    assert!((rate - 0.05).abs() <= 3.0 * sd, "rate {rate}");
}

#[test]
fn uniform_vmf_holds_nominal_size() {
    let g = Generator::VmfRotated { d: 3, xi: vec![1.0, 0.0, 0.0], kappa: 0.0 };
    let rate = null_rate(&g, &GroupSpec::so(3).unwrap(), 300, 16);
    let sd = (0.05f64 * 0.95 / 300.0).sqrt();
    assert!((rate - 0.05).abs() <= 3.0 * sd, "rate {rate}");
}

#[test]
fn concentrated_vmf_is_detected() {
    let g = Generator::VmfRotated { d: 3, xi: vec![1.0, 0.0, 0.0], kappa: 20.0 };
    let rate = null_rate(&g, &GroupSpec::so(3).unwrap(), 40, 17);
    assert!(rate >= 0.8, "rate {rate}");
}
