//! Small distributional helpers: Kolmogorov–Smirnov distances, the
//! Kolmogorov limit law, binomial tails and Monte Carlo p-values.

use rand::Rng;

/// Survival function of the Kolmogorov distribution,
/// `Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} exp(−2k²λ²)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-17 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic p-value of a one-sample KS distance `d` on `n` observations,
/// with Stephens' small-sample correction of the scaling.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)
}

/// Sup distance between the ECDF of `values` and a continuous or right-
/// continuous step CDF `cdf`, evaluated at the sample points and their left
/// limits.
pub fn ks_distance<F: Fn(f64) -> f64>(values: &[f64], cdf: F) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j + 1 < v.len() && v[j + 1] == v[i] {
            j += 1;
        }
        let f = cdf(v[i]);
        d = d.max((f - (j + 1) as f64 / n).abs());
        d = d.max((f - i as f64 / n).abs());
        i = j + 1;
    }
    d
}

/// Two-sample KS distance `sup_u |F̂_a(u) − F̂_b(u)|` by a merged scan over
/// sorted inputs. Tied values are consumed together before comparing.
pub fn ks_two_sample_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let u = a[i].min(b[j]);
        while i < a.len() && a[i] <= u {
            i += 1;
        }
        while j < b.len() && b[j] <= u {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    // Once one side is exhausted the gap only shrinks toward zero.
    d
}

/// `Σ_{ℓ=0}^{upper} C(n, ℓ) p^ℓ (1−p)^{n−ℓ}`; zero when `upper < 0`.
pub fn binomial_cdf(upper: i64, n: u64, p: f64) -> f64 {
    if upper < 0 {
        return 0.0;
    }
    if upper as u64 >= n {
        return 1.0;
    }
    if p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let mut log_choose = 0.0;
    let mut total = 0.0;
    for l in 0..=upper as u64 {
        if l > 0 {
            log_choose += ((n - l + 1) as f64).ln() - (l as f64).ln();
        }
        total += (log_choose + l as f64 * lp + (n - l) as f64 * lq).exp();
    }
    total.min(1.0)
}

/// Monte Carlo p-value `(1 + #{b : T_b ≥ T}) / (1 + B)`.
pub fn mc_pvalue(observed: f64, null: &[f64]) -> f64 {
    let exceed = null.iter().filter(|&&t| t >= observed).count();
    (1 + exceed) as f64 / (1 + null.len()) as f64
}

/// Monte Carlo p-value with ties broken by independent uniform marks, so
/// that discrete statistics still give an exact-size test.
pub fn mc_pvalue_randomized<R: Rng + ?Sized>(observed: f64, null: &[f64], rng: &mut R) -> f64 {
    let u0: f64 = rng.random();
    let mut exceed = 0usize;
    for &t in null {
        if t > observed {
            exceed += 1;
        } else if t == observed {
            let u: f64 = rng.random();
            if u >= u0 {
                exceed += 1;
            }
        }
    }
    (1 + exceed) as f64 / (1 + null.len()) as f64
}

/// Mean and binomial standard error of a rejection indicator sequence.
pub fn rejection_rate(pvalues: &[f64], alpha: f64) -> (f64, f64) {
    if pvalues.is_empty() {
        return (0.0, 0.0);
    }
    let n = pvalues.len() as f64;
    let r = pvalues.iter().filter(|&&p| p <= alpha).count() as f64 / n;
    (r, (r * (1.0 - r) / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kolmogorov_reference_values() {
        // Tabulated critical values of the limit law.
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-4);
        assert!((kolmogorov_sf(1.2238) - 0.10).abs() < 1e-4);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
    }

    #[test]
    fn ks_distance_uniform_grid() {
        let v: Vec<f64> = (0..10).map(|i| (i as f64 + 0.5) / 10.0).collect();
        let d = ks_distance(&v, |t| t.clamp(0.0, 1.0));
        assert!((d - 0.05).abs() < 1e-12);
    }

    #[test]
    fn two_sample_ks_with_ties() {
        assert_eq!(ks_two_sample_sorted(&[1.0], &[-1.0]), 1.0);
        assert_eq!(ks_two_sample_sorted(&[0.0, 1.0], &[0.0, 1.0]), 0.0);
        let d = ks_two_sample_sorted(&[0.0, 0.0, 1.0], &[0.0, 1.0, 1.0]);
        assert!((d - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn binomial_matches_direct_sum() {
        assert_eq!(binomial_cdf(0, 4, 0.0), 1.0);
        assert_eq!(binomial_cdf(2, 4, 1.0), 0.0);
        assert!((binomial_cdf(0, 4, 0.5) - 0.0625).abs() < 1e-15);
        let direct: f64 = (0..=3u32)
            .map(|l| {
                let c = [1.0, 10.0, 45.0, 120.0][l as usize];
                c * 0.3f64.powi(l as i32) * 0.7f64.powi(10 - l as i32)
            })
            .sum();
        assert!((binomial_cdf(3, 10, 0.3) - direct).abs() < 1e-13);
        assert_eq!(binomial_cdf(-1, 10, 0.3), 0.0);
    }

    #[test]
    fn pvalue_formula() {
        assert_eq!(mc_pvalue(1.0, &[0.0, 0.5, 0.9, 0.1]), 0.2);
        assert_eq!(mc_pvalue(1.0, &[1.0, 2.0, 3.0, 1.0]), 1.0);
        assert_eq!(mc_pvalue(1.0, &[]), 1.0);
    }
}
