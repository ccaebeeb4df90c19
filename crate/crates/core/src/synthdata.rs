//! Generative models for simulation studies.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groups::so_inversion;
use crate::points::{norm, Points};

/// Energy threshold of the synthetic label model.
pub const LABEL_THRESHOLD: f64 = 200.0;

/// A data-generating model. Conditional models also produce responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Generator {
    GaussianIso { d: usize },
    GaussianMean { d: usize, mu: Vec<f64> },
    /// Row-major covariance.
    GaussianCov { d: usize, sigma: Vec<f64> },
    /// `N(0, Σ)` with `Σ ~ Wishart(I_d, d)` drawn afresh for every sample.
    WishartCov { d: usize },
    /// Unit diagonal, `1/d` off the diagonal.
    ExchPlus { d: usize },
    /// Unit diagonal, `−1/(d−1)` off the diagonal (singular).
    ExchMinus { d: usize },
    /// `χ_d · U` with `U ~ vMF(ξ, κ)` on the unit sphere.
    VmfRotated { d: usize, xi: Vec<f64>, kappa: f64 },
    /// `X ~ N(0, Σ)`, `Σ ~ Wishart(I_d, d)`; `Y | X ~ N(X, I)`.
    CondGaussShift { d: usize },
    /// As above with `Y | X ~ N(|X|, I)`, elementwise absolute value.
    CondGaussAbs { d: usize },
    /// As above with `Y | X ~ N((Xᵀe₁)·𝟙, I)`.
    CondGaussProj { d: usize },
    /// Two synthetic four-momenta per event; label `Bernoulli(p_hi)` if the
    /// leading energy is at least the threshold, `Bernoulli(p_lo)` otherwise.
    TopQuarkLabel { threshold: f64, p_hi: f64, p_lo: f64 },
}

/// Generated observations, with responses for conditional models.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Points,
    pub y: Option<Points>,
}

impl Generator {
    pub fn top_quark() -> Self {
        Generator::TopQuarkLabel {
            threshold: LABEL_THRESHOLD,
            p_hi: 0.9,
            p_lo: 0.1,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Generator::GaussianIso { d }
            | Generator::GaussianMean { d, .. }
            | Generator::GaussianCov { d, .. }
            | Generator::WishartCov { d }
            | Generator::ExchPlus { d }
            | Generator::ExchMinus { d }
            | Generator::VmfRotated { d, .. }
            | Generator::CondGaussShift { d }
            | Generator::CondGaussAbs { d }
            | Generator::CondGaussProj { d } => *d,
            Generator::TopQuarkLabel { .. } => 8,
        }
    }

    pub fn is_conditional(&self) -> bool {
        matches!(
            self,
            Generator::CondGaussShift { .. }
                | Generator::CondGaussAbs { .. }
                | Generator::CondGaussProj { .. }
                | Generator::TopQuarkLabel { .. }
        )
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::BadParameters(m.to_string()));
        let d = self.dim();
        if d == 0 {
            return bad("dimension must be positive");
        }
        match self {
            Generator::GaussianMean { mu, .. } if mu.len() != d => bad("mean has wrong length"),
            Generator::GaussianCov { sigma, .. } if sigma.len() != d * d => bad("covariance has wrong size"),
            Generator::ExchMinus { d } if *d < 2 => bad("exch-minus needs d ≥ 2"),
            Generator::VmfRotated { xi, kappa, .. } => {
                if xi.len() != d || norm(xi) == 0.0 {
                    bad("vMF mean direction must be a nonzero d-vector")
                } else if !(*kappa >= 0.0) {
                    bad("vMF concentration must be non-negative")
                } else if d < 2 {
                    bad("vMF needs d ≥ 2")
                } else {
                    Ok(())
                }
            }
            Generator::TopQuarkLabel { p_hi, p_lo, .. } if !(0.0..=1.0).contains(p_hi) || !(0.0..=1.0).contains(p_lo) => {
                bad("label probabilities must lie in [0, 1]")
            }
            _ => Ok(()),
        }
    }

    /// Draws `n` i.i.d. rows (and responses for conditional models).
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Sample> {
        self.validate()?;
        if n == 0 {
            return Err(Error::EmptySample);
        }
        let d = self.dim();
        let gauss = |cov: &DMatrix<f64>, mean: Option<&[f64]>, rng: &mut R| -> Result<Points> {
            let root = covariance_root(cov)?;
            Ok(gaussian_rows(n, &root, mean, rng))
        };
        Ok(match self {
            Generator::GaussianIso { .. } => Sample {
                x: gauss(&DMatrix::identity(d, d), None, rng)?,
                y: None,
            },
            Generator::GaussianMean { mu, .. } => Sample {
                x: gauss(&DMatrix::identity(d, d), Some(mu), rng)?,
                y: None,
            },
            Generator::GaussianCov { sigma, .. } => Sample {
                x: gauss(&DMatrix::from_row_slice(d, d, sigma), None, rng)?,
                y: None,
            },
            Generator::WishartCov { .. } => {
                let sigma = wishart_identity(d, d, rng);
                Sample {
                    x: gauss(&sigma, None, rng)?,
                    y: None,
                }
            }
            Generator::ExchPlus { .. } => Sample {
                x: gauss(&exch_plus(d), None, rng)?,
                y: None,
            },
            Generator::ExchMinus { .. } => Sample {
                x: gauss(&exch_minus(d), None, rng)?,
                y: None,
            },
            Generator::VmfRotated { xi, kappa, .. } => {
                let mut x = Points::zeros(n, d);
                for i in 0..n {
                    let u = vmf_sample(xi, *kappa, rng)?;
                    let r = chi_d_sample(d, rng);
                    for (o, v) in x.row_mut(i).iter_mut().zip(&u) {
                        *o = r * v;
                    }
                }
                Sample { x, y: None }
            }
            Generator::CondGaussShift { .. } | Generator::CondGaussAbs { .. } | Generator::CondGaussProj { .. } => {
                let sigma = wishart_identity(d, d, rng);
                let x = gauss(&sigma, None, rng)?;
                let mut y = Points::zeros(n, d);
                for i in 0..n {
                    let xi = x.row(i);
                    let out = y.row_mut(i);
                    for (c, o) in out.iter_mut().enumerate() {
                        let mean = match self {
                            Generator::CondGaussShift { .. } => xi[c],
                            Generator::CondGaussAbs { .. } => xi[c].abs(),
                            _ => xi[0],
                        };
                        *o = mean + rng.sample::<f64, _>(StandardNormal);
                    }
                }
                Sample { x, y: Some(y) }
            }
            Generator::TopQuarkLabel { threshold, p_hi, p_lo } => {
                let mut x = Points::zeros(n, 8);
                let mut y = Points::zeros(n, 1);
                for i in 0..n {
                    let row = x.row_mut(i);
                    four_momentum(rng, &mut row[..4]);
                    four_momentum(rng, &mut row[4..]);
                    if row[4] > row[0] {
                        for c in 0..4 {
                            row.swap(c, c + 4);
                        }
                    }
                    let p = if row[0] >= *threshold { *p_hi } else { *p_lo };
                    y.row_mut(i)[0] = if rng.random::<f64>() < p { 1.0 } else { 0.0 };
                }
                Sample { x, y: Some(y) }
            }
        })
    }
}

/// Label draw of the threshold model for a given leading energy.
pub fn threshold_label<R: Rng + ?Sized>(energy: f64, threshold: f64, p_hi: f64, p_lo: f64, rng: &mut R) -> f64 {
    let p = if energy >= threshold { p_hi } else { p_lo };
    if rng.random::<f64>() < p {
        1.0
    } else {
        0.0
    }
}

/// On-shell four-momentum `(E, p)` with isotropic direction, log-normal
/// momentum around 200 and a small mass.
fn four_momentum<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    let dir: Vec<f64> = loop {
        let v: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();
        let r = norm(&v);
        if r > 1e-12 {
            break v.iter().map(|c| c / r).collect();
        }
    };
    let z: f64 = rng.sample(StandardNormal);
    let p = 200.0 * (0.5 * z).exp();
    let mass = 5.0 * rng.random::<f64>();
    out[0] = (p * p + mass * mass).sqrt();
    for c in 0..3 {
        out[c + 1] = p * dir[c];
    }
}

/// `√(χ²_d)`: the norm of a standard Gaussian vector in `ℝ^d`.
pub fn chi_d_sample<R: Rng + ?Sized>(d: usize, rng: &mut R) -> f64 {
    (0..d).map(|_| rng.sample::<f64, _>(StandardNormal).powi(2)).sum::<f64>().sqrt()
}

/// `Wishart(I_d, dof)` by the Bartlett decomposition `Σ = AAᵀ`.
pub fn wishart_identity<R: Rng + ?Sized>(d: usize, dof: usize, rng: &mut R) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(d, d);
    for i in 0..d {
        a[(i, i)] = chi_d_sample(dof - i, rng);
        for j in 0..i {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    &a * a.transpose()
}

pub fn exch_plus(d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { 1.0 / d as f64 })
}

pub fn exch_minus(d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { -1.0 / (d as f64 - 1.0) })
}

/// A matrix `L` with `LLᵀ = Σ`: Cholesky when Σ is positive definite,
/// otherwise the symmetric square root of a positive semidefinite Σ.
pub fn covariance_root(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = sigma.nrows();
    if sigma.ncols() != d {
        return Err(Error::BadParameters("covariance must be square".into()));
    }
    if (sigma - sigma.transpose()).amax() > 1e-10 * sigma.amax().max(1.0) {
        return Err(Error::BadParameters("covariance must be symmetric".into()));
    }
    if let Some(ch) = sigma.clone().cholesky() {
        return Ok(ch.l());
    }
    let eig = SymmetricEigen::new(sigma.clone());
    let scale = eig.eigenvalues.amax().max(1.0);
    if eig.eigenvalues.min() < -1e-10 * scale {
        return Err(Error::BadParameters("covariance is not positive semidefinite".into()));
    }
    let sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
    Ok(&eig.eigenvectors * sqrt * eig.eigenvectors.transpose())
}

fn gaussian_rows<R: Rng + ?Sized>(n: usize, root: &DMatrix<f64>, mean: Option<&[f64]>, rng: &mut R) -> Points {
    let d = root.nrows();
    let mut x = Points::zeros(n, d);
    for i in 0..n {
        let z = DVector::from_fn(d, |_, _| rng.sample(StandardNormal));
        let v = root * z;
        for (c, o) in x.row_mut(i).iter_mut().enumerate() {
            *o = v[c] + mean.map_or(0.0, |m| m[c]);
        }
    }
    x
}

/// One draw from the von Mises–Fisher law on the unit sphere in `ℝ^d`
/// (Wood's rejection sampler).
pub fn vmf_sample<R: Rng + ?Sized>(xi: &[f64], kappa: f64, rng: &mut R) -> Result<Vec<f64>> {
    let d = xi.len();
    if d < 2 || !(kappa >= 0.0) {
        return Err(Error::BadParameters("vMF needs d ≥ 2 and κ ≥ 0".into()));
    }
    let dm1 = (d - 1) as f64;
    let b = dm1 / (2.0 * kappa + (4.0 * kappa * kappa + dm1 * dm1).sqrt());
    let x0 = (1.0 - b) / (1.0 + b);
    let c = kappa * x0 + dm1 * (1.0 - x0 * x0).ln();
    let beta = Beta::new(dm1 / 2.0, dm1 / 2.0).map_err(|e| Error::BadParameters(e.to_string()))?;
    let w = loop {
        let z = beta.sample(rng);
        let w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
        let u: f64 = rng.random();
        if kappa * w + dm1 * (1.0 - x0 * w).ln() - c >= u.ln() {
            break w;
        }
    };
    let v: Vec<f64> = loop {
        let v: Vec<f64> = (0..d - 1).map(|_| rng.sample(StandardNormal)).collect();
        let r = norm(&v);
        if r > 1e-12 {
            break v.iter().map(|c| c / r).collect();
        }
    };
    let s = (1.0 - w * w).max(0.0).sqrt();
    let mut local = Vec::with_capacity(d);
    local.push(w);
    local.extend(v.iter().map(|c| s * c));
    // Rotate e₁ onto the mean direction.
    let rot = so_inversion(xi)?;
    let mut out = vec![0.0; d];
    rot.apply_into(&local, &mut out);
    Ok(out)
}

fn parse_args(body: &str) -> Vec<(String, String)> {
    body.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|kv| match kv.split_once('=') {
            Some((k, v)) => (k.trim().to_string(), v.trim().to_string()),
            None => (String::new(), kv.trim().to_string()),
        })
        .collect()
}

/// Parses `0.4e1` as `0.4·e₁` in `ℝ^d`, or a `;`-separated vector.
fn parse_vector(s: &str, d: usize) -> Option<Vec<f64>> {
    if let Some((a, k)) = s.rsplit_once('e') {
        if let (Ok(a), Ok(k)) = (a.parse::<f64>(), k.parse::<usize>()) {
            if (1..=d).contains(&k) && !s.contains(';') {
                let mut v = vec![0.0; d];
                v[k - 1] = a;
                return Some(v);
            }
        }
    }
    let v: Vec<f64> = s.split(';').map(|t| t.trim().parse().ok()).collect::<Option<_>>()?;
    (v.len() == d).then_some(v)
}

impl FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let fail = |reason: &str| Error::InvalidDescriptor {
            input: s.to_string(),
            reason: reason.to_string(),
        };
        let t = s.trim().to_ascii_lowercase();
        let (name, body) = match t.split_once('(') {
            Some((n, rest)) => (n.trim().to_string(), rest.strip_suffix(')').ok_or_else(|| fail("missing ')'"))?.to_string()),
            None => (t.clone(), String::new()),
        };
        let args = parse_args(&body);
        let get = |key: &str| args.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
        let dim = || -> Result<usize> {
            get("d").ok_or_else(|| fail("missing d=..."))?.parse().map_err(|_| fail("d is not an integer"))
        };
        let g = match name.as_str() {
            "gauss-iso" => Generator::GaussianIso { d: dim()? },
            "gauss-mean" => {
                let d = dim()?;
                let mu = parse_vector(get("mu").ok_or_else(|| fail("missing mu=..."))?, d).ok_or_else(|| fail("bad mu"))?;
                Generator::GaussianMean { d, mu }
            }
            "wishart" | "gauss-wishart" => Generator::WishartCov { d: dim()? },
            "exch-plus" => Generator::ExchPlus { d: dim()? },
            "exch-minus" => Generator::ExchMinus { d: dim()? },
            "vmf" => {
                let d = dim()?;
                let kappa = get("kappa").unwrap_or("1").parse().map_err(|_| fail("bad kappa"))?;
                let xi = match get("xi") {
                    Some(v) => parse_vector(v, d).ok_or_else(|| fail("bad xi"))?,
                    None => {
                        let mut v = vec![0.0; d];
                        v[0] = 1.0;
                        v
                    }
                };
                Generator::VmfRotated { d, xi, kappa }
            }
            "cond-shift" => Generator::CondGaussShift { d: dim()? },
            "cond-abs" => Generator::CondGaussAbs { d: dim()? },
            "cond-proj" => Generator::CondGaussProj { d: dim()? },
            "top-quark" => Generator::top_quark(),
            _ => return Err(fail("unknown generator")),
        };
        g.validate().map_err(|e| fail(&e.to_string()))?;
        Ok(g)
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let vec = |v: &[f64]| v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";");
        match self {
            Generator::GaussianIso { d } => write!(f, "gauss-iso(d={d})"),
            Generator::GaussianMean { d, mu } => write!(f, "gauss-mean(d={d},mu={})", vec(mu)),
            Generator::GaussianCov { d, .. } => write!(f, "gauss-cov(d={d})"),
            Generator::WishartCov { d } => write!(f, "wishart(d={d})"),
            Generator::ExchPlus { d } => write!(f, "exch-plus(d={d})"),
            Generator::ExchMinus { d } => write!(f, "exch-minus(d={d})"),
            Generator::VmfRotated { d, xi, kappa } => write!(f, "vmf(d={d},xi={},kappa={kappa})", vec(xi)),
            Generator::CondGaussShift { d } => write!(f, "cond-shift(d={d})"),
            Generator::CondGaussAbs { d } => write!(f, "cond-abs(d={d})"),
            Generator::CondGaussProj { d } => write!(f, "cond-proj(d={d})"),
            Generator::TopQuarkLabel { .. } => write!(f, "top-quark"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn iso_mean_near_zero() {
        let mut rng = RngStream::new(1).rng();
        let s = Generator::GaussianIso { d: 2 }.sample(10_000, &mut rng).unwrap();
        for c in 0..2 {
            let m = s.x.rows().map(|r| r[c]).sum::<f64>() / 10_000.0;
            assert!(m.abs() <= 4.0 / 100.0);
        }
    }

    #[test]
    fn exchangeable_covariances_are_psd() {
        for d in [2, 5, 10] {
            assert!(exch_plus(d).symmetric_eigenvalues().min() >= -1e-10);
            assert!(exch_minus(d).symmetric_eigenvalues().min() >= -1e-10);
        }
        let mut rng = RngStream::new(2).rng();
        let s = "exch-minus(d=10)".parse::<Generator>().unwrap().sample(10_000, &mut rng).unwrap();
        let sums: Vec<f64> = s.x.rows().map(|r| r.iter().sum()).collect();
        let var = sums.iter().map(|v| v * v).sum::<f64>() / sums.len() as f64;
        assert!(var <= 0.01, "{var}");
    }

    #[test]
    fn label_frequency_above_threshold() {
        let mut rng = RngStream::new(3).rng();
        let hits: f64 = (0..10_000).map(|_| threshold_label(250.0, 200.0, 0.9, 0.1, &mut rng)).sum();
        let f = hits / 10_000.0;
        assert!((f - 0.9).abs() <= 4.0 * (0.09f64 / 10_000.0).sqrt());
    }

    #[test]
    fn top_quark_rows_are_on_shell() {
        let mut rng = RngStream::new(4).rng();
        let s = Generator::top_quark().sample(200, &mut rng).unwrap();
        for r in s.x.rows() {
            for p in r.chunks(4) {
                let q = crate::groups::minkowski_q(p);
                assert!(q >= -1e-6 && q <= 25.0 + 1e-6);
            }
            assert!(r[0] >= r[4]);
        }
        let y = s.y.unwrap();
        assert!(y.as_slice().iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn chi_moments() {
        let mut rng = RngStream::new(5).rng();
        let n = 10_000.0;
        let d1: Vec<f64> = (0..10_000).map(|_| chi_d_sample(1, &mut rng)).collect();
        let m1 = d1.iter().sum::<f64>() / n;
        let mean1 = (2.0 / std::f64::consts::PI).sqrt();
        assert!((m1 - mean1).abs() <= 4.0 * (1.0 - mean1 * mean1).sqrt() / 100.0);
        let d2: Vec<f64> = (0..10_000).map(|_| chi_d_sample(2, &mut rng)).collect();
        let m2 = d2.iter().sum::<f64>() / n;
        // Γ(3/2)√2/Γ(1) = √(π/2)
        let mean2 = (std::f64::consts::PI / 2.0).sqrt();
        assert!((m2 - mean2).abs() <= 4.0 * (2.0 - mean2 * mean2).sqrt() / 100.0);
        assert!(d1.iter().chain(&d2).all(|&v| v >= 0.0));
    }

    #[test]
    fn wishart_is_psd() {
        let mut rng = RngStream::new(6).rng();
        for _ in 0..100 {
            let w = wishart_identity(4, 4, &mut rng);
            assert!((&w - w.transpose()).amax() < 1e-12);
            assert!(w.symmetric_eigenvalues().min() >= -1e-9);
        }
    }

    #[test]
    fn wishart_mean_is_dof_times_identity() {
        let mut rng = RngStream::new(7).rng();
        let mut acc = DMatrix::zeros(3, 3);
        for _ in 0..4000 {
            acc += wishart_identity(3, 3, &mut rng);
        }
        acc /= 4000.0;
        assert!((acc - DMatrix::identity(3, 3) * 3.0).amax() < 0.25);
    }

    #[test]
    fn vmf_concentrates_and_is_unit() {
        let mut rng = RngStream::new(8).rng();
        let xi = [0.0, 0.0, 2.0];
        let mut mean_dot = 0.0;
        for _ in 0..2000 {
            let u = vmf_sample(&xi, 10.0, &mut rng).unwrap();
            assert!((norm(&u) - 1.0).abs() < 1e-12);
            mean_dot += u[2];
        }
        mean_dot /= 2000.0;
        // E[ξᵀU] = coth κ − 1/κ in three dimensions
        let expect = 1.0 / 10f64.tanh() - 0.1;
        assert!((mean_dot - expect).abs() < 0.02);
        let u0: f64 = (0..2000).map(|_| vmf_sample(&xi, 0.0, &mut rng).unwrap()[2]).sum::<f64>() / 2000.0;
        assert!(u0.abs() < 0.06);
    }

    #[test]
    fn bad_parameters() {
        let mut rng = RngStream::new(9).rng();
        let g = Generator::GaussianCov { d: 2, sigma: vec![1.0, 2.0, 2.0, 1.0] };
        assert!(matches!(g.sample(5, &mut rng), Err(Error::BadParameters(_))));
        let g = Generator::VmfRotated { d: 3, xi: vec![1.0, 0.0, 0.0], kappa: -1.0 };
        assert!(matches!(g.sample(5, &mut rng), Err(Error::BadParameters(_))));
    }

    #[test]
    fn descriptors() {
        let g: Generator = "gauss-mean(d=4,mu=0.4e1)".parse().unwrap();
        assert_eq!(g, Generator::GaussianMean { d: 4, mu: vec![0.4, 0.0, 0.0, 0.0] });
        for s in ["gauss-iso(d=4)", "exch-minus(d=10)", "cond-abs(d=4)", "wishart(d=3)", "top-quark"] {
            let g: Generator = s.parse().unwrap();
            assert_eq!(g.to_string(), s);
        }
        assert!("nope(d=2)".parse::<Generator>().is_err());
        assert!("gauss-iso".parse::<Generator>().is_err());
    }
}
