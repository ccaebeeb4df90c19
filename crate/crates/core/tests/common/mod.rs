//! Naive enumeration oracles shared by integration and acceptance tests.
//! Everything here is written from the defining formulas with plain loops and
//! dense matrices, independent of the library's summation code.
#![allow(dead_code)]

use nalgebra::DMatrix;
use symtest_core::{GroupElement, Points};

pub type KernelFn<'a> = &'a dyn Fn(&[f64], &[f64]) -> f64;

pub fn act(g: &GroupElement, x: &[f64]) -> Vec<f64> {
    let m = g.to_matrix();
    (0..x.len()).map(|r| (0..x.len()).map(|c| m[(r, c)] * x[c]).sum()).collect()
}

pub fn mmd_u(x: &Points, y: &Points, k: KernelFn) -> f64 {
    let (n1, n2) = (x.len(), y.len());
    let mut sx = 0.0;
    for i in 0..n1 {
        for j in 0..n1 {
            if i != j {
                sx += k(x.row(i), x.row(j));
            }
        }
    }
    let mut sy = 0.0;
    for i in 0..n2 {
        for j in 0..n2 {
            if i != j {
                sy += k(y.row(i), y.row(j));
            }
        }
    }
    let mut sxy = 0.0;
    for i in 0..n1 {
        for j in 0..n2 {
            sxy += k(x.row(i), y.row(j));
        }
    }
    let (a, b) = (n1 as f64, n2 as f64);
    sx / (a * (a - 1.0)) + sy / (b * (b - 1.0)) - 2.0 * sxy / (a * b)
}

pub fn mmd_v(x: &Points, y: &Points, k: KernelFn) -> f64 {
    let (a, b) = (x.len() as f64, y.len() as f64);
    let mut total = 0.0;
    for p in x.rows() {
        for q in x.rows() {
            total += k(p, q) / (a * a);
        }
    }
    for p in y.rows() {
        for q in y.rows() {
            total += k(p, q) / (b * b);
        }
    }
    for p in x.rows() {
        for q in y.rows() {
            total -= 2.0 * k(p, q) / (a * b);
        }
    }
    total
}

/// `g[ℓ][i]`, `h[r][j]`: draws per slot and observation.
pub fn invariance_u(x: &Points, g: &[Vec<GroupElement>], h: &[Vec<GroupElement>], k: KernelFn) -> f64 {
    let n = x.len();
    let m = g.len() as f64;
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let mut term = k(x.row(i), x.row(j));
            for gl in g {
                for hr in h {
                    term += k(&act(&gl[i], x.row(i)), &act(&hr[j], x.row(j))) / (m * m);
                }
            }
            for gl in g {
                term -= 2.0 / m * k(x.row(i), &act(&gl[j], x.row(j)));
            }
            total += term;
        }
    }
    total / (n as f64 * (n as f64 - 1.0))
}

pub fn shortcut(x: &Points, g: &[Vec<GroupElement>], k: KernelFn) -> f64 {
    let n = x.len();
    let m = g.len() as f64;
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                total += k(x.row(i), x.row(j));
                for gl in g {
                    total -= k(x.row(i), &act(&gl[j], x.row(j))) / m;
                }
            }
        }
    }
    total / (n as f64 * (n as f64 - 1.0))
}

fn ecdf(values: &[f64], u: f64) -> f64 {
    values.iter().filter(|&&v| v <= u).count() as f64 / values.len() as f64
}

/// Worst-case KS distance, evaluating both ECDFs at every observed projection.
pub fn cw(x: &Points, transforms: &[GroupElement], dirs: &Points) -> f64 {
    let mut worst: f64 = 0.0;
    for t in dirs.rows() {
        let proj = |p: &[f64]| p.iter().zip(t).map(|(a, b)| a * b).sum::<f64>();
        let a: Vec<f64> = x.rows().map(proj).collect();
        for g in transforms {
            let b: Vec<f64> = x.rows().map(|r| proj(&act(g, r))).collect();
            for &u in a.iter().chain(&b) {
                worst = worst.max((ecdf(&a, u) - ecdf(&b, u)).abs());
            }
        }
    }
    worst
}

fn gram(p: &Points, k: KernelFn) -> DMatrix<f64> {
    DMatrix::from_fn(p.len(), p.len(), |i, j| k(p.row(i), p.row(j)))
}

/// `(1/n) Tr(R H (K_X∘K_M) H R · R H K_Z H R)` with `R = ε(HK_MH + εI)⁻¹`.
pub fn kci(x: &Points, z: &Points, m: &Points, kx: KernelFn, kz: KernelFn, km: KernelFn, eps: f64) -> f64 {
    let n = x.len();
    let h = DMatrix::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64);
    let kmm = gram(m, km);
    let kxm = gram(x, kx).component_mul(&kmm);
    let r = (&h * &kmm * &h + DMatrix::identity(n, n) * eps).try_inverse().unwrap() * eps;
    let a = &r * (&h * kxm * &h) * &r;
    let b = &r * (&h * gram(z, kz) * &h) * &r;
    (a * b).trace() / n as f64
}

/// Swap odds from the kernel conditional density estimate
/// `f(z | m) ∝ Σ_r k_Z(z, Z_r) k_M(m, M_r)`.
pub fn swap_odds(z: &Points, m: &Points, kz: KernelFn, km: KernelFn, i: usize, j: usize) -> f64 {
    let f = |zz: &[f64], mm: &[f64]| -> f64 {
        let num: f64 = (0..z.len()).map(|r| kz(zz, z.row(r)) * km(mm, m.row(r))).sum();
        let den: f64 = (0..z.len()).map(|r| km(mm, m.row(r))).sum();
        num / den
    };
    f(z.row(j), m.row(i)) * f(z.row(i), m.row(j)) / (f(z.row(i), m.row(i)) * f(z.row(j), m.row(j)))
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    if want == 0.0 {
        got.abs()
    } else {
        ((got - want) / want).abs()
    }
}
