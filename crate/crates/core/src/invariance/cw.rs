use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::groups::GroupElement;
use crate::points::{dot, norm, Points};
use crate::stats::ks_two_sample_sorted;

/// Worst-case KS distance between projections of the sample and of its
/// transformed copies: `max_{ℓ,j} sup_u |F̂_{t_jᵀX}(u) − F̂_{t_jᵀ(g_ℓX)}(u)|`.
pub fn cw_statistic(x: &Points, transforms: &[GroupElement], directions: &Points) -> Result<f64> {
    if x.is_empty() || transforms.is_empty() || directions.is_empty() {
        return Err(Error::EmptySample);
    }
    check_dim(x.dim(), directions.dim())?;
    for t in directions.rows() {
        if (norm(t) - 1.0).abs() > 1e-9 {
            return Err(Error::BadParameters("projection directions must be unit vectors".into()));
        }
    }
    for g in transforms {
        check_dim(x.dim(), g.dim())?;
    }
    let n = x.len();
    let mut gx = vec![Points::zeros(n, x.dim()); transforms.len()];
    for (g, out) in transforms.iter().zip(gx.iter_mut()) {
        for i in 0..n {
            g.act_into(x.row(i), out.row_mut(i));
        }
    }
    let mut worst: f64 = 0.0;
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    for t in directions.rows() {
        for (ai, xi) in a.iter_mut().zip(x.rows()) {
            *ai = dot(t, xi);
        }
        a.sort_by(f64::total_cmp);
        for g in &gx {
            for (bi, yi) in b.iter_mut().zip(g.rows()) {
                *bi = dot(t, yi);
            }
            b.sort_by(f64::total_cmp);
            worst = worst.max(ks_two_sample_sorted(&a, &b));
        }
    }
    Ok(worst)
}

/// `count` directions uniform on the unit sphere in `ℝ^dim`.
pub fn random_directions<R: Rng + ?Sized>(count: usize, dim: usize, rng: &mut R) -> Points {
    let mut out = Points::zeros(0, dim);
    while out.len() < count {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let r = norm(&v);
        if r > 1e-12 {
            let u: Vec<f64> = v.iter().map(|c| c / r).collect();
            out.push_row(&u).expect("dimension fixed above");
        }
    }
    out
}
