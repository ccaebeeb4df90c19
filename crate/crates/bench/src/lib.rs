//! Shared inputs for the criterion benchmarks under `benches/`.

use symtest_core::{Generator, Points, RngStream};

/// `n` standard Gaussian rows in dimension `d`, fixed by `seed`.
pub fn gaussian_points(n: usize, d: usize, seed: u64) -> Points {
    Generator::GaussianIso { d }
        .sample(n, &mut RngStream::new(seed).rng())
        .expect("isotropic Gaussian sampling cannot fail")
        .x
}
