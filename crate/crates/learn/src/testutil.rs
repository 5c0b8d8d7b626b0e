use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::Dataset;

/// Isotropic Gaussian blobs: class centres drawn uniformly from the box
/// (-10, 10)^d with a fixed stream, `per_class` samples of spread `sd` each.
/// Centres depend only on `(lmax, d)`, so calls with different seeds draw
/// from the same distribution.
pub fn blobs(lmax: usize, per_class: usize, d: usize, sd: f64, seed: u64) -> Dataset {
    let mut centre_rng = ChaCha8Rng::seed_from_u64(0xb10b);
    let centres = Array2::from_shape_fn((lmax, d), |_| centre_rng.gen_range(-10.0..10.0));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sd).unwrap();
    let n = lmax * per_class;
    let y: Vec<usize> = (0..n).map(|i| i % lmax).collect();
    let x = Array2::from_shape_fn((n, d), |(i, j)| centres[[y[i], j]] + normal.sample(&mut rng));
    Dataset::new(x, y, lmax).unwrap()
}
