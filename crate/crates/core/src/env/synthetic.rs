use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{ItemSet, Theta};
use crate::error::{invalid, Error, Result};

/// `x ↦ (x / (√2‖x‖), 1/√2)`: a unit vector whose inner product with any
/// other transformed vector lies in `[0, 1]`.
pub fn feature_transform(x: &[f64]) -> Result<Vec<f64>> {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !norm.is_finite() {
        return invalid("raw feature vector is not finite");
    }
    if norm == 0.0 {
        return Err(Error::Degenerate("cannot transform the zero vector".into()));
    }
    let s = std::f64::consts::SQRT_2;
    let mut out: Vec<f64> = x.iter().map(|v| v / (s * norm)).collect();
    out.push(1.0 / s);
    Ok(out)
}

fn gaussian_direction(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        if v.iter().any(|&x| x != 0.0) {
            return v;
        }
    }
}

/// `n_items` items and a parameter in `dim` dimensions, built from standard
/// Gaussian draws in `dim − 1` dimensions and passed through
/// [`feature_transform`]. Deterministic in `seed`.
pub fn generate_synthetic(n_items: usize, dim: usize, seed: u64) -> Result<(ItemSet, Theta)> {
    if n_items < 1 {
        return invalid("need at least one item");
    }
    if dim < 2 {
        return invalid("synthetic instances need dimension at least 2");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vectors = Vec::with_capacity(n_items);
    for _ in 0..n_items {
        vectors.push(feature_transform(&gaussian_direction(&mut rng, dim - 1))?);
    }
    let theta = Theta(feature_transform(&gaussian_direction(&mut rng, dim - 1))?);
    Ok((ItemSet::new(vectors)?, theta))
}
