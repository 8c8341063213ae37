//! Random well-posed instances.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spocb::{Dims, ProblemConfig};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn dense(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.gen_range(-scale..scale)).collect())
        .collect()
}

/// `L Lᵀ + shift·I` for a random `L`.
fn spd(rng: &mut impl Rng, n: usize, shift: f64) -> Vec<Vec<f64>> {
    let l = dense(rng, n, n, 1.0);
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let s: f64 = (0..n).map(|r| l[i][r] * l[j][r]).sum();
                    s + if i == j { shift } else { 0.0 }
                })
                .collect()
        })
        .collect()
}

/// An instance with negative-definite `A22`, positive-definite weights and a
/// small `π12`, so every standing assumption holds generically.
pub fn instance(rng: &mut impl Rng, m: usize, n: usize, k: usize, epsilon: f64) -> ProblemConfig {
    let s = spd(rng, n, 0.5);
    let skew = dense(rng, n, n, 0.5);
    let a22 = (0..n)
        .map(|i| (0..n).map(|j| -s[i][j] + skew[i][j] - skew[j][i]).collect())
        .collect();
    ProblemConfig {
        name: Some("random".into()),
        dims: Dims { m, n, k },
        epsilon,
        horizon: rng.gen_range(0.5..2.0),
        a11: dense(rng, m, m, 1.0),
        a12: dense(rng, m, n, 1.0),
        a21: dense(rng, n, m, 1.0),
        a22,
        b1: dense(rng, m, k, 1.0),
        b2: dense(rng, n, k, 1.0),
        q: spd(rng, m + n, 0.2),
        r: spd(rng, k, 0.5),
        pi11: spd(rng, m, 1.0),
        pi12: dense(rng, m, n, 0.1),
        pi22: spd(rng, n, 1.0),
        z0: (0..m + n).map(|_| rng.gen_range(-2.0..2.0)).collect(),
    }
}
