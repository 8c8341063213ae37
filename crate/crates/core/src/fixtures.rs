//! Built-in problem instances.
//!
//! `f8_aircraft` is the longitudinal F-8 model used as the primary
//! benchmark. `network20_reduced` is the known reduced model of a
//! 20-node, 4-cluster consensus network (the full network matrices are not
//! available). `clustered_surrogate` is a synthetic slow/fast network built
//! here so bracketing can be exercised on a network-shaped instance; it does
//! not reproduce any reference numbers.

use nalgebra::{DMatrix, DVector};

use crate::problem::{Dims, ProblemConfig};
use crate::reduced::ReducedProblem;
use crate::scalar::Real;

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn identity_rows(n: usize) -> Vec<Vec<f64>> {
    rows(&DMatrix::identity(n, n))
}

/// F-8 aircraft longitudinal dynamics: slow states velocity and angle of
/// attack, fast states pitch rate and pitch angle, one stabilator input.
/// `Q = I₄`, `R = 1`, `π = Iᵉ`, `ε = 0.0336`, horizon 1.
pub fn f8_aircraft() -> ProblemConfig {
    ProblemConfig {
        name: Some("f8-aircraft".into()),
        dims: Dims { m: 2, n: 2, k: 1 },
        epsilon: 0.0336,
        horizon: 1.0,
        a11: vec![vec![-0.195378, -0.676469], vec![1.478265, 0.0]],
        a12: vec![vec![-0.917160, 0.109033], vec![0.0, 0.0]],
        a21: vec![vec![-0.051601, 0.0], vec![0.013579, 0.0]],
        a22: vec![vec![-0.367954, 0.43804], vec![-2.102596, -0.21464]],
        b1: vec![vec![-0.023109], vec![-16.945030]],
        b2: vec![vec![-0.048184], vec![-3.810954]],
        q: identity_rows(4),
        r: vec![vec![1.0]],
        pi11: identity_rows(2),
        pi12: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
        pi22: identity_rows(2),
        z0: vec![-2.0, 3.0, -4.0, 1.0],
    }
}

/// Decoupled scalar instance: the fast state is uncontrolled and does not
/// interact with the slow one.
pub fn scalar_toy() -> ProblemConfig {
    ProblemConfig {
        name: Some("scalar-toy".into()),
        dims: Dims { m: 1, n: 1, k: 1 },
        epsilon: 0.1,
        horizon: 1.0,
        a11: vec![vec![-1.0]],
        a12: vec![vec![0.0]],
        a21: vec![vec![0.0]],
        a22: vec![vec![-2.0]],
        b1: vec![vec![1.0]],
        b2: vec![vec![0.0]],
        q: identity_rows(2),
        r: vec![vec![1.0]],
        pi11: vec![vec![1.0]],
        pi12: vec![vec![0.0]],
        pi22: vec![vec![1.0]],
        z0: vec![1.0, 1.0],
    }
}

/// Initial node values of the 20-node consensus network.
pub const NETWORK20_INITIAL: [f64; 20] = [
    0.316, 0.959, 0.499, 0.739, 0.013, 0.605, 0.577, 0.807, 0.655, 0.878, 0.902, 0.152, 0.193,
    0.791, 0.061, 0.39, 0.3, 0.734, 0.104, 0.793,
];

/// Cluster sizes of the 20-node network.
pub const NETWORK20_CLUSTERS: [usize; 4] = [5, 5, 4, 6];

/// Reduced model of the 20-node, 4-cluster consensus network: aggregated
/// cluster dynamics, control acting through cluster-sum patterns, unit
/// weights, horizon 10.
pub fn network20_reduced<T: Real>() -> ReducedProblem<T> {
    let a = [
        [-0.8000, 0.2667, 0.2667, 0.2667],
        [0.2667, -0.5333, 0.2667, 0.0],
        [0.3333, 0.3333, -1.0, 0.3333],
        [0.2222, 0.0, 0.2222, -0.4444],
    ];
    let gains = [0.2667, 0.2667, 0.3333, 0.2222];
    let k: usize = NETWORK20_CLUSTERS.iter().sum();
    let mut b = DMatrix::zeros(4, k);
    let mut start = 0;
    for (i, &size) in NETWORK20_CLUSTERS.iter().enumerate() {
        for j in start..start + size {
            b[(i, j)] = T::lit(gains[i]);
        }
        start += size;
    }
    ReducedProblem {
        cal_a: DMatrix::from_fn(4, 4, |i, j| T::lit(a[i][j])),
        cal_b: b,
        cal_q: DMatrix::identity(4, 4),
        cal_r: DMatrix::identity(k, k),
        cal_c: DMatrix::zeros(4, k),
        pi11_0: DMatrix::identity(4, 4),
        x0: DVector::from_iterator(4, NETWORK20_INITIAL[..4].iter().map(|&v| T::lit(v))),
        horizon: T::lit(10.0),
    }
}

/// Cluster sizes of the synthetic surrogate network.
pub const SURROGATE_CLUSTERS: [usize; 4] = [3, 3, 2, 4];

/// Orthonormal basis `[U₁ | U₂]` of node space: normalised cluster
/// indicators followed by Helmert contrasts within each cluster.
fn cluster_basis(clusters: &[usize]) -> (DMatrix<f64>, DMatrix<f64>) {
    let nodes: usize = clusters.iter().sum();
    let m = clusters.len();
    let mut u1 = DMatrix::zeros(nodes, m);
    let mut u2 = DMatrix::zeros(nodes, nodes - m);
    let mut start = 0;
    let mut col = 0;
    for (c, &size) in clusters.iter().enumerate() {
        for i in 0..size {
            u1[(start + i, c)] = 1.0 / (size as f64).sqrt();
        }
        for j in 1..size {
            let norm = ((j * (j + 1)) as f64).sqrt();
            for i in 0..j {
                u2[(start + i, col)] = 1.0 / norm;
            }
            u2[(start + j, col)] = -(j as f64) / norm;
            col += 1;
        }
        start += size;
    }
    (u1, u2)
}

fn laplacian(nodes: usize, edges: &[(usize, usize, f64)]) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(nodes, nodes);
    for &(i, j, w) in edges {
        l[(i, j)] -= w;
        l[(j, i)] -= w;
        l[(i, i)] += w;
        l[(j, j)] += w;
    }
    l
}

/// Synthetic 12-node, 4-cluster consensus network in slow/fast coordinates.
///
/// Node dynamics are `v̇ = −(L_int/ε + L_ext) v + u`. In the basis of
/// [`cluster_basis`] the slow states are scaled cluster averages and the fast
/// states are within-cluster contrasts. The fast block is the projected
/// internal Laplacian, and the external coupling enters the fast equation
/// without an ε factor so all matrices are ε-independent. Weights
/// `Q = R = I₁₂`, `π` blocks identity, horizon 10, initial state taken from
/// the first 12 entries of [`NETWORK20_INITIAL`].
pub fn clustered_surrogate(epsilon: f64) -> ProblemConfig {
    let clusters = SURROGATE_CLUSTERS;
    let nodes: usize = clusters.iter().sum();
    let m = clusters.len();
    let n = nodes - m;

    let mut internal = Vec::new();
    let mut start = 0;
    for &size in &clusters {
        for i in 0..size {
            for j in i + 1..size {
                let w = 1.0 + 0.25 * ((3 * i + 5 * j) % 4) as f64;
                internal.push((start + i, start + j, w));
            }
        }
        start += size;
    }
    let external = [
        (0, 3, 0.5),
        (4, 6, 0.4),
        (7, 8, 0.3),
        (11, 1, 0.6),
        (2, 9, 0.2),
        (5, 10, 0.35),
    ];
    let l_int = laplacian(nodes, &internal);
    let l_ext = laplacian(nodes, &external);
    let (u1, u2) = cluster_basis(&clusters);

    let a11 = -(u1.transpose() * &l_ext * &u1);
    let a12 = -(u1.transpose() * &l_ext * &u2);
    let a21 = -(u2.transpose() * &l_ext * &u1);
    let a22 = -(u2.transpose() * &l_int * &u2);
    let a22 = (&a22 + a22.transpose()) * 0.5;
    let v0 = DVector::from_column_slice(&NETWORK20_INITIAL[..nodes]);
    let z1 = u1.transpose() * &v0;
    let z2 = u2.transpose() * &v0;

    ProblemConfig {
        name: Some("clustered-surrogate".into()),
        dims: Dims { m, n, k: nodes },
        epsilon,
        horizon: 10.0,
        a11: rows(&a11),
        a12: rows(&a12),
        a21: rows(&a21),
        a22: rows(&a22),
        b1: rows(&u1.transpose()),
        b2: rows(&u2.transpose()),
        q: identity_rows(nodes),
        r: identity_rows(nodes),
        pi11: identity_rows(m),
        pi12: rows(&DMatrix::zeros(m, n)),
        pi22: identity_rows(n),
        z0: z1.iter().chain(z2.iter()).copied().collect(),
    }
}
