//! Quadrature and finite differences on the integrator's output grid.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Quadrature rule bound to a sampled trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuadratureRule {
    /// Composite three-point Gauss-Lobatto (Simpson) on panels
    /// `(t[2i], t[2i+1], t[2i+2])` whose middle node is the panel midpoint.
    GaussLobatto3,
    /// Composite trapezoid; fallback for grids without panel structure.
    Trapezoid,
}

impl QuadratureRule {
    pub fn name(self) -> &'static str {
        match self {
            QuadratureRule::GaussLobatto3 => "gauss-lobatto-3",
            QuadratureRule::Trapezoid => "trapezoid",
        }
    }

    /// Picks Gauss-Lobatto when the grid is made of midpoint panels.
    pub fn for_grid<T: Real>(grid: &[T]) -> Self {
        if has_panel_structure(grid) {
            QuadratureRule::GaussLobatto3
        } else {
            QuadratureRule::Trapezoid
        }
    }

    /// Integrates sampled values `f[i] = f(grid[i])`.
    pub fn integrate<T: Real>(self, grid: &[T], f: &[T]) -> T {
        assert_eq!(grid.len(), f.len());
        match self {
            QuadratureRule::GaussLobatto3 => simpson_panels(grid, f),
            QuadratureRule::Trapezoid => trapezoid(grid, f),
        }
    }
}

fn has_panel_structure<T: Real>(grid: &[T]) -> bool {
    if grid.len() < 3 || grid.len() % 2 == 0 {
        return false;
    }
    grid.chunks(2).zip(grid.iter().skip(2).step_by(2)).all(|(pair, &right)| {
        let (a, m) = (pair[0], pair[1]);
        let mid = (a + right) * T::lit(0.5);
        (m - mid).abs() <= T::lit(64.0) * T::machine_eps() * (T::one() + right.abs())
    })
}

fn simpson_panels<T: Real>(grid: &[T], f: &[T]) -> T {
    let mut acc = T::zero();
    let six = T::lit(6.0);
    let four = T::lit(4.0);
    let mut i = 0;
    while i + 2 < grid.len() {
        let h = grid[i + 2] - grid[i];
        acc += h / six * (f[i] + four * f[i + 1] + f[i + 2]);
        i += 2;
    }
    acc
}

fn trapezoid<T: Real>(grid: &[T], f: &[T]) -> T {
    grid.windows(2)
        .zip(f.windows(2))
        .fold(T::zero(), |acc, (t, v)| acc + (t[1] - t[0]) * (v[0] + v[1]) * T::lit(0.5))
}

/// First-derivative weights on arbitrary nodes (Fornberg's algorithm).
fn derivative_weights<T: Real>(x0: T, nodes: &[T]) -> Vec<T> {
    let n = nodes.len();
    // c[j][k]: weight of node j for derivative order k (k = 0, 1).
    let mut c = vec![[T::zero(); 2]; n];
    let mut c1 = T::one();
    let mut c4 = nodes[0] - x0;
    c[0][0] = T::one();
    for i in 1..n {
        let mn = i.min(1);
        let mut c2 = T::one();
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (T::from_count(k) * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - T::from_count(k) * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|w| w[1]).collect()
}

/// Fourth-order finite-difference derivative of vector samples on a
/// nonuniform grid, using the five nearest nodes around each sample.
pub fn derivative_fd4<T: Real>(grid: &[T], values: &[DVector<T>]) -> Result<Vec<DVector<T>>> {
    const STENCIL: usize = 5;
    let n = grid.len();
    if n < STENCIL {
        return Err(Error::GridTooCoarse {
            points: n,
            required: STENCIL,
        });
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let start = i.saturating_sub(STENCIL / 2).min(n - STENCIL);
        let nodes = &grid[start..start + STENCIL];
        let w = derivative_weights(grid[i], nodes);
        let mut d = DVector::zeros(values[i].len());
        for (j, wj) in w.iter().enumerate() {
            d += &values[start + j] * *wj;
        }
        out.push(d);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel_grid(n_panels: usize) -> Vec<f64> {
        let mut g = vec![0.0];
        let mut t = 0.0;
        for i in 0..n_panels {
            let h = 0.05 + 0.1 * ((i * 7) % 5) as f64 / 5.0;
            g.push(t + h / 2.0);
            t += h;
            g.push(t);
        }
        g
    }

    #[test]
    fn simpson_is_exact_for_cubics() {
        let g = panel_grid(9);
        assert_eq!(QuadratureRule::for_grid(&g), QuadratureRule::GaussLobatto3);
        let f: Vec<f64> = g.iter().map(|&t| 1.0 - 2.0 * t + 3.0 * t * t * t).collect();
        let b = *g.last().unwrap();
        let exact = b - b * b + 0.75 * b.powi(4);
        assert!((QuadratureRule::GaussLobatto3.integrate(&g, &f) - exact).abs() < 1e-12);
    }

    #[test]
    fn trapezoid_fallback_for_plain_grids() {
        let g = vec![0.0f64, 0.3, 1.0, 1.2];
        assert_eq!(QuadratureRule::for_grid(&g), QuadratureRule::Trapezoid);
        let f = vec![2.0; 4];
        assert!((QuadratureRule::Trapezoid.integrate(&g, &f) - 2.4).abs() < 1e-14);
    }

    #[test]
    fn fd4_is_exact_for_quartics_on_nonuniform_grid() {
        let g = panel_grid(6);
        let vals: Vec<DVector<f64>> = g
            .iter()
            .map(|&t| DVector::from_vec(vec![t.powi(4) - t, 2.0 * t * t]))
            .collect();
        let d = derivative_fd4(&g, &vals).unwrap();
        for (t, di) in g.iter().zip(d) {
            assert!((di[0] - (4.0 * t.powi(3) - 1.0)).abs() < 1e-9);
            assert!((di[1] - 4.0 * t).abs() < 1e-10);
        }
    }

    #[test]
    fn fd4_rejects_short_grids() {
        let g = vec![0.0, 0.5, 1.0];
        let v = vec![DVector::zeros(1); 3];
        assert!(matches!(derivative_fd4(&g, &v), Err(Error::GridTooCoarse { .. })));
    }
}
