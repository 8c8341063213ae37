//! Backward sweep of the matrix Riccati differential equation
//!
//! ```text
//!   −dP/dt = PA + AᵀP − PSP + W,    P(T) = P_T
//! ```
//!
//! integrated in reversed time `s = T − t` so the sweep runs forward. The
//! unknown is `vec(P)` (column-major); the Jacobian with respect to it is
//! the Lyapunov operator of the closed-loop matrix `A − SP`.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::linalg;
use crate::ode::{integrate, DenseOutput, OdeOptions, OdeSystem, StepLimit};
use crate::scalar::Real;

/// Coefficients of one Riccati sweep.
#[derive(Clone, Debug)]
pub struct RiccatiData<T: Real> {
    pub a: DMatrix<T>,
    /// `B R⁻¹ Bᵀ`.
    pub s: DMatrix<T>,
    pub w: DMatrix<T>,
    pub terminal: DMatrix<T>,
    pub horizon: T,
}

struct ReversedRiccati<'a, T: Real> {
    data: &'a RiccatiData<T>,
    d: usize,
}

impl<T: Real> ReversedRiccati<'_, T> {
    fn unvec(&self, y: &DVector<T>) -> DMatrix<T> {
        DMatrix::from_column_slice(self.d, self.d, y.as_slice())
    }
}

impl<T: Real> OdeSystem<T> for ReversedRiccati<'_, T> {
    fn dim(&self) -> usize {
        self.d * self.d
    }

    fn rhs(&self, _s: T, y: &DVector<T>) -> DVector<T> {
        let p = self.unvec(y);
        let RiccatiData { a, s, w, .. } = self.data;
        let ps = &p * s;
        let dp = &p * a + a.transpose() * &p - &ps * &p + w;
        DVector::from_column_slice(dp.as_slice())
    }

    fn jacobian(&self, _s: T, y: &DVector<T>) -> DMatrix<T> {
        let p = self.unvec(y);
        linalg::lyapunov_operator(&(&self.data.a - &self.data.s * p))
    }
}

/// Sampled solution `P(t)` on `[0, T]` with cubic Hermite interpolation.
#[derive(Clone, Debug)]
pub struct RiccatiSolution<T: Real> {
    dense: DenseOutput<T>,
    dim: usize,
}

impl<T: Real> RiccatiSolution<T> {
    /// Matrix dimension of `P`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> &[T] {
        &self.dense.t
    }

    pub fn len(&self) -> usize {
        self.dense.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dense.is_empty()
    }

    pub fn horizon(&self) -> T {
        self.dense.last_time()
    }

    /// `P` at the `i`-th grid sample.
    pub fn sample(&self, i: usize) -> DMatrix<T> {
        DMatrix::from_column_slice(self.dim, self.dim, self.dense.y[i].as_slice())
    }

    pub fn samples(&self) -> impl Iterator<Item = DMatrix<T>> + '_ {
        (0..self.len()).map(|i| self.sample(i))
    }

    pub fn p_at(&self, t: T) -> DMatrix<T> {
        DMatrix::from_column_slice(self.dim, self.dim, self.dense.eval(t).as_slice())
    }

    /// `dP/dt` in forward time.
    pub fn dp_at(&self, t: T) -> DMatrix<T> {
        DMatrix::from_column_slice(self.dim, self.dim, self.dense.eval_derivative(t).as_slice())
    }

    pub fn initial(&self) -> DMatrix<T> {
        self.sample(0)
    }

    pub fn terminal(&self) -> DMatrix<T> {
        self.sample(self.len() - 1)
    }

    /// Largest `‖P − Pᵀ‖_F / ‖P‖_F` over the grid.
    pub fn max_relative_asymmetry(&self) -> T {
        self.samples()
            .map(|p| linalg::relative_asymmetry(&p))
            .fold(T::zero(), |a, b| a.max(b))
    }

    /// Smallest eigenvalue of the symmetric part over the grid.
    pub fn min_eigenvalue(&self) -> T {
        self.samples()
            .map(|p| linalg::min_symmetric_eigenvalue(&p))
            .fold(T::max_value().unwrap(), |a, b| a.min(b))
    }
}

/// Integrates the Riccati equation backward from `P(T) = terminal`.
pub fn riccati_sweep<T: Real>(
    data: &RiccatiData<T>,
    tol: T,
    step_limit: StepLimit<T>,
) -> Result<RiccatiSolution<T>> {
    let d = data.a.nrows();
    let sys = ReversedRiccati { data, d };
    let y0 = DVector::from_column_slice(data.terminal.as_slice());
    let opts = OdeOptions::with_tol(tol).step_limit(step_limit);
    let dense = integrate(&sys, T::zero(), data.horizon, y0, &opts)?.reversed(data.horizon);
    Ok(RiccatiSolution { dense, dim: d })
}
