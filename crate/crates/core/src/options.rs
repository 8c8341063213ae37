use crate::scalar::Real;

/// Accuracy settings shared by every solver stage.
#[derive(Clone, Copy, Debug)]
pub struct SolveOptions<T = f64> {
    /// Local error tolerance for the adaptive integrator (relative and absolute).
    pub tol: T,
    /// Minimum number of steps across each boundary layer of width `ε ln(1/tol)`.
    pub layer_points: usize,
    /// Compute the full Riccati reference value in [`crate::bounds_report`].
    pub oracle: bool,
    /// Expansion order. Only 0 is implemented.
    pub order: usize,
}

impl<T: Real> Default for SolveOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-8),
            layer_points: 32,
            oracle: true,
            order: 0,
        }
    }
}

impl<T: Real> SolveOptions<T> {
    pub fn with_tol(tol: T) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    pub fn without_oracle(mut self) -> Self {
        self.oracle = false;
        self
    }

    /// Boundary-layer width `ε ln(1/tol)`, at most half the horizon.
    pub fn layer_width(&self, epsilon: T, horizon: T) -> T {
        let w = epsilon * (T::one() / self.tol).ln().max(T::one());
        w.min(horizon * T::lit(0.5))
    }
}
