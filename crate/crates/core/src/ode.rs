//! Adaptive L-stable SDIRK integrator for stiff linear and Riccati systems.
//!
//! The method is the five-stage, fourth-order singly diagonally implicit
//! Runge-Kutta scheme with γ = 1/4 and an embedded third-order solution
//! (Hairer & Wanner, *Solving ODEs II*, Table 6.5). It is stiffly accurate:
//! the last stage is the step result, so fast modes are damped to zero
//! rather than reflected.
//!
//! Stage equations are solved by simplified Newton iteration with one LU
//! factorisation of `I − hγJ` per step. The error estimate is filtered
//! through the same factorisation so it stays meaningful when `hλ ≫ 1`.
//!
//! The returned [`DenseOutput`] stores every accepted step end point plus the
//! step midpoint, each with its derivative, so the grid always holds an odd
//! number of samples arranged in Simpson panels.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Real;

const STAGES: usize = 5;
const GAMMA: f64 = 0.25;
const C: [f64; STAGES] = [0.25, 0.75, 11.0 / 20.0, 0.5, 1.0];
const A: [[f64; STAGES]; STAGES] = [
    [0.25, 0.0, 0.0, 0.0, 0.0],
    [0.5, 0.25, 0.0, 0.0, 0.0],
    [17.0 / 50.0, -1.0 / 25.0, 0.25, 0.0, 0.0],
    [371.0 / 1360.0, -137.0 / 2720.0, 15.0 / 544.0, 0.25, 0.0],
    [25.0 / 24.0, -49.0 / 48.0, 125.0 / 16.0, -85.0 / 12.0, 0.25],
];
const NEWTON_KAPPA: f64 = 0.03;
/// Embedded third-order weights.
const B_HAT: [f64; STAGES] = [59.0 / 48.0, -17.0 / 96.0, 225.0 / 32.0, -85.0 / 12.0, 0.0];

/// A first-order system `y' = f(t, y)` with its Jacobian.
pub trait OdeSystem<T: Real> {
    fn dim(&self) -> usize;
    fn rhs(&self, t: T, y: &DVector<T>) -> DVector<T>;
    fn jacobian(&self, t: T, y: &DVector<T>) -> DMatrix<T>;
}

/// Upper bound on the step size as a function of time.
#[derive(Clone, Copy, Debug)]
pub enum StepLimit<T> {
    None,
    /// Inside `[start, start + width]` and `[end − width, end]` the step is
    /// capped at `width / points`.
    BoundaryLayers {
        start: T,
        end: T,
        width: T,
        points: usize,
    },
}

impl<T: Real> StepLimit<T> {
    fn cap(&self, t: T) -> Option<T> {
        match *self {
            StepLimit::None => None,
            StepLimit::BoundaryLayers {
                start,
                end,
                width,
                points,
            } => {
                if t < start + width || t > end - width {
                    Some(width / T::from_count(points.max(1)))
                } else {
                    None
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct OdeOptions<T> {
    pub rtol: T,
    pub atol: T,
    pub max_steps: usize,
    pub initial_step: Option<T>,
    pub step_limit: StepLimit<T>,
}

impl<T: Real> OdeOptions<T> {
    pub fn with_tol(tol: T) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            max_steps: 200_000,
            initial_step: None,
            step_limit: StepLimit::None,
        }
    }

    pub fn step_limit(mut self, limit: StepLimit<T>) -> Self {
        self.step_limit = limit;
        self
    }
}

/// Samples of a solution together with derivatives, interpolated by cubic
/// Hermite polynomials between consecutive samples.
#[derive(Clone, Debug)]
pub struct DenseOutput<T: Real> {
    pub t: Vec<T>,
    pub y: Vec<DVector<T>>,
    pub dy: Vec<DVector<T>>,
}

impl<T: Real> DenseOutput<T> {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.y.first().map_or(0, |v| v.len())
    }

    pub fn first_time(&self) -> T {
        self.t[0]
    }

    pub fn last_time(&self) -> T {
        *self.t.last().expect("empty dense output")
    }

    /// Index `i` such that `t[i] <= t <= t[i+1]`, clamped to the grid.
    fn interval(&self, t: T) -> usize {
        let n = self.t.len();
        if n < 2 || t <= self.t[0] {
            return 0;
        }
        if t >= self.t[n - 1] {
            return n - 2;
        }
        match self.t.binary_search_by(|probe| probe.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i - 1,
        }
    }

    pub fn eval(&self, t: T) -> DVector<T> {
        if self.t.len() == 1 {
            return self.y[0].clone();
        }
        let i = self.interval(t);
        hermite(
            self.t[i],
            &self.y[i],
            &self.dy[i],
            self.t[i + 1],
            &self.y[i + 1],
            &self.dy[i + 1],
            t,
        )
    }

    pub fn eval_derivative(&self, t: T) -> DVector<T> {
        if self.t.len() == 1 {
            return self.dy[0].clone();
        }
        let i = self.interval(t);
        hermite_derivative(
            self.t[i],
            &self.y[i],
            &self.dy[i],
            self.t[i + 1],
            &self.y[i + 1],
            &self.dy[i + 1],
            t,
        )
    }

    /// Maps a solution computed in reversed time `s = end − t` back onto
    /// forward time, negating derivatives.
    pub fn reversed(self, end: T) -> Self {
        let mut t: Vec<T> = self.t.into_iter().map(|s| end - s).collect();
        let mut y = self.y;
        let mut dy: Vec<DVector<T>> = self.dy.into_iter().map(|d| -d).collect();
        t.reverse();
        y.reverse();
        dy.reverse();
        Self { t, y, dy }
    }
}

fn hermite<T: Real>(
    t0: T,
    y0: &DVector<T>,
    d0: &DVector<T>,
    t1: T,
    y1: &DVector<T>,
    d1: &DVector<T>,
    t: T,
) -> DVector<T> {
    let h = t1 - t0;
    if h <= T::zero() {
        return y0.clone();
    }
    let s = (t - t0) / h;
    let one = T::one();
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let h00 = (one + two * s) * (one - s) * (one - s);
    let h10 = s * (one - s) * (one - s);
    let h01 = s * s * (three - two * s);
    let h11 = s * s * (s - one);
    y0 * h00 + d0 * (h10 * h) + y1 * h01 + d1 * (h11 * h)
}

fn hermite_derivative<T: Real>(
    t0: T,
    y0: &DVector<T>,
    d0: &DVector<T>,
    t1: T,
    y1: &DVector<T>,
    d1: &DVector<T>,
    t: T,
) -> DVector<T> {
    let h = t1 - t0;
    if h <= T::zero() {
        return d0.clone();
    }
    let s = (t - t0) / h;
    let one = T::one();
    let six = T::lit(6.0);
    let dh00 = six * s * (s - one) / h;
    let dh10 = (one - s) * (one - T::lit(3.0) * s);
    let dh01 = -dh00;
    let dh11 = s * (T::lit(3.0) * s - T::lit(2.0));
    y0 * dh00 + d0 * dh10 + y1 * dh01 + d1 * dh11
}

fn error_norm<T: Real>(err: &DVector<T>, y0: &DVector<T>, y1: &DVector<T>, opts: &OdeOptions<T>) -> T {
    if err.is_empty() {
        return T::zero();
    }
    let mut acc = T::zero();
    for i in 0..err.len() {
        let scale = opts.atol + opts.rtol * y0[i].abs().max(y1[i].abs());
        let r = err[i] / scale;
        acc += r * r;
    }
    (acc / T::from_count(err.len())).sqrt()
}

/// Integrates `sys` forward from `t0` to `t1 > t0`.
pub fn integrate<T: Real, S: OdeSystem<T> + ?Sized>(
    sys: &S,
    t0: T,
    t1: T,
    y0: DVector<T>,
    opts: &OdeOptions<T>,
) -> Result<DenseOutput<T>> {
    let dim = sys.dim();
    assert_eq!(y0.len(), dim, "initial value has wrong dimension");
    let span = t1 - t0;
    if span <= T::zero() {
        return Err(Error::IntegrationFailure {
            t: t0.as_f64(),
            reason: "empty integration interval".into(),
        });
    }
    let f0 = sys.rhs(t0, &y0);
    let mut out = DenseOutput {
        t: vec![t0],
        y: vec![y0.clone()],
        dy: vec![f0.clone()],
    };
    let gamma = T::lit(GAMMA);
    let h_min = span * T::lit(1e-14);
    let mut h = opts.initial_step.unwrap_or_else(|| {
        // Hairer's ratio of scaled norms ‖y0‖ / ‖f0‖.
        let d0 = error_norm(&y0, &y0, &y0, opts);
        let d1 = error_norm(&f0, &y0, &y0, opts);
        if d0 > T::lit(1e-5) && d1 > T::lit(1e-5) {
            (T::lit(0.01) * d0 / d1).min(span * T::lit(1e-2))
        } else {
            span * T::lit(1e-3)
        }
    });
    let mut t = t0;
    let mut y = y0;
    let mut fy = f0;
    let mut steps = 0usize;
    let mut last_rejected = false;
    let id = DMatrix::<T>::identity(dim, dim);

    while t < t1 {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::IntegrationFailure {
                t: t.as_f64(),
                reason: format!("exceeded {} steps", opts.max_steps),
            });
        }
        if let Some(cap) = opts.step_limit.cap(t) {
            h = h.min(cap);
        }
        let remaining = t1 - t;
        if h >= remaining || remaining - h < h_min {
            h = remaining;
        }
        if h < h_min {
            return Err(Error::IntegrationFailure {
                t: t.as_f64(),
                reason: format!("step size underflow (h = {:.3e})", h.as_f64()),
            });
        }

        let jac = sys.jacobian(t, &y);
        let lu = (&id - &jac * (h * gamma)).lu();
        let mut k: Vec<DVector<T>> = Vec::with_capacity(STAGES);
        let mut newton_failed = false;
        for i in 0..STAGES {
            let mut base = y.clone();
            for (j, kj) in k.iter().enumerate() {
                base += kj * (h * T::lit(A[i][j]));
            }
            let ti = t + h * T::lit(C[i]);
            // Predictor: continue with the previous stage slope.
            let prev = k.last().unwrap_or(&fy);
            let mut yi = &base + prev * (h * gamma);
            let mut prev_norm: Option<T> = None;
            let mut converged = false;
            for _ in 0..10 {
                let fi = sys.rhs(ti, &yi);
                let resid = &yi - &base - fi * (h * gamma);
                let delta = match lu.solve(&resid) {
                    Some(d) => d,
                    None => {
                        newton_failed = true;
                        break;
                    }
                };
                yi -= &delta;
                let dn = error_norm(&delta, &y, &yi, opts);
                if !dn.is_finite_value() {
                    newton_failed = true;
                    break;
                }
                // Stop once the estimated remaining error η·‖Δ‖ is well below tolerance.
                let eta = match prev_norm {
                    Some(pn) if pn > T::zero() => {
                        let theta = dn / pn;
                        if theta >= T::lit(0.9) && dn > T::lit(NEWTON_KAPPA) {
                            newton_failed = true;
                            break;
                        }
                        theta / (T::one() - theta.min(T::lit(0.5)))
                    }
                    _ => T::one(),
                };
                if dn <= T::lit(1e-3) || eta * dn <= T::lit(NEWTON_KAPPA) {
                    converged = true;
                    break;
                }
                prev_norm = Some(dn);
            }
            if newton_failed || !converged {
                newton_failed = true;
                break;
            }
            k.push((yi - base) / (h * gamma));
        }
        if newton_failed {
            h *= T::lit(0.25);
            last_rejected = true;
            continue;
        }

        let mut y_new = y.clone();
        let mut err = DVector::zeros(dim);
        for i in 0..STAGES {
            y_new += &k[i] * (h * T::lit(A[STAGES - 1][i]));
            err += &k[i] * (h * T::lit(A[STAGES - 1][i] - B_HAT[i]));
        }
        let err = lu.solve(&err).unwrap_or(err);
        let en = error_norm(&err, &y, &y_new, opts);
        if !en.is_finite_value() {
            h *= T::lit(0.25);
            last_rejected = true;
            continue;
        }
        let fac = if en > T::zero() {
            T::lit(0.9) * en.powf(T::lit(-0.25))
        } else {
            T::lit(4.0)
        };
        if en <= T::one() {
            let t_new = if h == remaining { t1 } else { t + h };
            let f_new = sys.rhs(t_new, &y_new);
            let t_mid = t + (t_new - t) * T::lit(0.5);
            let y_mid = hermite(t, &y, &fy, t_new, &y_new, &f_new, t_mid);
            let f_mid = sys.rhs(t_mid, &y_mid);
            out.t.push(t_mid);
            out.y.push(y_mid);
            out.dy.push(f_mid);
            out.t.push(t_new);
            out.y.push(y_new.clone());
            out.dy.push(f_new.clone());
            t = t_new;
            y = y_new;
            fy = f_new;
            let grow = if last_rejected { T::one() } else { T::lit(4.0) };
            h *= fac.clamp(T::lit(0.2), grow);
            last_rejected = false;
        } else {
            h *= fac.clamp(T::lit(0.1), T::lit(0.9));
            last_rejected = true;
        }
    }
    Ok(out)
}

/// Reversed-time view of a system, generic over the scalar.
pub struct ReversedTime<'a, T, S: ?Sized> {
    inner: &'a S,
    end: T,
}

impl<'a, T: Real, S: OdeSystem<T> + ?Sized> ReversedTime<'a, T, S> {
    pub fn new(inner: &'a S, end: T) -> Self {
        Self { inner, end }
    }
}

impl<T: Real, S: OdeSystem<T> + ?Sized> OdeSystem<T> for ReversedTime<'_, T, S> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn rhs(&self, s: T, y: &DVector<T>) -> DVector<T> {
        -self.inner.rhs(self.end - s, y)
    }

    fn jacobian(&self, s: T, y: &DVector<T>) -> DMatrix<T> {
        -self.inner.jacobian(self.end - s, y)
    }
}

/// Linear time-varying system `y' = M(t) y + g(t)`.
pub struct LinearSystem<F, G> {
    pub dim: usize,
    pub matrix: F,
    pub forcing: G,
}

impl<T, F, G> OdeSystem<T> for LinearSystem<F, G>
where
    T: Real,
    F: Fn(T) -> DMatrix<T>,
    G: Fn(T) -> DVector<T>,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn rhs(&self, t: T, y: &DVector<T>) -> DVector<T> {
        (self.matrix)(t) * y + (self.forcing)(t)
    }

    fn jacobian(&self, t: T, _y: &DVector<T>) -> DMatrix<T> {
        (self.matrix)(t)
    }
}
