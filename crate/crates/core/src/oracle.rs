//! Full-dimension reference solver.
//!
//! The Riccati sweep runs on the ε-scaled system `ż = Âz + b̂u` with
//! `Â = (Iᵉ)⁻¹A`, `b̂ = (Iᵉ)⁻¹b`, so `P` is the Hessian of the value
//! function in the original state. The costate is returned in the scaled
//! form `χ = (Iᵉ)⁻¹Pz`, under which the optimality system reads
//!
//! ```text
//!   Iᵉż = Az − Sχ,   Iᵉχ̇ = −Qz − Aᵀχ,   u = −R⁻¹bᵀχ,   S = bR⁻¹bᵀ.
//! ```

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::ode::{integrate, DenseOutput, LinearSystem, OdeOptions, StepLimit};
use crate::options::SolveOptions;
use crate::problem::{scaled_dynamics, SpLqProblem};
use crate::quadrature::{derivative_fd4, QuadratureRule};
use crate::riccati::{riccati_sweep, RiccatiData, RiccatiSolution};
use crate::scalar::Real;

/// Sampled state, control and (optionally) costate on a common grid.
#[derive(Clone, Debug)]
pub struct Trajectory<T: Real> {
    pub grid: Vec<T>,
    pub z: Vec<DVector<T>>,
    /// State derivative at each sample, used for cubic interpolation.
    pub zdot: Vec<DVector<T>>,
    pub u: Vec<DVector<T>>,
    /// Scaled costate; present for optimal trajectories only.
    pub chi: Option<Vec<DVector<T>>>,
    pub rule: QuadratureRule,
}

impl<T: Real> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    fn dense_state(&self) -> DenseOutput<T> {
        DenseOutput {
            t: self.grid.clone(),
            y: self.z.clone(),
            dy: self.zdot.clone(),
        }
    }

    /// State at `t`, cubic Hermite between samples.
    pub fn z_at(&self, t: T) -> DVector<T> {
        self.dense_state().eval(t)
    }

    pub fn terminal_state(&self) -> &DVector<T> {
        self.z.last().expect("empty trajectory")
    }

    /// Integrates a scalar function of `(z, u)` with the bound rule.
    pub fn integrate_samples(&self, f: impl Fn(usize) -> T) -> T {
        let vals: Vec<T> = (0..self.len()).map(f).collect();
        self.rule.integrate(&self.grid, &vals)
    }
}

fn layer_limit<T: Real>(p: &SpLqProblem<T>, opts: &SolveOptions<T>) -> StepLimit<T> {
    StepLimit::BoundaryLayers {
        start: T::zero(),
        end: p.horizon,
        width: opts.layer_width(p.epsilon, p.horizon),
        points: opts.layer_points,
    }
}

pub(crate) fn state_options<T: Real>(p: &SpLqProblem<T>, opts: &SolveOptions<T>) -> OdeOptions<T> {
    OdeOptions::with_tol(opts.tol).step_limit(layer_limit(p, opts))
}

/// Backward Riccati sweep for the full scaled system, `P(T_f) = π(ε)`.
pub fn solve_riccati_full<T: Real>(p: &SpLqProblem<T>, opts: &SolveOptions<T>) -> Result<RiccatiSolution<T>> {
    if !(opts.tol > T::zero()) {
        return Err(Error::NonPositiveParameter {
            field: "tol".into(),
            value: opts.tol.as_f64(),
        });
    }
    let sc = scaled_dynamics(p);
    let s = &sc.b_hat * p.r_inv() * sc.b_hat.transpose();
    let data = RiccatiData {
        a: sc.a_hat,
        s,
        w: p.q.clone(),
        terminal: p.pi(),
        horizon: p.horizon,
    };
    riccati_sweep(&data, opts.tol, layer_limit(p, opts))
}

/// `½ z₀ᵀ P(0) z₀`.
pub fn optimal_value<T: Real>(sol: &RiccatiSolution<T>, z0: &DVector<T>) -> T {
    z0.dot(&(sol.initial() * z0)) * T::lit(0.5)
}

/// Closed-loop optimal state, control and costate.
pub fn optimal_trajectory<T: Real>(
    p: &SpLqProblem<T>,
    sol: &RiccatiSolution<T>,
    opts: &SolveOptions<T>,
) -> Result<Trajectory<T>> {
    let sc = scaled_dynamics(p);
    let gain = p.r_inv() * sc.b_hat.transpose();
    let s = &sc.b_hat * &gain;
    let d = p.state_dim();
    let sys = LinearSystem {
        dim: d,
        matrix: |t: T| &sc.a_hat - &s * sol.p_at(t),
        forcing: |_t: T| DVector::zeros(d),
    };
    let dense = integrate(&sys, T::zero(), p.horizon, p.z0.clone(), &state_options(p, opts))?;
    let mut u = Vec::with_capacity(dense.len());
    let mut chi = Vec::with_capacity(dense.len());
    for (&t, z) in dense.t.iter().zip(&dense.y) {
        let lam = sol.p_at(t) * z;
        u.push(-(&gain * &lam));
        chi.push(p.scale_fast_inv(&lam));
    }
    Ok(Trajectory {
        rule: QuadratureRule::for_grid(&dense.t),
        grid: dense.t,
        z: dense.y,
        zdot: dense.dy,
        u,
        chi: Some(chi),
    })
}

/// Sup-norm residual of `Iᵉż − Az − bu` with fourth-order finite
/// differences on the trajectory grid.
pub fn primal_residual<T: Real>(p: &SpLqProblem<T>, traj: &Trajectory<T>) -> Result<T> {
    let zdot = derivative_fd4(&traj.grid, &traj.z)?;
    let a = p.a();
    let b = p.b();
    Ok(zdot
        .iter()
        .zip(&traj.z)
        .zip(&traj.u)
        .map(|((d, z), u)| linalg::max_abs_vec(&(p.scale_fast(d) - &a * z - &b * u)))
        .fold(T::zero(), |a, b| a.max(b)))
}

/// Sup-norm residual of the four optimality equations (state and costate
/// dynamics) with fourth-order finite differences.
pub fn optimality_residual<T: Real>(p: &SpLqProblem<T>, traj: &Trajectory<T>) -> Result<T> {
    let chi = traj.chi.as_ref().ok_or_else(|| Error::DimensionMismatch {
        field: "trajectory costate".into(),
        expected: "costate samples".into(),
        found: "none".into(),
    })?;
    let zdot = derivative_fd4(&traj.grid, &traj.z)?;
    let chidot = derivative_fd4(&traj.grid, chi)?;
    let a = p.a();
    let at = a.transpose();
    let s = p.b() * p.r_inv() * p.b().transpose();
    let mut worst = T::zero();
    for i in 0..traj.len() {
        let (z, c) = (&traj.z[i], &chi[i]);
        let r1 = p.scale_fast(&zdot[i]) - &a * z + &s * c;
        let r2 = p.scale_fast(&chidot[i]) + &p.q * z + &at * c;
        worst = worst.max(linalg::max_abs_vec(&r1)).max(linalg::max_abs_vec(&r2));
    }
    Ok(worst)
}

/// `½∫(zᵀQz + uᵀRu)dt + ½z(T_f)ᵀπ(ε)z(T_f)` with the trajectory's rule.
///
/// With `feasibility_tol = Some(tol)` the primal dynamics residual is
/// checked first and [`Error::InfeasibleTrajectory`] returned above `tol`.
pub fn evaluate_primal_objective<T: Real>(
    p: &SpLqProblem<T>,
    traj: &Trajectory<T>,
    feasibility_tol: Option<T>,
) -> Result<T> {
    if let Some(tol) = feasibility_tol {
        let residual = primal_residual(p, traj)?;
        if !(residual <= tol) {
            return Err(Error::InfeasibleTrajectory {
                residual: residual.as_f64(),
                tolerance: tol.as_f64(),
            });
        }
    }
    let running = traj.integrate_samples(|i| p.running_cost(&traj.z[i], &traj.u[i]));
    Ok(running + p.terminal_cost(traj.terminal_state()))
}

/// Forward simulation of the primal dynamics under an open-loop control.
pub fn simulate<T: Real>(
    p: &SpLqProblem<T>,
    control: &dyn Fn(T) -> DVector<T>,
    opts: &SolveOptions<T>,
) -> Result<Trajectory<T>> {
    let sc = scaled_dynamics(p);
    let d = p.state_dim();
    let sys = LinearSystem {
        dim: d,
        matrix: |_t: T| sc.a_hat.clone(),
        forcing: |t: T| &sc.b_hat * control(t),
    };
    let dense = integrate(&sys, T::zero(), p.horizon, p.z0.clone(), &state_options(p, opts))?;
    let u: Vec<DVector<T>> = dense.t.iter().map(|&t| control(t)).collect();
    Ok(Trajectory {
        rule: QuadratureRule::for_grid(&dense.t),
        grid: dense.t,
        z: dense.y,
        zdot: dense.dy,
        u,
        chi: None,
    })
}

/// Reference value and trajectory in one call.
pub fn reference<T: Real>(p: &SpLqProblem<T>, opts: &SolveOptions<T>) -> Result<(T, RiccatiSolution<T>, Trajectory<T>)> {
    let sol = solve_riccati_full(p, opts)?;
    let value = optimal_value(&sol, &p.z0);
    let traj = optimal_trajectory(p, &sol, opts)?;
    Ok((value, sol, traj))
}

/// `P` restricted to the slow block, for comparisons with reduced solutions.
pub fn slow_block<T: Real>(p: &SpLqProblem<T>, m: &DMatrix<T>) -> DMatrix<T> {
    linalg::block(m, 0, 0, p.m, p.m)
}
