//! Primal upper bound, Fenchel-dual lower bound and the bounds report.
//!
//! The dual problem maximises
//!
//! ```text
//!   J_D = ½∫(−ρᵀQ⁻¹ρ − γᵀbR⁻¹bᵀγ)dt − γ(0)ᵀIᵉz₀ − ½γ(T)ᵀIᵉπ⁻¹Iᵉγ(T)
//! ```
//!
//! over pairs with `Iᵉγ̇ = −Aᵀγ + ρ`. Every such pair gives `J_D ≤ V_P`.
//! The lower bound uses `ρ = Qẑ` for the state `ẑ` generated by the
//! composite control, with terminal value `γ(T) = −(Iᵉ)⁻¹πQ⁻¹ρ(T)`. The
//! dual dynamics are integrated backward from `T`, which is the contracting
//! direction for the fast block.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result, StageExt};
use crate::layers::zeroth_order;
use crate::linalg;
use crate::ode::{integrate, LinearSystem, OdeOptions, StepLimit};
use crate::options::SolveOptions;
use crate::oracle::{evaluate_primal_objective, optimal_value, primal_residual, simulate, solve_riccati_full, Trajectory};
use crate::problem::SpLqProblem;
use crate::quadrature::{derivative_fd4, QuadratureRule};
use crate::scalar::Real;

/// Dual state `γ` and dual control `ρ` on a grid.
#[derive(Clone, Debug)]
pub struct DualTrajectory<T: Real> {
    pub grid: Vec<T>,
    pub gamma: Vec<DVector<T>>,
    pub rho: Vec<DVector<T>>,
    pub rule: QuadratureRule,
}

impl<T: Real> DualTrajectory<T> {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }
}

/// Evaluates the primal cost of an open-loop control and returns the state
/// it generates.
pub fn upper_bound<T: Real>(
    p: &SpLqProblem<T>,
    control: &dyn Fn(T) -> DVector<T>,
    opts: &SolveOptions<T>,
) -> Result<(T, Trajectory<T>)> {
    let traj = simulate(p, control, opts)?;
    let value = evaluate_primal_objective(p, &traj, None)?;
    Ok((value, traj))
}

/// `ρ(t) = Q ẑ(t)` with cubic Hermite interpolation of `ẑ`.
#[derive(Clone, Debug)]
pub struct StateDual<T: Real> {
    q: nalgebra::DMatrix<T>,
    state: crate::ode::DenseOutput<T>,
}

impl<T: Real> StateDual<T> {
    pub fn eval(&self, t: T) -> DVector<T> {
        &self.q * self.state.eval(t)
    }
}

pub fn dual_control_from_state<T: Real>(p: &SpLqProblem<T>, zhat: &Trajectory<T>) -> StateDual<T> {
    StateDual {
        q: p.q.clone(),
        state: crate::ode::DenseOutput {
            t: zhat.grid.clone(),
            y: zhat.z.clone(),
            dy: zhat.zdot.clone(),
        },
    }
}

/// `γ(T) = −(Iᵉ)⁻¹π(ε)Q⁻¹ρ(T)`.
pub fn dual_terminal<T: Real>(p: &SpLqProblem<T>, rho_at_end: &DVector<T>) -> DVector<T> {
    -(p.i_eps_inv_pi() * p.q_inv() * rho_at_end)
}

/// Integrates `Iᵉγ̇ = −Aᵀγ + ρ` backward from `γ(T) = gamma_end` and
/// evaluates `J_D`.
pub fn lower_bound<T: Real>(
    p: &SpLqProblem<T>,
    rho: &dyn Fn(T) -> DVector<T>,
    gamma_end: &DVector<T>,
    opts: &SolveOptions<T>,
) -> Result<(T, DualTrajectory<T>)> {
    let d = p.state_dim();
    let at = p.a().transpose();
    let mut m = at.clone();
    for i in p.m..d {
        for j in 0..d {
            m[(i, j)] /= p.epsilon;
        }
    }
    let horizon = p.horizon;
    // Reversed time s = T − t: dγ/ds = (Iᵉ)⁻¹Aᵀγ − (Iᵉ)⁻¹ρ(T − s).
    let sys = LinearSystem {
        dim: d,
        matrix: |_s: T| m.clone(),
        forcing: |s: T| -p.scale_fast_inv(&rho(horizon - s)),
    };
    let limit = StepLimit::BoundaryLayers {
        start: T::zero(),
        end: horizon,
        width: opts.layer_width(p.epsilon, horizon),
        points: opts.layer_points,
    };
    let dense = integrate(&sys, T::zero(), horizon, gamma_end.clone(), &OdeOptions::with_tol(opts.tol).step_limit(limit))?
        .reversed(horizon);
    let rho_samples = dense.t.iter().map(|&t| rho(t)).collect();
    let dt = DualTrajectory {
        rule: QuadratureRule::for_grid(&dense.t),
        grid: dense.t,
        gamma: dense.y,
        rho: rho_samples,
    };
    Ok((evaluate_dual_objective(p, &dt), dt))
}

/// Running part of the dual integrand at one sample; both terms are ≤ 0.
pub fn dual_integrand_terms<T: Real>(p: &SpLqProblem<T>, gamma: &DVector<T>, rho: &DVector<T>) -> (T, T) {
    let s = p.b() * p.r_inv() * p.b().transpose();
    let half = T::lit(0.5);
    (-(rho.dot(&(p.q_inv() * rho))) * half, -(gamma.dot(&(s * gamma))) * half)
}

/// `J_D` of a sampled dual pair.
pub fn evaluate_dual_objective<T: Real>(p: &SpLqProblem<T>, dt: &DualTrajectory<T>) -> T {
    let q_inv = p.q_inv();
    let s = p.b() * p.r_inv() * p.b().transpose();
    let vals: Vec<T> = dt
        .gamma
        .iter()
        .zip(&dt.rho)
        .map(|(g, r)| -(r.dot(&(&q_inv * r)) + g.dot(&(&s * g))) * T::lit(0.5))
        .collect();
    let running = dt.rule.integrate(&dt.grid, &vals);
    let g0 = &dt.gamma[0];
    let g_end = dt.gamma.last().expect("empty dual trajectory");
    let pi_inv = p.pi().try_inverse().expect("pi(epsilon) is positive definite");
    let scaled_end = p.scale_fast(g_end);
    running - g0.dot(&p.scale_fast(&p.z0)) - scaled_end.dot(&(pi_inv * &scaled_end)) * T::lit(0.5)
}

/// Sup-norm residual of `Iᵉγ̇ + Aᵀγ − ρ` with fourth-order finite differences.
pub fn dual_feasibility_residual<T: Real>(p: &SpLqProblem<T>, dt: &DualTrajectory<T>) -> Result<T> {
    let gdot = derivative_fd4(&dt.grid, &dt.gamma)?;
    let at = p.a().transpose();
    Ok(gdot
        .iter()
        .zip(&dt.gamma)
        .zip(&dt.rho)
        .map(|((d, g), r)| linalg::max_abs_vec(&(p.scale_fast(d) + &at * g - r)))
        .fold(T::zero(), |a, b| a.max(b)))
}

/// Dual pair `(ρ, γ) = (Qz, −χ)` built from an optimal trajectory.
pub fn mapped_dual<T: Real>(p: &SpLqProblem<T>, traj: &Trajectory<T>) -> Result<DualTrajectory<T>> {
    let chi = traj.chi.as_ref().ok_or_else(|| Error::DimensionMismatch {
        field: "trajectory costate".into(),
        expected: "costate samples".into(),
        found: "none".into(),
    })?;
    Ok(DualTrajectory {
        grid: traj.grid.clone(),
        gamma: chi.iter().map(|c| -c).collect(),
        rho: traj.z.iter().map(|z| &p.q * z).collect(),
        rule: traj.rule,
    })
}

/// `|J_D(Qz*, −χ*) − V_P| / (1 + |V_P|)`.
pub fn strong_duality_check<T: Real>(p: &SpLqProblem<T>, oracle_traj: &Trajectory<T>, value: T) -> Result<T> {
    let dt = mapped_dual(p, oracle_traj)?;
    let jd = evaluate_dual_objective(p, &dt);
    Ok((jd - value).abs() / (T::one() + value.abs()))
}

/// Upper and lower bounds at one ε, with the reference value when available.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundsReport {
    pub epsilon: f64,
    pub order: usize,
    pub upper: f64,
    pub lower: f64,
    pub gap: f64,
    pub oracle: Option<f64>,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// `lower ≤ oracle ≤ upper` within `1e-6(1 + |oracle|)`; absent without oracle.
    pub bracketing: Option<bool>,
}

/// Fixed CSV column order.
pub const CSV_HEADER: &str = "eps,order,upper,lower,gap,oracle,primal_residual,dual_residual";

/// 15 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.14e}")
}

impl BoundsReport {
    pub fn csv_row(&self) -> String {
        [
            format_float(self.epsilon),
            self.order.to_string(),
            format_float(self.upper),
            format_float(self.lower),
            format_float(self.gap),
            self.oracle.map(format_float).unwrap_or_default(),
            format_float(self.primal_residual),
            format_float(self.dual_residual),
        ]
        .join(",")
    }

    /// Bracketing with slack `1e-6(1 + |oracle|)`.
    pub fn brackets(lower: f64, oracle: f64, upper: f64) -> bool {
        let slack = 1e-6 * (1.0 + oracle.abs());
        lower <= oracle + slack && oracle <= upper + slack
    }
}

impl std::fmt::Display for BoundsReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "epsilon          {:.6e}", self.epsilon)?;
        writeln!(f, "order            {}", self.order)?;
        writeln!(f, "upper bound      {:.12}", self.upper)?;
        writeln!(f, "lower bound      {:.12}", self.lower)?;
        writeln!(f, "gap              {:.6e}", self.gap)?;
        match self.oracle {
            Some(v) => writeln!(f, "reference value  {v:.12}")?,
            None => writeln!(f, "reference value  (not computed)")?,
        }
        writeln!(f, "primal residual  {:.3e}", self.primal_residual)?;
        writeln!(f, "dual residual    {:.3e}", self.dual_residual)?;
        if let Some(b) = self.bracketing {
            writeln!(f, "bracketing       {}", if b { "ok" } else { "VIOLATED" })?;
        }
        Ok(())
    }
}

/// Runs the whole bound pipeline at the problem's ε.
pub fn bounds_report<T: Real>(p: &SpLqProblem<T>, opts: &SolveOptions<T>) -> Result<BoundsReport> {
    if opts.order != 0 {
        return Err(Error::UnsupportedOrder(opts.order));
    }
    let approx = zeroth_order(p, opts)?;
    let (upper, zhat) = upper_bound(p, &|t| approx.control(t), opts).stage("upper_bound")?;
    let primal_res = primal_residual(p, &zhat).stage("upper_bound")?;
    let rho = dual_control_from_state(p, &zhat);
    let gamma_end = dual_terminal(p, &rho.eval(p.horizon));
    let (lower, dual) = lower_bound(p, &|t| rho.eval(t), &gamma_end, opts).stage("lower_bound")?;
    let dual_res = dual_feasibility_residual(p, &dual).stage("lower_bound")?;
    let oracle = if opts.oracle {
        solve_riccati_full(p, opts).ok().map(|sol| optimal_value(&sol, &p.z0).as_f64())
    } else {
        None
    };
    let (upper, lower) = (upper.as_f64(), lower.as_f64());
    Ok(BoundsReport {
        epsilon: p.epsilon.as_f64(),
        order: 0,
        upper,
        lower,
        gap: upper - lower,
        oracle,
        primal_residual: primal_res.as_f64(),
        dual_residual: dual_res.as_f64(),
        bracketing: oracle.map(|v| BoundsReport::brackets(lower, v, upper)),
    })
}
