//! The reduced slow problem obtained by setting ε = 0, its solution, and the
//! zeroth-order outer variables.
//!
//! Eliminating the fast state through the algebraic fast equation leaves an
//! m-dimensional LQ problem with a state/control cross weight `𝒞`. Completing
//! the square moves that cross term into the dynamics matrix and the state
//! weight, so the reduced problem is solved as a standard LQ problem in the
//! shifted control `v = u − ℛ⁻¹𝒞ᵀx`:
//!
//! ```text
//!   ℛ = R + b₂ᵀA₂₂⁻ᵀQ₂₂A₂₂⁻¹b₂
//!   𝒞 = (Q₁₂ − A₂₁ᵀA₂₂⁻ᵀQ₂₂)A₂₂⁻¹b₂
//!   ℬ = b₁ − A₁₂A₂₂⁻¹b₂
//!   𝒬 = Q₁₁ − A₂₁ᵀA₂₂⁻ᵀQ₂₁ − Q₁₂A₂₂⁻¹A₂₁ + A₂₁ᵀA₂₂⁻ᵀQ₂₂A₂₂⁻¹A₂₁ − 𝒞ℛ⁻¹𝒞ᵀ
//!   𝒜 = A₁₁ − A₁₂A₂₂⁻¹A₂₁ + ℬℛ⁻¹𝒞ᵀ
//! ```

use nalgebra::{DMatrix, DVector, LU};

use crate::error::{Error, Result};
use crate::linalg::{self, block2x2, concat};
use crate::ode::{integrate, DenseOutput, LinearSystem, OdeOptions, StepLimit};
use crate::options::SolveOptions;
use crate::problem::{Dims, ProblemConfig, SpLqProblem, SINGULARITY_CONDITION};
use crate::riccati::{riccati_sweep, RiccatiData, RiccatiSolution};
use crate::scalar::Real;

/// Eigenvalues of `𝒬` below this are reported as indefinite.
pub const PSD_TOLERANCE: f64 = -1e-9;

/// The m-dimensional non-perturbed problem
/// `min ½∫(xᵀ𝒬x + vᵀℛv) + ½x(T)ᵀπ₁₁x(T)` s.t. `ẋ = 𝒜x + ℬv`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedProblem<T: Real> {
    pub cal_a: DMatrix<T>,
    pub cal_b: DMatrix<T>,
    pub cal_q: DMatrix<T>,
    pub cal_r: DMatrix<T>,
    /// State/control cross weight; recovers `u = v + ℛ⁻¹𝒞ᵀx`.
    pub cal_c: DMatrix<T>,
    pub pi11_0: DMatrix<T>,
    pub x0: DVector<T>,
    pub horizon: T,
}

impl<T: Real> ReducedProblem<T> {
    pub fn m(&self) -> usize {
        self.cal_a.nrows()
    }

    pub fn k(&self) -> usize {
        self.cal_b.ncols()
    }

    pub fn r_inv(&self) -> DMatrix<T> {
        self.cal_r.clone().try_inverse().expect("reduced control weight is positive definite")
    }

    /// Emits the reduced problem in the full schema with `n = 0`: `A11`,
    /// `b1`, `Q`, `R`, `pi11` hold `𝒜`, `ℬ`, `𝒬`, `ℛ`, `π₁₁`; every block
    /// touching the fast state is empty. `𝒞` is not stored.
    pub fn to_config(&self, name: Option<String>) -> ProblemConfig {
        let rows = |m: &DMatrix<T>| -> Vec<Vec<f64>> {
            (0..m.nrows())
                .map(|i| m.row(i).iter().map(|v| v.as_f64()).collect())
                .collect()
        };
        let (m, k) = (self.m(), self.k());
        ProblemConfig {
            name,
            dims: Dims { m, n: 0, k },
            epsilon: 1.0,
            horizon: self.horizon.as_f64(),
            a11: rows(&self.cal_a),
            a12: vec![vec![]; m],
            a21: vec![],
            a22: vec![],
            b1: rows(&self.cal_b),
            b2: vec![],
            q: rows(&self.cal_q),
            r: rows(&self.cal_r),
            pi11: rows(&self.pi11_0),
            pi12: vec![vec![]; m],
            pi22: vec![],
            z0: self.x0.iter().map(|v| v.as_f64()).collect(),
        }
    }

    /// Reads a reduced problem written by [`Self::to_config`]. The cross
    /// weight is taken as zero.
    pub fn from_config(raw: &ProblemConfig) -> Result<Self> {
        let Dims { m, n, k } = raw.dims;
        if n != 0 {
            return Err(Error::DimensionMismatch {
                field: "dims.n".into(),
                expected: "0 for a reduced problem".into(),
                found: n.to_string(),
            });
        }
        let mat = |field: &str, rows: &[Vec<f64>], nr: usize, nc: usize| -> Result<DMatrix<T>> {
            if rows.len() != nr || rows.iter().any(|r| r.len() != nc) {
                return Err(Error::DimensionMismatch {
                    field: field.into(),
                    expected: format!("{nr}x{nc}"),
                    found: format!("{} rows", rows.len()),
                });
            }
            if rows.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteEntry { field: field.into() });
            }
            Ok(DMatrix::from_fn(nr, nc, |i, j| T::lit(rows[i][j])))
        };
        if m == 0 || k == 0 {
            return Err(Error::NonPositiveParameter {
                field: if m == 0 { "dims.m" } else { "dims.k" }.into(),
                value: 0.0,
            });
        }
        if raw.z0.len() != m {
            return Err(Error::DimensionMismatch {
                field: "z0".into(),
                expected: m.to_string(),
                found: raw.z0.len().to_string(),
            });
        }
        let rp = ReducedProblem {
            cal_a: mat("A11", &raw.a11, m, m)?,
            cal_b: mat("b1", &raw.b1, m, k)?,
            cal_q: linalg::symmetrize(&mat("Q", &raw.q, m, m)?),
            cal_r: linalg::symmetrize(&mat("R", &raw.r, k, k)?),
            cal_c: DMatrix::zeros(m, k),
            pi11_0: linalg::symmetrize(&mat("pi11", &raw.pi11, m, m)?),
            x0: DVector::from_iterator(m, raw.z0.iter().map(|&v| T::lit(v))),
            horizon: T::lit(raw.horizon),
        };
        rp.check()?;
        Ok(rp)
    }

    fn check(&self) -> Result<()> {
        let r_min = linalg::min_symmetric_eigenvalue(&self.cal_r);
        if !(r_min > T::zero()) {
            return Err(Error::NotPositiveDefinite {
                field: "reduced R".into(),
                min_eigenvalue: r_min.as_f64(),
                assumption: Some("d"),
            });
        }
        let q_min = linalg::min_symmetric_eigenvalue(&self.cal_q);
        if q_min < T::lit(PSD_TOLERANCE) {
            return Err(Error::NotPsd(q_min.as_f64()));
        }
        if !(self.horizon > T::zero()) {
            return Err(Error::NonPositiveParameter {
                field: "horizon".into(),
                value: self.horizon.as_f64(),
            });
        }
        Ok(())
    }
}

fn fast_block_inverse<T: Real>(a22: &DMatrix<T>) -> Result<DMatrix<T>> {
    if linalg::condition_number(a22).as_f64() > SINGULARITY_CONDITION {
        return Err(Error::SingularFastBlock);
    }
    a22.clone().try_inverse().ok_or(Error::SingularFastBlock)
}

/// Builds the reduced problem from the order-zero coefficients.
pub fn build_reduced<T: Real>(p: &SpLqProblem<T>) -> Result<ReducedProblem<T>> {
    let ai = fast_block_inverse(&p.a22)?;
    let ait = ai.transpose();
    let (q11, q12, q21, q22) = (p.q11(), p.q12(), p.q21(), p.q22());
    let a21t = p.a21.transpose();

    let cal_r = linalg::symmetrize(&(&p.r + p.b2.transpose() * &ait * &q22 * &ai * &p.b2));
    let r_min = linalg::min_symmetric_eigenvalue(&cal_r);
    if !(r_min > T::zero()) {
        return Err(Error::NotPositiveDefinite {
            field: "reduced R".into(),
            min_eigenvalue: r_min.as_f64(),
            assumption: Some("d"),
        });
    }
    let cal_r_inv = cal_r.clone().try_inverse().ok_or_else(|| {
        Error::SingularSystem("reduced control weight".into())
    })?;
    let cal_c = (&q12 - &a21t * &ait * &q22) * &ai * &p.b2;
    let cal_b = &p.b1 - &p.a12 * &ai * &p.b2;
    let cal_q = linalg::symmetrize(
        &(&q11 - &a21t * &ait * &q21 - &q12 * &ai * &p.a21
            + &a21t * &ait * &q22 * &ai * &p.a21
            - &cal_c * &cal_r_inv * cal_c.transpose()),
    );
    let q_min = linalg::min_symmetric_eigenvalue(&cal_q);
    if q_min < T::lit(PSD_TOLERANCE) {
        return Err(Error::NotPsd(q_min.as_f64()));
    }
    let cal_a = &p.a11 - &p.a12 * &ai * &p.a21 + &cal_b * &cal_r_inv * cal_c.transpose();

    Ok(ReducedProblem {
        cal_a,
        cal_b,
        cal_q,
        cal_r,
        cal_c,
        pi11_0: p.pi11.clone(),
        x0: p.z0.rows(0, p.m).into_owned(),
        horizon: p.horizon,
    })
}

/// Reduced Riccati sweep plus the forward closed-loop slow state.
#[derive(Clone, Debug)]
pub struct ReducedSolution<T: Real> {
    pub riccati: RiccatiSolution<T>,
    state: DenseOutput<T>,
    cal_b: DMatrix<T>,
    cal_c: DMatrix<T>,
    cal_r_inv: DMatrix<T>,
    /// `½x₀ᵀP_r(0)x₀`.
    pub value: T,
}

impl<T: Real> ReducedSolution<T> {
    pub fn grid(&self) -> &[T] {
        &self.state.t
    }

    pub fn x_at(&self, t: T) -> DVector<T> {
        self.state.eval(t)
    }

    /// Slow outer costate `P_r(t)x(t)`.
    pub fn chi1_at(&self, t: T) -> DVector<T> {
        self.riccati.p_at(t) * self.state.eval(t)
    }

    /// Reduced control `ℛ⁻¹(𝒞ᵀx − ℬᵀχ₁)`.
    pub fn u_at(&self, t: T) -> DVector<T> {
        let x = self.state.eval(t);
        let chi1 = self.riccati.p_at(t) * &x;
        self.control(&x, &chi1)
    }

    fn control(&self, x: &DVector<T>, chi1: &DVector<T>) -> DVector<T> {
        &self.cal_r_inv * (self.cal_c.transpose() * x - self.cal_b.transpose() * chi1)
    }

    /// Samples `(t, x, χ₁, u)` on the solution grid.
    pub fn samples(&self) -> Vec<(T, DVector<T>, DVector<T>, DVector<T>)> {
        self.state
            .t
            .iter()
            .zip(&self.state.y)
            .map(|(&t, x)| {
                let chi1 = self.riccati.p_at(t) * x;
                let u = self.control(x, &chi1);
                (t, x.clone(), chi1, u)
            })
            .collect()
    }
}

/// Solves the reduced problem to tolerance `opts.tol`.
pub fn solve_reduced<T: Real>(rp: &ReducedProblem<T>, opts: &SolveOptions<T>) -> Result<ReducedSolution<T>> {
    rp.check()?;
    let cal_r_inv = rp.r_inv();
    let s = &rp.cal_b * &cal_r_inv * rp.cal_b.transpose();
    let data = RiccatiData {
        a: rp.cal_a.clone(),
        s: s.clone(),
        w: rp.cal_q.clone(),
        terminal: rp.pi11_0.clone(),
        horizon: rp.horizon,
    };
    let riccati = riccati_sweep(&data, opts.tol, StepLimit::None)?;
    let sys = LinearSystem {
        dim: rp.m(),
        matrix: |t: T| &rp.cal_a - &s * riccati.p_at(t),
        forcing: |_t: T| DVector::zeros(rp.m()),
    };
    let state = integrate(&sys, T::zero(), rp.horizon, rp.x0.clone(), &OdeOptions::with_tol(opts.tol))?;
    let value = rp.x0.dot(&(riccati.initial() * &rp.x0)) * T::lit(0.5);
    Ok(ReducedSolution {
        riccati,
        state,
        cal_b: rp.cal_b.clone(),
        cal_c: rp.cal_c.clone(),
        cal_r_inv,
        value,
    })
}

/// Factored solver for the two algebraic fast equations of the outer system
///
/// ```text
///   [ A₂₂   −S₂₂ ] [z₂]   [ −A₂₁x + S₁₂ᵀχ₁ ]
///   [ −Q₂₂  −A₂₂ᵀ] [χ₂] = [  A₁₂ᵀχ₁ + Q₂₁x ]
/// ```
#[derive(Clone, Debug)]
pub struct OuterFastSolver<T: Real> {
    lu: LU<T, nalgebra::Dyn, nalgebra::Dyn>,
    coefficient: DMatrix<T>,
    a21: DMatrix<T>,
    a12t: DMatrix<T>,
    s12t: DMatrix<T>,
    q21: DMatrix<T>,
    n: usize,
}

impl<T: Real> OuterFastSolver<T> {
    pub fn new(p: &SpLqProblem<T>) -> Result<Self> {
        let s = p.input_products();
        let coefficient = block2x2(&p.a22, &(-&s.s22), &(-p.q22()), &(-p.a22.transpose()));
        let cond = linalg::condition_number(&coefficient);
        if cond.as_f64() > SINGULARITY_CONDITION {
            return Err(Error::SingularSystem(format!(
                "outer fast system has condition number {:.3e}",
                cond.as_f64()
            )));
        }
        Ok(Self {
            lu: coefficient.clone().lu(),
            coefficient,
            a21: p.a21.clone(),
            a12t: p.a12.transpose(),
            s12t: s.s12.transpose(),
            q21: p.q21(),
            n: p.n,
        })
    }

    fn rhs(&self, x: &DVector<T>, chi1: &DVector<T>) -> DVector<T> {
        concat(
            &(-(&self.a21 * x) + &self.s12t * chi1),
            &(&self.a12t * chi1 + &self.q21 * x),
        )
    }

    pub fn solve(&self, x: &DVector<T>, chi1: &DVector<T>) -> Result<(DVector<T>, DVector<T>)> {
        let sol = self
            .lu
            .solve(&self.rhs(x, chi1))
            .ok_or_else(|| Error::SingularSystem("outer fast system".into()))?;
        Ok((sol.rows(0, self.n).into_owned(), sol.rows(self.n, self.n).into_owned()))
    }

    /// Sup-norm residual of both algebraic equations.
    pub fn residual(&self, x: &DVector<T>, chi1: &DVector<T>, z2: &DVector<T>, chi2: &DVector<T>) -> T {
        linalg::max_abs_vec(&(&self.coefficient * concat(z2, chi2) - self.rhs(x, chi1)))
    }
}

/// Solves the algebraic outer fast equations at one time sample.
pub fn outer_fast_algebraic<T: Real>(
    p: &SpLqProblem<T>,
    x: &DVector<T>,
    chi1: &DVector<T>,
) -> Result<(DVector<T>, DVector<T>)> {
    OuterFastSolver::new(p)?.solve(x, chi1)
}

/// All four zeroth-order outer variables at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct OuterPoint<T: Real> {
    pub x: DVector<T>,
    pub chi1: DVector<T>,
    pub z2: DVector<T>,
    pub chi2: DVector<T>,
    pub u: DVector<T>,
}

/// Zeroth-order outer solution, evaluable at any `t ∈ [0, T]`.
#[derive(Clone, Debug)]
pub struct OuterSolution<T: Real> {
    pub reduced: ReducedSolution<T>,
    fast: OuterFastSolver<T>,
    r_inv: DMatrix<T>,
    b1t: DMatrix<T>,
    b2t: DMatrix<T>,
}

impl<T: Real> OuterSolution<T> {
    pub fn grid(&self) -> &[T] {
        self.reduced.grid()
    }

    pub fn at(&self, t: T) -> OuterPoint<T> {
        let x = self.reduced.x_at(t);
        let chi1 = self.reduced.riccati.p_at(t) * &x;
        let (z2, chi2) = self
            .fast
            .solve(&x, &chi1)
            .expect("outer fast system was factored at construction");
        let u = self.reduced.control(&x, &chi1);
        OuterPoint { x, chi1, z2, chi2, u }
    }

    /// Full-system form of the outer control, `−R⁻¹(b₁ᵀχ₁ + b₂ᵀχ₂)`.
    pub fn full_control(&self, pt: &OuterPoint<T>) -> DVector<T> {
        -(&self.r_inv * (&self.b1t * &pt.chi1 + &self.b2t * &pt.chi2))
    }

    /// Largest gap between the reduced feedback and the full-system
    /// stationarity condition over the grid.
    pub fn stationarity_residual(&self) -> T {
        self.grid()
            .iter()
            .map(|&t| {
                let pt = self.at(t);
                linalg::max_abs_vec(&(&pt.u - self.full_control(&pt)))
            })
            .fold(T::zero(), |a, b| a.max(b))
    }

    /// Largest residual of the algebraic fast equations over the grid.
    pub fn algebraic_residual(&self) -> T {
        self.grid()
            .iter()
            .map(|&t| {
                let pt = self.at(t);
                self.fast.residual(&pt.x, &pt.chi1, &pt.z2, &pt.chi2)
            })
            .fold(T::zero(), |a, b| a.max(b))
    }
}

/// Reduces, solves and attaches the outer fast variables.
pub fn outer_solution<T: Real>(p: &SpLqProblem<T>, opts: &SolveOptions<T>) -> Result<(ReducedProblem<T>, OuterSolution<T>)> {
    let rp = build_reduced(p)?;
    let reduced = solve_reduced(&rp, opts)?;
    let fast = OuterFastSolver::new(p)?;
    Ok((
        rp,
        OuterSolution {
            reduced,
            fast,
            r_inv: p.r_inv(),
            b1t: p.b1.transpose(),
            b2t: p.b2.transpose(),
        },
    ))
}
