//! The singularly perturbed LQ problem instance, its file schema, and the
//! standing-assumption checks.
//!
//! The instance is
//!
//! ```text
//!   minimise  ½∫₀ᵀ (zᵀQz + uᵀRu) dt + ½ z(T)ᵀ π(ε) z(T)
//!   s.t.      ż₁ = A₁₁z₁ + A₁₂z₂ + b₁u
//!           ε ż₂ = A₂₁z₁ + A₂₂z₂ + b₂u,     z(0) = z₀
//! ```
//!
//! with `π(ε) = [[π₁₁, επ₁₂], [επ₁₂ᵀ, επ₂₂]]`. Coefficients are constant in
//! time; accessors still take a time argument so callers never assume it.

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, block, block2x2, blkdiag, vstack};
use crate::scalar::Real;

/// Symmetrization is accepted only below this relative asymmetry.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;
/// Eigenvalue real parts closer to zero than this count as zero.
pub const EIGENVALUE_TOLERANCE: f64 = 1e-9;
/// Condition number above which a matrix is reported singular.
pub const SINGULARITY_CONDITION: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub m: usize,
    pub n: usize,
    pub k: usize,
}

/// On-disk problem schema. Matrices are row-major nested arrays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub dims: Dims,
    pub epsilon: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(rename = "A11")]
    pub a11: Vec<Vec<f64>>,
    #[serde(rename = "A12")]
    pub a12: Vec<Vec<f64>>,
    #[serde(rename = "A21")]
    pub a21: Vec<Vec<f64>>,
    #[serde(rename = "A22")]
    pub a22: Vec<Vec<f64>>,
    pub b1: Vec<Vec<f64>>,
    pub b2: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    pub r: Vec<Vec<f64>>,
    pub pi11: Vec<Vec<f64>>,
    pub pi12: Vec<Vec<f64>>,
    pub pi22: Vec<Vec<f64>>,
    pub z0: Vec<f64>,
}

fn default_horizon() -> f64 {
    1.0
}

/// A validated singularly perturbed LQ instance.
#[derive(Clone, Debug, PartialEq)]
pub struct SpLqProblem<T: Real> {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub epsilon: T,
    pub horizon: T,
    pub a11: DMatrix<T>,
    pub a12: DMatrix<T>,
    pub a21: DMatrix<T>,
    pub a22: DMatrix<T>,
    pub b1: DMatrix<T>,
    pub b2: DMatrix<T>,
    pub q: DMatrix<T>,
    pub r: DMatrix<T>,
    pub pi11: DMatrix<T>,
    pub pi12: DMatrix<T>,
    pub pi22: DMatrix<T>,
    pub z0: DVector<T>,
}

/// Dynamics after multiplying through by `(Iᵉ)⁻¹`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledSystem<T: Real> {
    pub a_hat: DMatrix<T>,
    pub b_hat: DMatrix<T>,
}

/// Control-weighted input products `b_i R⁻¹ b_jᵀ`.
#[derive(Clone, Debug)]
pub struct InputProducts<T: Real> {
    pub s11: DMatrix<T>,
    pub s12: DMatrix<T>,
    pub s22: DMatrix<T>,
}

fn matrix_from_rows(field: &str, rows: &[Vec<f64>], nr: usize, nc: usize) -> Result<DMatrix<f64>> {
    // An empty nested array stands for an nr×0 or 0×nc block.
    if nr == 0 || nc == 0 {
        let ok = rows.is_empty() || rows.iter().all(|r| r.is_empty()) && rows.len() == nr;
        if !ok {
            return Err(Error::DimensionMismatch {
                field: field.into(),
                expected: format!("{nr}x{nc}"),
                found: format!("{} rows", rows.len()),
            });
        }
        return Ok(DMatrix::zeros(nr, nc));
    }
    if rows.len() != nr || rows.iter().any(|r| r.len() != nc) {
        let found = match rows.iter().map(|r| r.len()).collect::<Vec<_>>().as_slice() {
            [] => "0 rows".to_string(),
            lens => format!("{} rows with lengths {:?}", rows.len(), lens),
        };
        return Err(Error::DimensionMismatch {
            field: field.into(),
            expected: format!("{nr}x{nc}"),
            found,
        });
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    if flat.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteEntry { field: field.into() });
    }
    Ok(DMatrix::from_row_slice(nr, nc, &flat))
}

fn to_rows<T: Real>(m: &DMatrix<T>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)].as_f64()).collect())
        .collect()
}

fn symmetrized(field: &str, m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let asym = linalg::relative_asymmetry(&m);
    if asym > SYMMETRY_TOLERANCE {
        return Err(Error::AsymmetryTooLarge {
            field: field.into(),
            asymmetry: asym,
        });
    }
    Ok(linalg::symmetrize(&m))
}

fn require_pd(field: &str, m: &DMatrix<f64>, assumption: Option<&'static str>) -> Result<()> {
    let min = linalg::min_symmetric_eigenvalue(m);
    if !(min > 0.0) {
        return Err(Error::NotPositiveDefinite {
            field: field.into(),
            min_eigenvalue: min,
            assumption,
        });
    }
    Ok(())
}

/// Validates a configuration and converts it into a problem instance.
///
/// Q, R and the π blocks are symmetrized when their relative asymmetry is at
/// most 1e-12. R, Q and π(ε) must be positive definite.
pub fn build_problem<T: Real>(raw: &ProblemConfig) -> Result<SpLqProblem<T>> {
    let Dims { m, n, k } = raw.dims;
    for (field, v) in [("dims.m", m), ("dims.n", n), ("dims.k", k)] {
        if v == 0 {
            return Err(Error::NonPositiveParameter {
                field: field.into(),
                value: 0.0,
            });
        }
    }
    for (field, v) in [("epsilon", raw.epsilon), ("horizon", raw.horizon)] {
        if !v.is_finite() {
            return Err(Error::NonFiniteEntry { field: field.into() });
        }
        if v <= 0.0 {
            return Err(Error::NonPositiveParameter {
                field: field.into(),
                value: v,
            });
        }
    }
    let a11 = matrix_from_rows("A11", &raw.a11, m, m)?;
    let a12 = matrix_from_rows("A12", &raw.a12, m, n)?;
    let a21 = matrix_from_rows("A21", &raw.a21, n, m)?;
    let a22 = matrix_from_rows("A22", &raw.a22, n, n)?;
    let b1 = matrix_from_rows("b1", &raw.b1, m, k)?;
    let b2 = matrix_from_rows("b2", &raw.b2, n, k)?;
    let q = symmetrized("Q", matrix_from_rows("Q", &raw.q, m + n, m + n)?)?;
    let r = symmetrized("R", matrix_from_rows("R", &raw.r, k, k)?)?;
    let pi11 = symmetrized("pi11", matrix_from_rows("pi11", &raw.pi11, m, m)?)?;
    let pi12 = matrix_from_rows("pi12", &raw.pi12, m, n)?;
    let pi22 = symmetrized("pi22", matrix_from_rows("pi22", &raw.pi22, n, n)?)?;
    if raw.z0.len() != m + n {
        return Err(Error::DimensionMismatch {
            field: "z0".into(),
            expected: format!("{}", m + n),
            found: format!("{}", raw.z0.len()),
        });
    }
    if raw.z0.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteEntry { field: "z0".into() });
    }

    require_pd("R", &r, Some("d"))?;
    require_pd("Q", &q, Some("f"))?;
    let eps = raw.epsilon;
    let pi_eps = block2x2(&pi11, &(&pi12 * eps), &(pi12.transpose() * eps), &(&pi22 * eps));
    require_pd("pi(epsilon)", &pi_eps, Some("f"))?;

    let conv = |x: DMatrix<f64>| x.map(|v| T::lit(v));
    Ok(SpLqProblem {
        m,
        n,
        k,
        epsilon: T::lit(eps),
        horizon: T::lit(raw.horizon),
        a11: conv(a11),
        a12: conv(a12),
        a21: conv(a21),
        a22: conv(a22),
        b1: conv(b1),
        b2: conv(b2),
        q: conv(q),
        r: conv(r),
        pi11: conv(pi11),
        pi12: conv(pi12),
        pi22: conv(pi22),
        z0: DVector::from_iterator(m + n, raw.z0.iter().map(|&v| T::lit(v))),
    })
}

impl<T: Real> SpLqProblem<T> {
    /// Total state dimension `m + n`.
    pub fn state_dim(&self) -> usize {
        self.m + self.n
    }

    /// Emits the instance in the file schema.
    pub fn to_config(&self, name: Option<String>) -> ProblemConfig {
        ProblemConfig {
            name,
            dims: Dims {
                m: self.m,
                n: self.n,
                k: self.k,
            },
            epsilon: self.epsilon.as_f64(),
            horizon: self.horizon.as_f64(),
            a11: to_rows(&self.a11),
            a12: to_rows(&self.a12),
            a21: to_rows(&self.a21),
            a22: to_rows(&self.a22),
            b1: to_rows(&self.b1),
            b2: to_rows(&self.b2),
            q: to_rows(&self.q),
            r: to_rows(&self.r),
            pi11: to_rows(&self.pi11),
            pi12: to_rows(&self.pi12),
            pi22: to_rows(&self.pi22),
            z0: self.z0.iter().map(|v| v.as_f64()).collect(),
        }
    }

    /// Same instance at another perturbation parameter.
    pub fn with_epsilon(&self, epsilon: T) -> Result<Self> {
        let mut p = self.clone();
        p.epsilon = epsilon;
        p.check_parameters()?;
        Ok(p)
    }

    pub fn with_horizon(&self, horizon: T) -> Result<Self> {
        let mut p = self.clone();
        p.horizon = horizon;
        p.check_parameters()?;
        Ok(p)
    }

    fn check_parameters(&self) -> Result<()> {
        for (field, v) in [("epsilon", self.epsilon), ("horizon", self.horizon)] {
            if !(v > T::zero()) || !v.is_finite_value() {
                return Err(Error::NonPositiveParameter {
                    field: field.into(),
                    value: v.as_f64(),
                });
            }
        }
        let min = linalg::min_symmetric_eigenvalue(&self.pi());
        if !(min > T::zero()) {
            return Err(Error::NotPositiveDefinite {
                field: "pi(epsilon)".into(),
                min_eigenvalue: min.as_f64(),
                assumption: Some("f"),
            });
        }
        Ok(())
    }

    /// Full dynamics matrix `A` at time `t`.
    pub fn a_at(&self, _t: T) -> DMatrix<T> {
        block2x2(&self.a11, &self.a12, &self.a21, &self.a22)
    }

    pub fn a(&self) -> DMatrix<T> {
        self.a_at(T::zero())
    }

    /// Stacked input matrix `b = [b₁; b₂]`.
    pub fn b(&self) -> DMatrix<T> {
        vstack(&self.b1, &self.b2)
    }

    pub fn q11(&self) -> DMatrix<T> {
        block(&self.q, 0, 0, self.m, self.m)
    }

    pub fn q12(&self) -> DMatrix<T> {
        block(&self.q, 0, self.m, self.m, self.n)
    }

    pub fn q21(&self) -> DMatrix<T> {
        block(&self.q, self.m, 0, self.n, self.m)
    }

    pub fn q22(&self) -> DMatrix<T> {
        block(&self.q, self.m, self.m, self.n, self.n)
    }

    pub fn r_inv(&self) -> DMatrix<T> {
        self.r.clone().try_inverse().expect("R is positive definite")
    }

    pub fn q_inv(&self) -> DMatrix<T> {
        self.q.clone().try_inverse().expect("Q is positive definite")
    }

    /// `Iᵉ = blkdiag(I_m, ε I_n)`.
    pub fn i_eps(&self) -> DMatrix<T> {
        let mut d = DMatrix::identity(self.state_dim(), self.state_dim());
        for i in self.m..self.state_dim() {
            d[(i, i)] = self.epsilon;
        }
        d
    }

    /// `(Iᵉ)⁻¹ = blkdiag(I_m, ε⁻¹ I_n)`.
    pub fn i_eps_inv(&self) -> DMatrix<T> {
        let mut d = DMatrix::identity(self.state_dim(), self.state_dim());
        for i in self.m..self.state_dim() {
            d[(i, i)] = T::one() / self.epsilon;
        }
        d
    }

    /// Applies `(Iᵉ)⁻¹` to a vector.
    pub fn scale_fast_inv(&self, v: &DVector<T>) -> DVector<T> {
        let mut out = v.clone();
        for i in self.m..self.state_dim() {
            out[i] /= self.epsilon;
        }
        out
    }

    /// Applies `Iᵉ` to a vector.
    pub fn scale_fast(&self, v: &DVector<T>) -> DVector<T> {
        let mut out = v.clone();
        for i in self.m..self.state_dim() {
            out[i] *= self.epsilon;
        }
        out
    }

    /// Terminal weight `π(ε)`.
    pub fn pi(&self) -> DMatrix<T> {
        let e = self.epsilon;
        block2x2(
            &self.pi11,
            &(&self.pi12 * e),
            &(self.pi12.transpose() * e),
            &(&self.pi22 * e),
        )
    }

    /// `(Iᵉ)⁻¹ π(ε) = [[π₁₁, επ₁₂], [π₁₂ᵀ, π₂₂]]`, bounded as ε → 0.
    pub fn i_eps_inv_pi(&self) -> DMatrix<T> {
        block2x2(
            &self.pi11,
            &(&self.pi12 * self.epsilon),
            &self.pi12.transpose(),
            &self.pi22,
        )
    }

    pub fn input_products(&self) -> InputProducts<T> {
        let ri = self.r_inv();
        InputProducts {
            s11: &self.b1 * &ri * self.b1.transpose(),
            s12: &self.b1 * &ri * self.b2.transpose(),
            s22: &self.b2 * &ri * self.b2.transpose(),
        }
    }

    /// `J_P` running cost integrand `½(zᵀQz + uᵀRu)`.
    pub fn running_cost(&self, z: &DVector<T>, u: &DVector<T>) -> T {
        (z.dot(&(&self.q * z)) + u.dot(&(&self.r * u))) * T::lit(0.5)
    }

    pub fn terminal_cost(&self, z_end: &DVector<T>) -> T {
        z_end.dot(&(self.pi() * z_end)) * T::lit(0.5)
    }
}

/// `Ahat = (Iᵉ)⁻¹A`, `bhat = (Iᵉ)⁻¹b`.
pub fn scaled_dynamics<T: Real>(p: &SpLqProblem<T>) -> ScaledSystem<T> {
    let mut a_hat = p.a();
    let mut b_hat = p.b();
    for i in p.m..p.state_dim() {
        for j in 0..a_hat.ncols() {
            a_hat[(i, j)] /= p.epsilon;
        }
        for j in 0..b_hat.ncols() {
            b_hat[(i, j)] /= p.epsilon;
        }
    }
    ScaledSystem { a_hat, b_hat }
}

/// One checked assumption.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssumptionCheck {
    /// Assumption tag, e.g. `"a"` or `"a-hurwitz"`.
    pub tag: &'static str,
    pub description: &'static str,
    pub passed: bool,
    /// Offending or limiting value (eigenvalue, condition number, ...).
    pub witness: f64,
    pub tolerance: f64,
    /// Advisory checks are reported but do not gate [`AssumptionReport::all_passed`].
    pub advisory: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || c.advisory)
    }

    pub fn get(&self, tag: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.tag == tag)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AssumptionCheck> {
        self.checks.iter().filter(|c| !c.passed && !c.advisory)
    }

    /// Failed advisory checks.
    pub fn warnings(&self) -> impl Iterator<Item = &AssumptionCheck> {
        self.checks.iter().filter(|c| !c.passed && c.advisory)
    }
}

impl std::fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "({:<14}) {:<4} witness={:>14.6e} tol={:.1e}  {}",
                c.tag,
                match (c.passed, c.advisory) {
                    (true, _) => "ok",
                    (false, true) => "warn",
                    (false, false) => "FAIL",
                },
                c.witness,
                c.tolerance,
                c.description
            )?;
        }
        Ok(())
    }
}

fn max_real_part<T: Real>(ev: &[Complex<T>]) -> T {
    ev.iter().map(|z| z.re).fold(T::min_value().unwrap(), |a, b| a.max(b))
}

/// Checks the standing assumptions. Never fails; consumers decide.
pub fn validate_assumptions<T: Real>(p: &SpLqProblem<T>) -> AssumptionReport {
    let tol = EIGENVALUE_TOLERANCE;
    let mut checks = Vec::new();

    let sym_a22 = linalg::max_symmetric_eigenvalue(&p.a22).as_f64();
    checks.push(AssumptionCheck {
        tag: "a",
        description: "symmetric part of A22 negative definite",
        passed: sym_a22 < -tol,
        witness: sym_a22,
        tolerance: tol,
        advisory: true,
    });
    let hurwitz = linalg::eigenvalues(&p.a22)
        .map(|ev| max_real_part(&ev).as_f64())
        .unwrap_or(f64::NAN);
    checks.push(AssumptionCheck {
        tag: "a-hurwitz",
        description: "A22 Hurwitz (all eigenvalues in the open left half-plane)",
        passed: hurwitz < -tol,
        witness: hurwitz,
        tolerance: tol,
        advisory: false,
    });

    let r_min = linalg::min_symmetric_eigenvalue(&p.r).as_f64();
    checks.push(AssumptionCheck {
        tag: "d",
        description: "R symmetric positive definite",
        passed: r_min > 0.0 && linalg::relative_asymmetry(&p.r).as_f64() <= SYMMETRY_TOLERANCE,
        witness: r_min,
        tolerance: 0.0,
        advisory: false,
    });

    checks.push(AssumptionCheck {
        tag: "e",
        description: "pi(epsilon) has the [[pi11, eps pi12], [eps pi12^T, eps pi22]] block structure",
        passed: p.pi11.shape() == (p.m, p.m)
            && p.pi12.shape() == (p.m, p.n)
            && p.pi22.shape() == (p.n, p.n),
        witness: 0.0,
        tolerance: 0.0,
        advisory: false,
    });

    let q_min = linalg::min_symmetric_eigenvalue(&p.q).as_f64();
    checks.push(AssumptionCheck {
        tag: "f-Q",
        description: "Q symmetric positive definite",
        passed: q_min > 0.0,
        witness: q_min,
        tolerance: 0.0,
        advisory: false,
    });
    let pi_min = linalg::min_symmetric_eigenvalue(&p.pi()).as_f64();
    checks.push(AssumptionCheck {
        tag: "f-pi",
        description: "pi(epsilon) symmetric positive definite",
        passed: pi_min > 0.0,
        witness: pi_min,
        tolerance: 0.0,
        advisory: false,
    });
    let pi22_cond = linalg::condition_number(&p.pi22).as_f64();
    checks.push(AssumptionCheck {
        tag: "f-pi22",
        description: "pi22 invertible",
        passed: pi22_cond <= SINGULARITY_CONDITION,
        witness: pi22_cond,
        tolerance: SINGULARITY_CONDITION,
        advisory: false,
    });

    let g = crate::layers::hamiltonian_fast_matrix(p);
    let g_ev = linalg::eigenvalues(&g);
    let min_abs_re = g_ev
        .as_ref()
        .map(|ev| ev.iter().map(|z| z.re.abs().as_f64()).fold(f64::INFINITY, f64::min))
        .unwrap_or(f64::NAN);
    checks.push(AssumptionCheck {
        tag: "g",
        description: "eigenvalues of G have non-zero real parts",
        passed: min_abs_re > tol,
        witness: min_abs_re,
        tolerance: tol,
        advisory: false,
    });

    let (t11_cond, tf_cond) = match crate::layers::block_diagonalize(&g, p.n) {
        Ok(ld) => {
            let pi22 = &p.pi22;
            let m = &ld.t22 - pi22 * &ld.t12;
            (
                linalg::condition_number(&ld.t11).as_f64(),
                linalg::condition_number(&m).as_f64(),
            )
        }
        Err(_) => (f64::INFINITY, f64::INFINITY),
    };
    checks.push(AssumptionCheck {
        tag: "h-T11",
        description: "T11(0) non-singular",
        passed: t11_cond <= SINGULARITY_CONDITION,
        witness: t11_cond,
        tolerance: SINGULARITY_CONDITION,
        advisory: false,
    });
    checks.push(AssumptionCheck {
        tag: "h-T22",
        description: "T22(T_f) - pi22 T12(T_f) non-singular",
        passed: tf_cond <= SINGULARITY_CONDITION,
        witness: tf_cond,
        tolerance: SINGULARITY_CONDITION,
        advisory: false,
    });

    AssumptionReport { checks }
}

/// Terminal weight blocks at order zero, `(π₁₁, π₁₂, π₂₂)`.
pub fn terminal_blocks<T: Real>(p: &SpLqProblem<T>) -> (DMatrix<T>, DMatrix<T>, DMatrix<T>) {
    (p.pi11.clone(), p.pi12.clone(), p.pi22.clone())
}

/// `blkdiag(I_m, ε I_n)` for arbitrary sizes, used by tests and fixtures.
pub fn i_eps_matrix<T: Real>(m: usize, n: usize, eps: T) -> DMatrix<T> {
    blkdiag(&DMatrix::identity(m, m), &(DMatrix::identity(n, n) * eps))
}
