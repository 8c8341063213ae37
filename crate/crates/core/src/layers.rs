//! Fast Hamiltonian splitting, boundary-layer corrections and the
//! zeroth-order composite control.
//!
//! In stretched time the fast state/costate pair obeys `w' = G w` with
//!
//! ```text
//!   G = [ A₂₂   −b₂R⁻¹b₂ᵀ ]
//!       [ −Q₂₂  −A₂₂ᵀ     ]
//! ```
//!
//! `T` splits `G` into its stable and unstable invariant subspaces,
//! `T⁻¹GT = blkdiag(−Λ_s, Λ_u)`. The initial layer lives on the stable
//! subspace and decays in `τ = t/ε`; the final layer lives on the unstable
//! subspace and decays in `σ = (T_f − t)/ε`.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result, StageExt};
use crate::linalg::{self, block, block2x2};
use crate::options::SolveOptions;
use crate::problem::{SpLqProblem, EIGENVALUE_TOLERANCE, SINGULARITY_CONDITION};
use crate::reduced::{outer_solution, OuterPoint, OuterSolution, ReducedProblem};
use crate::scalar::Real;

/// `G` from the order-zero fast blocks.
pub fn hamiltonian_fast_matrix<T: Real>(p: &SpLqProblem<T>) -> DMatrix<T> {
    let s22 = &p.b2 * p.r_inv() * p.b2.transpose();
    block2x2(&p.a22, &(-s22), &(-p.q22()), &(-p.a22.transpose()))
}

/// Real block diagonalization of `G`.
#[derive(Clone, Debug)]
pub struct LayerDecomposition<T: Real> {
    pub g: DMatrix<T>,
    /// Columns: stable invariant subspace, then unstable.
    pub t: DMatrix<T>,
    pub t_inv: DMatrix<T>,
    pub t11: DMatrix<T>,
    pub t12: DMatrix<T>,
    pub t21: DMatrix<T>,
    pub t22: DMatrix<T>,
    /// `−(T⁻¹GT)₁₁`; spectrum in the open right half-plane.
    pub lambda_stable: DMatrix<T>,
    /// `(T⁻¹GT)₂₂`; spectrum in the open right half-plane.
    pub lambda_unstable: DMatrix<T>,
    /// Eigenvalues of `G` in column order (each conjugate pair once per column).
    pub eigenvalues: Vec<Complex<T>>,
    /// `‖T⁻¹GT − blkdiag(−Λ_s, Λ_u)‖_F / ‖G‖_F`.
    pub residual: T,
}

impl<T: Real> LayerDecomposition<T> {
    pub fn n(&self) -> usize {
        self.t11.nrows()
    }

    /// Eigenvalues of `Λ_s` (positive real parts), in column order.
    pub fn lambda_eigenvalues(&self) -> Vec<Complex<T>> {
        self.eigenvalues[..self.n()].iter().map(|z| -*z).collect()
    }
}

/// One invariant-subspace unit: a real eigenvalue cluster or a conjugate
/// pair cluster, with real basis columns.
struct Unit<T: Real> {
    re: T,
    columns: Vec<DVector<T>>,
    eigenvalues: Vec<Complex<T>>,
}

fn normalize_column<T: Real>(mut v: DVector<T>) -> DVector<T> {
    let norm = v.norm();
    if norm > T::zero() {
        v /= norm;
    }
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() + T::lit(64.0) * T::machine_eps() {
            best = i;
        }
    }
    if v[best] < T::zero() {
        v = -v;
    }
    v
}

/// Orthonormal basis of the numerical null space of `m`, `dim` vectors.
fn real_null_space<T: Real>(m: DMatrix<T>, dim: usize) -> Vec<DVector<T>> {
    let cols = m.ncols();
    let svd = nalgebra::SVD::new(m, false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    (cols - dim..cols).map(|r| vt.row(r).transpose()).collect()
}

fn complex_null_space<T: Real>(m: DMatrix<Complex<T>>, dim: usize) -> Vec<DVector<Complex<T>>> {
    let cols = m.ncols();
    let svd = nalgebra::SVD::new(m, false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    (cols - dim..cols).map(|r| vt.row(r).adjoint()).collect()
}

/// Splits a complex eigenvector into two real columns after rotating its
/// phase so the real and imaginary parts are orthogonal.
fn real_pair<T: Real>(v: &DVector<Complex<T>>) -> (DVector<T>, DVector<T>) {
    let vr = v.map(|z| z.re);
    let vi = v.map(|z| z.im);
    let a = vr.norm_squared();
    let b = vi.norm_squared();
    let d = vr.dot(&vi);
    let phi = (-d).atan2((a - b) * T::lit(0.5)) * T::lit(0.5);
    let (s, c) = phi.sin_cos();
    (&vr * c - &vi * s, &vr * s + &vi * c)
}

fn modulus<T: Real>(z: Complex<T>) -> T {
    (z.re * z.re + z.im * z.im).sqrt()
}

fn group_by<T: Real>(mut values: Vec<Complex<T>>, tol: T) -> Vec<Vec<Complex<T>>> {
    values.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
    let mut groups: Vec<Vec<Complex<T>>> = Vec::new();
    for z in values {
        match groups.last_mut() {
            Some(g) if modulus(g[0] - z) <= tol => g.push(z),
            _ => groups.push(vec![z]),
        }
    }
    groups
}

/// Computes `T` and `Λ` for a `2n × 2n` matrix `G` with exactly `n`
/// eigenvalues in each open half-plane.
///
/// Columns of `T` have unit norm with their largest-magnitude entry
/// positive. Within each half, invariant subspaces are ordered by ascending
/// real part; complex pairs contribute two real columns.
pub fn block_diagonalize<T: Real>(g: &DMatrix<T>, n: usize) -> Result<LayerDecomposition<T>> {
    assert_eq!(g.shape(), (2 * n, 2 * n), "G must be 2n x 2n");
    let ev = linalg::eigenvalues(g)
        .ok_or_else(|| Error::SingularSystem("Schur iteration did not converge".into()))?;
    let thresh = T::lit(EIGENVALUE_TOLERANCE);
    let stable = ev.iter().filter(|z| z.re < -thresh).count();
    let unstable = ev.iter().filter(|z| z.re > thresh).count();
    if stable != n || unstable != n {
        return Err(Error::EigSplit { stable, expected: n });
    }

    let scale = g.norm().max(T::one());
    let cluster_tol = T::machine_eps().sqrt() * T::lit(100.0) * scale;
    let imag_tol = T::machine_eps() * T::lit(1e4) * scale;
    let (real_ev, complex_ev): (Vec<_>, Vec<_>) = ev.iter().partition(|z| z.im.abs() <= imag_tol);
    let upper: Vec<Complex<T>> = complex_ev.into_iter().filter(|z: &Complex<T>| z.im > T::zero()).collect();

    let dim = 2 * n;
    let mut units: Vec<Unit<T>> = Vec::new();
    for grp in group_by(real_ev.into_iter().map(|z| Complex::new(z.re, T::zero())).collect(), cluster_tol) {
        let lam = grp.iter().map(|z| z.re).fold(T::zero(), |a, b| a + b) / T::from_count(grp.len());
        let shifted = g - DMatrix::identity(dim, dim) * lam;
        units.push(Unit {
            re: lam,
            columns: real_null_space(shifted, grp.len()),
            eigenvalues: grp,
        });
    }
    for grp in group_by(upper, cluster_tol) {
        let k = T::from_count(grp.len());
        let lam = grp.iter().fold(Complex::new(T::zero(), T::zero()), |a, b| a + *b) / Complex::new(k, T::zero());
        let shifted = g.map(|v| Complex::new(v, T::zero())) - DMatrix::identity(dim, dim) * lam;
        let mut columns = Vec::new();
        let mut eigenvalues = Vec::new();
        for (v, z) in complex_null_space(shifted, grp.len()).iter().zip(&grp) {
            let (a, b) = real_pair(v);
            columns.push(a);
            columns.push(b);
            eigenvalues.push(*z);
            eigenvalues.push(z.conj());
        }
        units.push(Unit {
            re: lam.re,
            columns,
            eigenvalues,
        });
    }
    units.sort_by(|a, b| {
        let side = |u: &Unit<T>| u.re > T::zero();
        side(a).cmp(&side(b)).then(a.re.partial_cmp(&b.re).unwrap())
    });

    let mut t = DMatrix::zeros(dim, dim);
    let mut eigenvalues = Vec::with_capacity(dim);
    let mut col = 0;
    for u in units {
        for c in u.columns {
            t.set_column(col, &normalize_column(c));
            col += 1;
        }
        eigenvalues.extend(u.eigenvalues);
    }
    debug_assert_eq!(col, dim);

    let cond = linalg::condition_number(&t);
    if cond.as_f64() > SINGULARITY_CONDITION {
        return Err(Error::Nonsingularity {
            matrix: "T",
            condition: cond.as_f64(),
        });
    }
    let t_inv = t.clone().try_inverse().ok_or(Error::Nonsingularity {
        matrix: "T",
        condition: f64::INFINITY,
    })?;
    let d = &t_inv * g * &t;
    let lambda_stable = -block(&d, 0, 0, n, n);
    let lambda_unstable = block(&d, n, n, n, n);
    let off = block(&d, 0, n, n, n).norm_squared() + block(&d, n, 0, n, n).norm_squared();
    let residual = off.sqrt() / g.norm().max(T::min_value().unwrap());
    let limit = T::lit(1e-9).max(T::machine_eps() * T::lit(1e5));
    if residual > limit {
        return Err(Error::DecompositionResidual {
            residual: residual.as_f64(),
            tolerance: limit.as_f64(),
        });
    }

    Ok(LayerDecomposition {
        g: g.clone(),
        t11: block(&t, 0, 0, n, n),
        t12: block(&t, 0, n, n, n),
        t21: block(&t, n, 0, n, n),
        t22: block(&t, n, n, n, n),
        t,
        t_inv,
        lambda_stable,
        lambda_unstable,
        eigenvalues,
        residual,
    })
}

fn solve_checked<T: Real>(m: &DMatrix<T>, rhs: &DVector<T>, name: &'static str) -> Result<DVector<T>> {
    let cond = linalg::condition_number(m);
    if cond.as_f64() > SINGULARITY_CONDITION {
        return Err(Error::Nonsingularity {
            matrix: name,
            condition: cond.as_f64(),
        });
    }
    m.clone().lu().solve(rhs).ok_or(Error::Nonsingularity {
        matrix: name,
        condition: f64::INFINITY,
    })
}

/// Decaying solution `e^{−Λs}c` of a layer with state and costate maps.
#[derive(Clone, Debug)]
pub struct Layer<T: Real> {
    pub constant: DVector<T>,
    pub lambda: DMatrix<T>,
    state_map: DMatrix<T>,
    costate_map: DMatrix<T>,
}

impl<T: Real> Layer<T> {
    /// `e^{−Λs} c`.
    pub fn mode(&self, s: T) -> DVector<T> {
        if self.constant.iter().all(|v| *v == T::zero()) {
            return self.constant.clone();
        }
        (&self.lambda * (-s)).exp() * &self.constant
    }

    pub fn state(&self, s: T) -> DVector<T> {
        &self.state_map * self.mode(s)
    }

    pub fn costate(&self, s: T) -> DVector<T> {
        &self.costate_map * self.mode(s)
    }

    /// Slowest decay rate, the smallest real part in the spectrum of `Λ`.
    pub fn decay_rate(&self) -> T {
        linalg::eigenvalues(&self.lambda)
            .map(|ev| ev.iter().map(|z| z.re).fold(T::max_value().unwrap(), |a, b| a.min(b)))
            .unwrap_or(T::zero())
    }
}

/// Initial layer in `τ = t/ε`: `z₂ = T₁₁e^{−Λ_sτ}c`, `χ₂ = T₂₁e^{−Λ_sτ}c`.
pub type InitialLayer<T> = Layer<T>;
/// Final layer in `σ = (T_f − t)/ε`: `z₂ = T₁₂e^{−Λ_uσ}c₁`, `χ₂ = T₂₂e^{−Λ_uσ}c₁`.
pub type FinalLayer<T> = Layer<T>;

/// `c = T₁₁⁻¹ · gap` where `gap = z₂(0) − z₂,ₒ(0)`.
pub fn initial_layer<T: Real>(ld: &LayerDecomposition<T>, z2_init_gap: &DVector<T>) -> Result<InitialLayer<T>> {
    let c = solve_checked(&ld.t11, z2_init_gap, "T11")?;
    Ok(Layer {
        constant: c,
        lambda: ld.lambda_stable.clone(),
        state_map: ld.t11.clone(),
        costate_map: ld.t21.clone(),
    })
}

/// `c₁ = (T₂₂ − π₂₂T₁₂)⁻¹(π₁₂ᵀx(T_f) + π₂₂z₂,ₒ(T_f) − χ₂,ₒ(T_f))`.
pub fn final_layer<T: Real>(
    ld: &LayerDecomposition<T>,
    pi12: &DMatrix<T>,
    pi22: &DMatrix<T>,
    outer_terminal: &OuterPoint<T>,
) -> Result<FinalLayer<T>> {
    let m = &ld.t22 - pi22 * &ld.t12;
    let rhs = pi12.transpose() * &outer_terminal.x + pi22 * &outer_terminal.z2 - &outer_terminal.chi2;
    let c1 = solve_checked(&m, &rhs, "T22 - pi22 T12")?;
    Ok(Layer {
        constant: c1,
        lambda: ld.lambda_unstable.clone(),
        state_map: ld.t12.clone(),
        costate_map: ld.t22.clone(),
    })
}

/// Slow-state and slow-costate layer corrections, which enter at order ε.
#[derive(Clone, Debug)]
pub struct SlowCorrections<T: Real> {
    initial: Layer<T>,
    fin: Layer<T>,
    /// `−M_iΛ_s⁻¹`, `−N_iΛ_s⁻¹`, `−M_fΛ_u⁻¹`, `−N_fΛ_u⁻¹`.
    z1i: DMatrix<T>,
    chi1i: DMatrix<T>,
    z1f: DMatrix<T>,
    chi1f: DMatrix<T>,
}

impl<T: Real> SlowCorrections<T> {
    pub fn z1_initial(&self, tau: T) -> DVector<T> {
        &self.z1i * self.initial.mode(tau)
    }

    pub fn chi1_initial(&self, tau: T) -> DVector<T> {
        &self.chi1i * self.initial.mode(tau)
    }

    pub fn z1_final(&self, sigma: T) -> DVector<T> {
        &self.z1f * self.fin.mode(sigma)
    }

    pub fn chi1_final(&self, sigma: T) -> DVector<T> {
        &self.chi1f * self.fin.mode(sigma)
    }
}

/// Closed forms that decay to zero and satisfy
/// `dz₁,ᵢ/dτ = A₁₂z₂,ᵢ − S₁₂χ₂,ᵢ`, `dχ₁,ᵢ/dτ = −Q₁₂z₂,ᵢ − A₂₁ᵀχ₂,ᵢ`, and
/// the mirrored equations in `σ` for the final layer.
pub fn slow_layer_corrections<T: Real>(
    p: &SpLqProblem<T>,
    ld: &LayerDecomposition<T>,
    initial: &InitialLayer<T>,
    fin: &FinalLayer<T>,
) -> Result<SlowCorrections<T>> {
    let s12 = p.input_products().s12;
    let q12 = p.q12();
    let a21t = p.a21.transpose();
    let inv = |m: &DMatrix<T>, name: &'static str| {
        m.clone().try_inverse().ok_or(Error::Nonsingularity {
            matrix: name,
            condition: f64::INFINITY,
        })
    };
    let ls_inv = inv(&ld.lambda_stable, "Lambda_s")?;
    let lu_inv = inv(&ld.lambda_unstable, "Lambda_u")?;
    let mi = &p.a12 * &ld.t11 - &s12 * &ld.t21;
    let ni = -(&a21t * &ld.t21 + &q12 * &ld.t11);
    let mf = -(&p.a12 * &ld.t12) + &s12 * &ld.t22;
    let nf = &a21t * &ld.t22 + &q12 * &ld.t12;
    Ok(SlowCorrections {
        initial: initial.clone(),
        fin: fin.clone(),
        z1i: -(mi * &ls_inv),
        chi1i: -(ni * &ls_inv),
        z1f: -(mf * &lu_inv),
        chi1f: -(nf * &lu_inv),
    })
}

/// Zeroth-order composite approximation: outer solution plus initial and
/// final fast layers.
#[derive(Clone, Debug)]
pub struct CompositeApproximation<T: Real> {
    pub order: usize,
    pub epsilon: T,
    pub horizon: T,
    pub reduced: ReducedProblem<T>,
    pub outer: OuterSolution<T>,
    pub decomposition: LayerDecomposition<T>,
    pub initial: InitialLayer<T>,
    pub fin: FinalLayer<T>,
    pub slow: SlowCorrections<T>,
    r_inv_b1t: DMatrix<T>,
    r_inv_b2t: DMatrix<T>,
}

impl<T: Real> CompositeApproximation<T> {
    fn tau(&self, t: T) -> T {
        t / self.epsilon
    }

    fn sigma(&self, t: T) -> T {
        (self.horizon - t) / self.epsilon
    }

    /// `(χ₁, χ₂)` composite costate.
    pub fn costate(&self, t: T) -> DVector<T> {
        let o = self.outer.at(t);
        let chi2 = &o.chi2 + self.initial.costate(self.tau(t)) + self.fin.costate(self.sigma(t));
        linalg::concat(&o.chi1, &chi2)
    }

    /// `u⁰(t) = −R⁻¹(b₁ᵀχ₁,ₒ + b₂ᵀ[χ₂,ₒ + χ₂,ᵢ(t/ε) + χ₂,f((T_f − t)/ε)])`.
    pub fn control(&self, t: T) -> DVector<T> {
        let o = self.outer.at(t);
        let chi2 = &o.chi2 + self.initial.costate(self.tau(t)) + self.fin.costate(self.sigma(t));
        -(&self.r_inv_b1t * &o.chi1 + &self.r_inv_b2t * chi2)
    }

    /// Outer control alone, without layer contributions.
    pub fn outer_control(&self, t: T) -> DVector<T> {
        let o = self.outer.at(t);
        -(&self.r_inv_b1t * &o.chi1 + &self.r_inv_b2t * &o.chi2)
    }

    /// Composite state at order zero, `[x; z₂,ₒ + z₂,ᵢ + z₂,f]`.
    pub fn state(&self, t: T) -> DVector<T> {
        let o = self.outer.at(t);
        let z2 = &o.z2 + self.initial.state(self.tau(t)) + self.fin.state(self.sigma(t));
        linalg::concat(&o.x, &z2)
    }

    /// Composite state including the order-ε slow-layer corrections.
    pub fn state_with_slow_corrections(&self, t: T) -> DVector<T> {
        let mut z = self.state(t);
        let corr = (self.slow.z1_initial(self.tau(t)) + self.slow.z1_final(self.sigma(t))) * self.epsilon;
        let m = corr.len();
        let mut head = z.rows_mut(0, m);
        head += corr;
        z
    }

    /// Size of the layer contributions to the fast costate at `t`.
    pub fn layer_magnitude(&self, t: T) -> T {
        self.initial.costate(self.tau(t)).norm() + self.fin.costate(self.sigma(t)).norm()
    }
}

/// Builds the zeroth-order composite approximation from its pieces.
pub fn composite_control<T: Real>(
    p: &SpLqProblem<T>,
    reduced: ReducedProblem<T>,
    outer: OuterSolution<T>,
    decomposition: LayerDecomposition<T>,
    initial: InitialLayer<T>,
    fin: FinalLayer<T>,
) -> Result<CompositeApproximation<T>> {
    let slow = slow_layer_corrections(p, &decomposition, &initial, &fin)?;
    let r_inv = p.r_inv();
    Ok(CompositeApproximation {
        order: 0,
        epsilon: p.epsilon,
        horizon: p.horizon,
        reduced,
        outer,
        decomposition,
        initial,
        fin,
        slow,
        r_inv_b1t: &r_inv * p.b1.transpose(),
        r_inv_b2t: r_inv * p.b2.transpose(),
    })
}

/// Runs reduction, outer solve, splitting and both layers.
pub fn zeroth_order<T: Real>(p: &SpLqProblem<T>, opts: &SolveOptions<T>) -> Result<CompositeApproximation<T>> {
    let (reduced, outer) = outer_solution(p, opts).stage("reduced_outer")?;
    let g = hamiltonian_fast_matrix(p);
    let ld = block_diagonalize(&g, p.n).stage("block_diagonalize")?;
    let z20 = p.z0.rows(p.m, p.n).into_owned();
    let start = outer.at(T::zero());
    let initial = initial_layer(&ld, &(z20 - &start.z2)).stage("initial_layer")?;
    let end = outer.at(p.horizon);
    let fin = final_layer(&ld, &p.pi12, &p.pi22, &end).stage("final_layer")?;
    composite_control(p, reduced, outer, ld, initial, fin).stage("composite_control")
}
