//! Direct-transcription reference value.
//!
//! Controls are piecewise constant on a uniform grid. Each step is
//! discretized exactly through matrix exponentials: `Φ, Γ` from the
//! augmented generator `[[F, G], [0, 0]]` and the running-cost weight from
//! Van Loan's block exponential. The resulting unconstrained quadratic
//! program is minimised by conjugate gradients with matrix-free
//! Hessian products (forward state sweep, adjoint sweep). Nothing here
//! touches a Riccati equation.

use nalgebra::{DMatrix, DVector};
use spocb::{Problem, Reduced};

pub struct Discretization {
    phi: DMatrix<f64>,
    gamma: DMatrix<f64>,
    /// Exact per-step weight of `[z; u]`.
    w: DMatrix<f64>,
    terminal: DMatrix<f64>,
    steps: usize,
    d: usize,
    k: usize,
}

fn blocks(p: &Problem) -> (DMatrix<f64>, DMatrix<f64>) {
    let (m, n) = (p.m, p.n);
    let d = m + n;
    let mut f = DMatrix::zeros(d, d);
    f.view_mut((0, 0), (m, m)).copy_from(&p.a11);
    f.view_mut((0, m), (m, n)).copy_from(&p.a12);
    f.view_mut((m, 0), (n, m)).copy_from(&(&p.a21 / p.epsilon));
    f.view_mut((m, m), (n, n)).copy_from(&(&p.a22 / p.epsilon));
    let mut g = DMatrix::zeros(d, p.k);
    g.view_mut((0, 0), (m, p.k)).copy_from(&p.b1);
    g.view_mut((m, 0), (n, p.k)).copy_from(&(&p.b2 / p.epsilon));
    (f, g)
}

fn terminal_weight(p: &Problem) -> DMatrix<f64> {
    let (m, n) = (p.m, p.n);
    let mut pi = DMatrix::zeros(m + n, m + n);
    pi.view_mut((0, 0), (m, m)).copy_from(&p.pi11);
    pi.view_mut((0, m), (m, n)).copy_from(&(&p.pi12 * p.epsilon));
    pi.view_mut((m, 0), (n, m)).copy_from(&(p.pi12.transpose() * p.epsilon));
    pi.view_mut((m, m), (n, n)).copy_from(&(&p.pi22 * p.epsilon));
    pi
}

impl Discretization {
    pub fn new(p: &Problem, steps: usize) -> Self {
        let (f, g) = blocks(p);
        Self::from_parts(&f, &g, &p.q, &p.r, terminal_weight(p), p.horizon, steps)
    }

    /// Standard LQ data `ż = Fz + Gu`, weights `Q`, `R`, terminal weight.
    pub fn from_parts(
        f: &DMatrix<f64>,
        g: &DMatrix<f64>,
        q: &DMatrix<f64>,
        r: &DMatrix<f64>,
        terminal: DMatrix<f64>,
        horizon: f64,
        steps: usize,
    ) -> Self {
        let (d, k) = (f.nrows(), g.ncols());
        let h = horizon / steps as f64;
        let e = d + k;
        let mut gen = DMatrix::zeros(e, e);
        gen.view_mut((0, 0), (d, d)).copy_from(f);
        gen.view_mut((0, d), (d, k)).copy_from(g);
        let aug = (&gen * h).exp();
        let phi = aug.view((0, 0), (d, d)).into_owned();
        let gamma = aug.view((0, d), (d, k)).into_owned();

        let mut wc = DMatrix::zeros(e, e);
        wc.view_mut((0, 0), (d, d)).copy_from(q);
        wc.view_mut((d, d), (k, k)).copy_from(r);
        let mut vl = DMatrix::zeros(2 * e, 2 * e);
        vl.view_mut((0, 0), (e, e)).copy_from(&(-gen.transpose()));
        vl.view_mut((0, e), (e, e)).copy_from(&wc);
        vl.view_mut((e, e), (e, e)).copy_from(&gen);
        let big = (vl * h).exp();
        let g12 = big.view((0, e), (e, e)).into_owned();
        let g22 = big.view((e, e), (e, e)).into_owned();
        let w = g22.transpose() * g12;
        let w = (&w + w.transpose()) * 0.5;
        Self {
            phi,
            gamma,
            w,
            terminal,
            steps,
            d,
            k,
        }
    }

    fn states(&self, z0: &DVector<f64>, u: &DVector<f64>) -> Vec<DVector<f64>> {
        let mut z = Vec::with_capacity(self.steps + 1);
        z.push(z0.clone());
        for j in 0..self.steps {
            let next = &self.phi * &z[j] + &self.gamma * u.rows(j * self.k, self.k);
            z.push(next);
        }
        z
    }

    fn stacked(&self, z: &DVector<f64>, u: &DVector<f64>, j: usize) -> DVector<f64> {
        let mut x = DVector::zeros(self.d + self.k);
        x.rows_mut(0, self.d).copy_from(z);
        x.rows_mut(self.d, self.k).copy_from(&u.rows(j * self.k, self.k));
        x
    }

    /// Discrete cost `½Σ xⱼᵀWxⱼ + ½z_Nᵀπz_N`.
    pub fn cost(&self, z0: &DVector<f64>, u: &DVector<f64>) -> f64 {
        let z = self.states(z0, u);
        let running: f64 = (0..self.steps)
            .map(|j| {
                let x = self.stacked(&z[j], u, j);
                x.dot(&(&self.w * &x))
            })
            .sum();
        0.5 * (running + z[self.steps].dot(&(&self.terminal * &z[self.steps])))
    }

    /// Gradient of the cost with respect to the stacked controls.
    fn gradient(&self, z0: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let z = self.states(z0, u);
        let (d, k) = (self.d, self.k);
        let mut grad = DVector::zeros(self.steps * k);
        let mut lam = &self.terminal * &z[self.steps];
        for j in (0..self.steps).rev() {
            let wx = &self.w * self.stacked(&z[j], u, j);
            let gu = wx.rows(d, k) + self.gamma.transpose() * &lam;
            grad.rows_mut(j * k, k).copy_from(&gu);
            lam = wx.rows(0, d) + self.phi.transpose() * &lam;
        }
        grad
    }

    /// Minimises the discrete cost; returns the optimal value.
    pub fn optimal_value(&self, z0: &DVector<f64>) -> f64 {
        let n = self.steps * self.k;
        let zero_state = DVector::zeros(self.d);
        let hess = |v: &DVector<f64>| self.gradient(&zero_state, v);
        let mut u = DVector::zeros(n);
        let mut r = -self.gradient(z0, &u);
        let mut pdir = r.clone();
        let mut rr = r.dot(&r);
        let stop = rr * 1e-28;
        for _ in 0..20 * n {
            if rr <= stop {
                break;
            }
            let hp = hess(&pdir);
            let alpha = rr / pdir.dot(&hp);
            u += &pdir * alpha;
            r -= hp * alpha;
            let rr_new = r.dot(&r);
            pdir = &r + &pdir * (rr_new / rr);
            rr = rr_new;
        }
        self.cost(z0, &u)
    }
}

/// Reference value on `steps` and `2·steps` intervals, Richardson
/// extrapolated assuming second-order convergence in the step.
pub fn transcription_value(p: &Problem, steps: usize) -> (f64, f64) {
    let coarse = Discretization::new(p, steps).optimal_value(&p.z0);
    let fine = Discretization::new(p, 2 * steps).optimal_value(&p.z0);
    ((4.0 * fine - coarse) / 3.0, fine)
}

/// Extrapolated transcription value of a reduced problem, written in the
/// shifted control `v = u − ℛ⁻¹𝒞ᵀx` so it has no cross term.
pub fn reduced_transcription_value(rp: &Reduced, steps: usize) -> f64 {
    let value = |n: usize| {
        Discretization::from_parts(
            &rp.cal_a,
            &rp.cal_b,
            &rp.cal_q,
            &rp.cal_r,
            rp.pi11_0.clone(),
            rp.horizon,
            n,
        )
        .optimal_value(&rp.x0)
    };
    let (coarse, fine) = (value(steps), value(2 * steps));
    (4.0 * fine - coarse) / 3.0
}
