//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{Complex, DMatrix, DVector, Schur, SymmetricEigen, SVD};

use crate::scalar::Real;

pub fn symmetrize<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    (m + m.transpose()) * T::lit(0.5)
}

/// `‖M − Mᵀ‖_F / max(‖M‖_F, tiny)`.
pub fn relative_asymmetry<T: Real>(m: &DMatrix<T>) -> T {
    let scale = m.norm().max(T::min_value().unwrap_or(T::machine_eps()));
    (m - m.transpose()).norm() / scale
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_symmetric_eigenvalue<T: Real>(m: &DMatrix<T>) -> T {
    if m.is_empty() {
        return T::zero();
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    eig.eigenvalues.iter().copied().fold(T::max_value().unwrap(), |a, b| a.min(b))
}

/// Largest eigenvalue of the symmetric part of `m`.
pub fn max_symmetric_eigenvalue<T: Real>(m: &DMatrix<T>) -> T {
    if m.is_empty() {
        return T::zero();
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    eig.eigenvalues.iter().copied().fold(T::min_value().unwrap(), |a, b| a.max(b))
}

/// Eigenvalues of a general real square matrix, via the real Schur form.
pub fn eigenvalues<T: Real>(m: &DMatrix<T>) -> Option<Vec<Complex<T>>> {
    if m.is_empty() {
        return Some(Vec::new());
    }
    let schur = Schur::try_new(m.clone(), T::machine_eps(), 10_000)?;
    Some(schur.complex_eigenvalues().iter().copied().collect())
}

/// 2-norm condition number; infinite when the matrix is numerically singular.
pub fn condition_number<T: Real>(m: &DMatrix<T>) -> T {
    if m.is_empty() {
        return T::one();
    }
    let svd = SVD::new(m.clone(), false, false);
    let sv = &svd.singular_values;
    let max = sv.iter().copied().fold(T::zero(), |a, b| a.max(b));
    let min = sv.iter().copied().fold(T::max_value().unwrap(), |a, b| a.min(b));
    if min <= T::zero() {
        T::max_value().unwrap()
    } else {
        max / min
    }
}

pub fn block<T: Real>(m: &DMatrix<T>, r0: usize, c0: usize, nr: usize, nc: usize) -> DMatrix<T> {
    m.view((r0, c0), (nr, nc)).into_owned()
}

/// Assembles a 2×2 block matrix.
pub fn block2x2<T: Real>(
    a11: &DMatrix<T>,
    a12: &DMatrix<T>,
    a21: &DMatrix<T>,
    a22: &DMatrix<T>,
) -> DMatrix<T> {
    let (r1, c1) = a11.shape();
    let (r2, c2) = a22.shape();
    debug_assert_eq!(a12.shape(), (r1, c2));
    debug_assert_eq!(a21.shape(), (r2, c1));
    let mut out = DMatrix::zeros(r1 + r2, c1 + c2);
    out.view_mut((0, 0), (r1, c1)).copy_from(a11);
    out.view_mut((0, c1), (r1, c2)).copy_from(a12);
    out.view_mut((r1, 0), (r2, c1)).copy_from(a21);
    out.view_mut((r1, c1), (r2, c2)).copy_from(a22);
    out
}

pub fn blkdiag<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    block2x2(
        a,
        &DMatrix::zeros(a.nrows(), b.ncols()),
        &DMatrix::zeros(b.nrows(), a.ncols()),
        b,
    )
}

pub fn vstack<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    assert_eq!(a.ncols(), b.ncols());
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
    out
}

pub fn concat<T: Real>(a: &DVector<T>, b: &DVector<T>) -> DVector<T> {
    let mut out = DVector::zeros(a.len() + b.len());
    out.rows_mut(0, a.len()).copy_from(a);
    out.rows_mut(a.len(), b.len()).copy_from(b);
    out
}

/// Matrix of the linear map `X ↦ X·F + Fᵀ·X` acting on column-major `vec(X)`.
pub fn lyapunov_operator<T: Real>(f: &DMatrix<T>) -> DMatrix<T> {
    let n = f.nrows();
    let id = DMatrix::<T>::identity(n, n);
    let ft = f.transpose();
    ft.kronecker(&id) + id.kronecker(&ft)
}

/// Sup norm over all entries.
pub fn max_abs<T: Real>(m: &DMatrix<T>) -> T {
    m.iter().fold(T::zero(), |a, &b| a.max(b.abs()))
}

pub fn max_abs_vec<T: Real>(v: &DVector<T>) -> T {
    v.iter().fold(T::zero(), |a, &b| a.max(b.abs()))
}

pub fn all_finite<T: Real>(m: &DMatrix<T>) -> bool {
    m.iter().all(|x| x.is_finite_value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn lyapunov_operator_matches_direct_product() {
        let f = dmatrix![1.0, 2.0, 0.5; -1.0, 0.3, 4.0; 0.0, 1.5, -2.0];
        let x = dmatrix![0.2, -1.0, 3.0; 0.7, 0.1, -0.4; 2.0, 0.0, 1.0];
        let direct = &x * &f + f.transpose() * &x;
        let vec_x = DVector::from_column_slice(x.as_slice());
        let via_op = lyapunov_operator(&f) * vec_x;
        assert!((DVector::from_column_slice(direct.as_slice()) - via_op).norm() < 1e-12);
    }

    #[test]
    fn block_assembly_and_extraction() {
        let a = dmatrix![1.0];
        let b = dmatrix![2.0, 3.0];
        let c = dmatrix![4.0; 5.0];
        let d = dmatrix![6.0, 7.0; 8.0, 9.0];
        let m = block2x2(&a, &b, &c, &d);
        assert_eq!(m, dmatrix![1.0, 2.0, 3.0; 4.0, 6.0, 7.0; 5.0, 8.0, 9.0]);
        assert_eq!(block(&m, 1, 1, 2, 2), d);
        assert_eq!(blkdiag(&a, &d)[(0, 1)], 0.0);
    }

    #[test]
    fn spectral_helpers() {
        let m = dmatrix![2.0f64, 1.0; 1.0, 2.0];
        assert!((min_symmetric_eigenvalue(&m) - 1.0).abs() < 1e-12);
        assert!((max_symmetric_eigenvalue(&m) - 3.0).abs() < 1e-12);
        assert!((condition_number(&m) - 3.0).abs() < 1e-10);
        let rot = dmatrix![0.0f64, -1.0; 1.0, 0.0];
        let ev = eigenvalues(&rot).unwrap();
        assert!(ev.iter().all(|z| z.re.abs() < 1e-12 && (z.im.abs() - 1.0).abs() < 1e-12));
        assert!(relative_asymmetry(&rot) > 1.0);
        assert_eq!(relative_asymmetry(&m), 0.0);
    }
}
