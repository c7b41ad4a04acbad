//! Thin safe wrappers over the system BLAS/LAPACK (OpenBLAS).
//!
//! Matrices are stored column-major in flat `Vec`s, matching the Fortran
//! calling convention, with dimension `n` passed explicitly.
use num_complex::Complex64;
use std::os::raw::c_char;

#[allow(clippy::too_many_arguments)]
extern "C" {
    fn openblas_set_num_threads(n: i32);
    fn dgemm_(transa: *const c_char, transb: *const c_char, m: *const i32, n: *const i32,
              k: *const i32, alpha: *const f64, a: *const f64, lda: *const i32,
              b: *const f64, ldb: *const i32, beta: *const f64, c: *mut f64, ldc: *const i32);
    fn zgemm_(transa: *const c_char, transb: *const c_char, m: *const i32, n: *const i32,
              k: *const i32, alpha: *const Complex64, a: *const Complex64, lda: *const i32,
              b: *const Complex64, ldb: *const i32, beta: *const Complex64,
              c: *mut Complex64, ldc: *const i32);
    fn dsyev_(jobz: *const c_char, uplo: *const c_char, n: *const i32, a: *mut f64,
              lda: *const i32, w: *mut f64, work: *mut f64, lwork: *const i32, info: *mut i32);
    fn zheev_(jobz: *const c_char, uplo: *const c_char, n: *const i32, a: *mut Complex64,
              lda: *const i32, w: *mut f64, work: *mut Complex64, lwork: *const i32,
              rwork: *mut f64, info: *mut i32);
    fn zposv_(uplo: *const c_char, n: *const i32, nrhs: *const i32, a: *mut Complex64,
              lda: *const i32, b: *mut Complex64, ldb: *const i32, info: *mut i32);
    fn dposv_(uplo: *const c_char, n: *const i32, nrhs: *const i32, a: *mut f64,
              lda: *const i32, b: *mut f64, ldb: *const i32, info: *mut i32);
    fn zgesv_(n: *const i32, nrhs: *const i32, a: *mut Complex64, lda: *const i32,
              ipiv: *mut i32, b: *mut Complex64, ldb: *const i32, info: *mut i32);
}

/// Force single-threaded BLAS so results are bit-identical regardless of the
/// process's worker-thread configuration.
pub fn init_single_threaded_blas() {
    unsafe { openblas_set_num_threads(1) };
}

#[derive(Debug, thiserror::Error)]
pub enum LinalgError {
    #[error("LAPACK {routine} failed with info = {info}")]
    Lapack { routine: &'static str, info: i32 },
}

/// C = alpha * op(A) * op(B) + beta * C, column-major; op is 'N', 'T' or 'C'.
#[allow(clippy::too_many_arguments)]
pub fn zgemm(transa: u8, transb: u8, m: usize, n: usize, k: usize, alpha: Complex64,
             a: &[Complex64], lda: usize, b: &[Complex64], ldb: usize, beta: Complex64,
             c: &mut [Complex64], ldc: usize) {
    let (mm, nn, kk) = (m as i32, n as i32, k as i32);
    let (ilda, ildb, ildc) = (lda as i32, ldb as i32, ldc as i32);
    unsafe {
        zgemm_(&(transa as c_char), &(transb as c_char), &mm, &nn, &kk, &alpha,
               a.as_ptr(), &ilda, b.as_ptr(), &ildb, &beta, c.as_mut_ptr(), &ildc);
    }
}

#[allow(clippy::too_many_arguments)]
pub fn dgemm(transa: u8, transb: u8, m: usize, n: usize, k: usize, alpha: f64,
             a: &[f64], lda: usize, b: &[f64], ldb: usize, beta: f64,
             c: &mut [f64], ldc: usize) {
    let (mm, nn, kk) = (m as i32, n as i32, k as i32);
    let (ilda, ildb, ildc) = (lda as i32, ldb as i32, ldc as i32);
    unsafe {
        dgemm_(&(transa as c_char), &(transb as c_char), &mm, &nn, &kk, &alpha,
               a.as_ptr(), &ilda, b.as_ptr(), &ildb, &beta, c.as_mut_ptr(), &ildc);
    }
}

/// Eigendecomposition of a real symmetric matrix (column-major, n x n).
/// Returns (eigenvalues ascending, eigenvectors as columns).
pub fn eigh_real(a: &[f64], n: usize) -> Result<(Vec<f64>, Vec<f64>), LinalgError> {
    let mut v = a.to_vec();
    let mut w = vec![0.0f64; n];
    let ni = n as i32;
    let mut info = 0i32;
    let mut query = [0.0f64];
    let m1 = -1i32;
    unsafe {
        dsyev_(&(b'V' as c_char), &(b'L' as c_char), &ni, v.as_mut_ptr(), &ni,
               w.as_mut_ptr(), query.as_mut_ptr(), &m1, &mut info);
    }
    let lwork = query[0] as i32;
    let mut work = vec![0.0f64; lwork.max(1) as usize];
    unsafe {
        dsyev_(&(b'V' as c_char), &(b'L' as c_char), &ni, v.as_mut_ptr(), &ni,
               w.as_mut_ptr(), work.as_mut_ptr(), &lwork, &mut info);
    }
    if info != 0 {
        return Err(LinalgError::Lapack { routine: "dsyev", info });
    }
    Ok((w, v))
}

/// Eigendecomposition of a complex Hermitian matrix (column-major, n x n).
/// Returns (eigenvalues ascending, eigenvectors as columns).
pub fn eigh_hermitian(a: &[Complex64], n: usize) -> Result<(Vec<f64>, Vec<Complex64>), LinalgError> {
    let mut v = a.to_vec();
    let mut w = vec![0.0f64; n];
    let ni = n as i32;
    let mut info = 0i32;
    let mut rwork = vec![0.0f64; (3 * n).max(1)];
    let mut query = [Complex64::new(0.0, 0.0)];
    let m1 = -1i32;
    unsafe {
        zheev_(&(b'V' as c_char), &(b'L' as c_char), &ni, v.as_mut_ptr(), &ni,
               w.as_mut_ptr(), query.as_mut_ptr(), &m1, rwork.as_mut_ptr(), &mut info);
    }
    let lwork = query[0].re as i32;
    let mut work = vec![Complex64::new(0.0, 0.0); lwork.max(1) as usize];
    unsafe {
        zheev_(&(b'V' as c_char), &(b'L' as c_char), &ni, v.as_mut_ptr(), &ni,
               w.as_mut_ptr(), work.as_mut_ptr(), &lwork, rwork.as_mut_ptr(), &mut info);
    }
    if info != 0 {
        return Err(LinalgError::Lapack { routine: "zheev", info });
    }
    Ok((w, v))
}

/// Solves A X = B for Hermitian positive-definite A (destroys copies, column-major).
/// B holds `nrhs` stacked right-hand sides; returns X.
pub fn solve_hpd(a: &[Complex64], n: usize, b: &[Complex64], nrhs: usize)
                 -> Result<Vec<Complex64>, LinalgError> {
    let mut af = a.to_vec();
    let mut x = b.to_vec();
    let (ni, nr) = (n as i32, nrhs as i32);
    let mut info = 0i32;
    unsafe {
        zposv_(&(b'L' as c_char), &ni, &nr, af.as_mut_ptr(), &ni, x.as_mut_ptr(), &ni, &mut info);
    }
    if info != 0 {
        return Err(LinalgError::Lapack { routine: "zposv", info });
    }
    Ok(x)
}

/// Solves A X = B for real symmetric positive-definite A (column-major).
pub fn solve_spd_real(a: &[f64], n: usize, b: &[f64], nrhs: usize)
                      -> Result<Vec<f64>, LinalgError> {
    let mut af = a.to_vec();
    let mut x = b.to_vec();
    let (ni, nr) = (n as i32, nrhs as i32);
    let mut info = 0i32;
    unsafe {
        dposv_(&(b'L' as c_char), &ni, &nr, af.as_mut_ptr(), &ni, x.as_mut_ptr(), &ni, &mut info);
    }
    if info != 0 {
        return Err(LinalgError::Lapack { routine: "dposv", info });
    }
    Ok(x)
}

/// Solves A X = B for general square A via LU with partial pivoting.
pub fn solve_general(a: &[Complex64], n: usize, b: &[Complex64], nrhs: usize)
                     -> Result<Vec<Complex64>, LinalgError> {
    let mut af = a.to_vec();
    let mut x = b.to_vec();
    let mut ipiv = vec![0i32; n];
    let (ni, nr) = (n as i32, nrhs as i32);
    let mut info = 0i32;
    unsafe {
        zgesv_(&ni, &nr, af.as_mut_ptr(), &ni, ipiv.as_mut_ptr(), x.as_mut_ptr(), &ni, &mut info);
    }
    if info != 0 {
        return Err(LinalgError::Lapack { routine: "zgesv", info });
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigh_real_identity() {
        let (w, _) = eigh_real(&[1.0, 0.0, 0.0, 1.0], 2).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-14 && (w[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn hermitian_eig_known() {
        // [[2, i], [-i, 2]] has eigenvalues 1 and 3.
        let a = [Complex64::new(2.0, 0.0), Complex64::new(0.0, -1.0),
                 Complex64::new(0.0, 1.0), Complex64::new(2.0, 0.0)];
        let (w, _) = eigh_hermitian(&a, 2).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-12 && (w[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn hpd_solve_roundtrip() {
        let a = [Complex64::new(4.0, 0.0), Complex64::new(1.0, -1.0),
                 Complex64::new(1.0, 1.0), Complex64::new(3.0, 0.0)];
        let b = [Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0)];
        let x = solve_hpd(&a, 2, &b, 1).unwrap();
        // check A x = b
        let r0 = a[0] * x[0] + a[2] * x[1] - b[0];
        let r1 = a[1] * x[0] + a[3] * x[1] - b[1];
        assert!(r0.norm() < 1e-12 && r1.norm() < 1e-12);
    }
}
