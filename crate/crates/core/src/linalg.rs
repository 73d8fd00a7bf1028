//! Thin wrappers over the LAPACK divide-and-conquer symmetric eigensolvers.

use ndarray::{Array1, Array2, ShapeBuilder};
use std::os::raw::c_int;

use crate::{Error, Result, C64};

/// Eigen-decomposition of a real symmetric matrix.
///
/// Returns ascending eigenvalues and the matching orthonormal eigenvectors as
/// the columns of the second array. Only the lower triangle is referenced.
pub fn eigh(matrix: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = square_dim(matrix.dim())?;
    if n == 0 {
        return Ok((Array1::zeros(0), Array2::zeros((0, 0))));
    }
    // LAPACK is column-major; for a symmetric matrix the row-major buffer is
    // the same matrix, and the eigenvectors come back column-major.
    let mut a: Vec<f64> = matrix.iter().copied().collect();
    let mut w = vec![0.0; n];
    let n_i = n as c_int;
    let mut info: c_int = 0;

    let mut work_query = [0.0f64];
    let mut iwork_query = [0 as c_int];
    let query: c_int = -1;
    unsafe {
        lapack_sys::dsyevd_(
            c"V".as_ptr(),
            c"U".as_ptr(),
            &n_i,
            a.as_mut_ptr(),
            &n_i,
            w.as_mut_ptr(),
            work_query.as_mut_ptr(),
            &query,
            iwork_query.as_mut_ptr(),
            &query,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack { routine: "dsyevd", info });
    }
    let lwork = work_query[0] as c_int;
    let liwork = iwork_query[0];
    let mut work = vec![0.0f64; lwork.max(1) as usize];
    let mut iwork = vec![0 as c_int; liwork.max(1) as usize];
    unsafe {
        lapack_sys::dsyevd_(
            c"V".as_ptr(),
            c"U".as_ptr(),
            &n_i,
            a.as_mut_ptr(),
            &n_i,
            w.as_mut_ptr(),
            work.as_mut_ptr(),
            &lwork,
            iwork.as_mut_ptr(),
            &liwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack { routine: "dsyevd", info });
    }
    let vectors = Array2::from_shape_vec((n, n).f(), a).expect("buffer has n*n entries");
    Ok((Array1::from(w), vectors))
}

/// Ascending eigenvalues of a complex Hermitian matrix.
pub fn eigvalsh_complex(matrix: &Array2<C64>) -> Result<Array1<f64>> {
    let n = square_dim(matrix.dim())?;
    if n == 0 {
        return Ok(Array1::zeros(0));
    }
    // Row-major storage read as column-major is the transpose, i.e. the
    // complex conjugate of a Hermitian matrix: same spectrum.
    let mut a: Vec<C64> = matrix.iter().copied().collect();
    let mut w = vec![0.0; n];
    let n_i = n as c_int;
    let mut info: c_int = 0;

    let mut work_query = [C64::new(0.0, 0.0)];
    let mut rwork_query = [0.0f64];
    let mut iwork_query = [0 as c_int];
    let query: c_int = -1;
    unsafe {
        lapack_sys::zheevd_(
            c"N".as_ptr(),
            c"U".as_ptr(),
            &n_i,
            a.as_mut_ptr().cast(),
            &n_i,
            w.as_mut_ptr(),
            work_query.as_mut_ptr().cast(),
            &query,
            rwork_query.as_mut_ptr(),
            &query,
            iwork_query.as_mut_ptr(),
            &query,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack { routine: "zheevd", info });
    }
    let lwork = work_query[0].re as c_int;
    let lrwork = rwork_query[0] as c_int;
    let liwork = iwork_query[0];
    let mut work = vec![C64::new(0.0, 0.0); lwork.max(1) as usize];
    let mut rwork = vec![0.0f64; lrwork.max(1) as usize];
    let mut iwork = vec![0 as c_int; liwork.max(1) as usize];
    unsafe {
        lapack_sys::zheevd_(
            c"N".as_ptr(),
            c"U".as_ptr(),
            &n_i,
            a.as_mut_ptr().cast(),
            &n_i,
            w.as_mut_ptr(),
            work.as_mut_ptr().cast(),
            &lwork,
            rwork.as_mut_ptr(),
            &lrwork,
            iwork.as_mut_ptr(),
            &liwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack { routine: "zheevd", info });
    }
    Ok(Array1::from(w))
}

/// Largest absolute difference between a real matrix and its transpose.
pub fn asymmetry(matrix: &Array2<f64>) -> f64 {
    let n = matrix.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            worst = worst.max((matrix[[i, j]] - matrix[[j, i]]).abs());
        }
    }
    worst
}

fn square_dim((rows, cols): (usize, usize)) -> Result<usize> {
    if rows != cols {
        return Err(Error::DimensionMismatch { expected: rows, got: cols });
    }
    Ok(rows)
}
