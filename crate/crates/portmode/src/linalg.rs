//! Dense complex linear-algebra kernel.
//!
//! Thin, checked wrappers over LAPACK (through `ndarray-linalg`) providing
//! the three operations every optimizer in this crate needs: a factorized
//! multi-RHS linear solve, a Hermitian-definite pencil eigensolver and a
//! general (non-Hermitian) eigensolver. Eigenvectors are returned with unit
//! Euclidean norm and a deterministic global phase (largest-magnitude entry
//! real and positive).

use ndarray::{Array1, Array2, Axis};
use ndarray_linalg::{
    Cholesky, Diag, Eig, Eigh, Factorize, ReciprocalConditionNum, Solve, SolveTriangular, UPLO,
};
use num_complex::Complex64;
use thiserror::Error;

use crate::{CMatrix, CVector, C64};

/// Reciprocal-condition / pivot underflow threshold below which a matrix is
/// reported as singular.
pub const SINGULARITY_THRESHOLD: f64 = 1e-300;

/// Relative tolerance for the Hermitian-symmetry precondition check.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is singular (pivot/rcond below {SINGULARITY_THRESHOLD:e})")]
    SingularMatrix,
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("matrix is not Hermitian (relative asymmetry {0:e})")]
    NotHermitian(f64),
    #[error("eigensolver did not converge")]
    NoConvergence,
    #[error("dimension mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite entry encountered")]
    NonFinite,
}

/// An eigenvalue together with its unit-norm eigenvector.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: C64,
    pub vector: CVector,
}

fn check_finite(a: &CMatrix) -> Result<(), LinalgError> {
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(LinalgError::NonFinite)
    }
}

fn frob(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Relative deviation of `a` from its own Hermitian transpose.
pub fn hermitian_asymmetry(a: &CMatrix) -> f64 {
    let norm = frob(a).max(f64::MIN_POSITIVE);
    let mut dev = 0.0f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            dev += (a[[i, j]] - a[[j, i]].conj()).norm_sqr();
        }
    }
    dev.sqrt() / norm
}

/// Fix the global phase of `v` so its largest-magnitude entry is real and
/// positive, then normalize to unit Euclidean norm.
pub fn normalize_phase(v: &mut CVector) {
    let mut idx = 0;
    let mut best = 0.0f64;
    for (i, z) in v.iter().enumerate() {
        let m = z.norm();
        if m > best {
            best = m;
            idx = i;
        }
    }
    if best > 0.0 {
        let phase = v[idx] / best;
        let rot = phase.conj();
        v.mapv_inplace(|z| z * rot);
    }
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if n > 0.0 {
        v.mapv_inplace(|z| z / n);
    }
}

/// Hermitian eigendecomposition with an orientation guard: depending on
/// the memory layout handed to LAPACK, the backend can return the
/// conjugates of the eigenvectors. Both orientations share the (real)
/// spectrum, so pick whichever satisfies `A V = V diag(w)` better.
fn eigh_oriented(a: &CMatrix) -> Result<(Array1<f64>, CMatrix), LinalgError> {
    let (vals, vecs) = a.eigh(UPLO::Lower).map_err(|_| LinalgError::NoConvergence)?;
    let residual = |v: &CMatrix| -> f64 {
        let mut av = a.dot(v);
        for (j, &w) in vals.iter().enumerate() {
            let mut col = av.index_axis_mut(Axis(1), j);
            col.zip_mut_with(&v.index_axis(Axis(1), j), |x, y| *x -= y * w);
        }
        frob(&av)
    };
    let conj = vecs.mapv(|z| z.conj());
    if residual(&conj) < residual(&vecs) {
        Ok((vals, conj))
    } else {
        Ok((vals, vecs))
    }
}

/// Solve `A X = B` for a square `A` through a pivoted LU factorization.
pub fn solve_linear(a: &CMatrix, b: &CMatrix) -> Result<CMatrix, LinalgError> {
    if a.nrows() != a.ncols() {
        return Err(LinalgError::ShapeMismatch(format!(
            "A must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if b.nrows() != a.nrows() {
        return Err(LinalgError::ShapeMismatch(format!(
            "B has {} rows, expected {}",
            b.nrows(),
            a.nrows()
        )));
    }
    check_finite(a)?;
    check_finite(b)?;
    let lu = a.factorize().map_err(|_| LinalgError::SingularMatrix)?;
    let rcond = lu.rcond().map_err(|_| LinalgError::SingularMatrix)?;
    if !(rcond > SINGULARITY_THRESHOLD) {
        return Err(LinalgError::SingularMatrix);
    }
    let mut x = Array2::<Complex64>::zeros(b.raw_dim());
    for (j, col) in b.axis_iter(Axis(1)).enumerate() {
        let sol = lu
            .solve(&col.to_owned())
            .map_err(|_| LinalgError::SingularMatrix)?;
        x.column_mut(j).assign(&sol);
    }
    Ok(x)
}

/// Solve `A x = b` for a single right-hand side.
pub fn solve_vector(a: &CMatrix, b: &CVector) -> Result<CVector, LinalgError> {
    let rhs = b.view().insert_axis(Axis(1)).to_owned();
    let x = solve_linear(a, &rhs)?;
    Ok(x.index_axis(Axis(1), 0).to_owned())
}

/// Solve the Hermitian-definite pencil `A v = lambda B v`.
///
/// `A` must be Hermitian and `B` Hermitian positive-definite. The problem is
/// reduced through a Cholesky factorization `B = L L^H` to a standard
/// Hermitian eigenproblem of `L^-1 A L^-H`. Eigenvalues are real, returned
/// sorted in descending order; the returned vectors are mutually
/// B-orthogonal and scaled to unit Euclidean norm.
pub fn eig_hpd_pencil(a: &CMatrix, b: &CMatrix) -> Result<Vec<EigenPair>, LinalgError> {
    if a.nrows() != a.ncols() || b.nrows() != b.ncols() || a.nrows() != b.nrows() {
        return Err(LinalgError::ShapeMismatch(format!(
            "pencil shapes {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    check_finite(a)?;
    check_finite(b)?;
    let asym = hermitian_asymmetry(a);
    if asym > HERMITIAN_TOL {
        return Err(LinalgError::NotHermitian(asym));
    }
    let bsym = hermitian_asymmetry(b);
    if bsym > HERMITIAN_TOL {
        return Err(LinalgError::NotHermitian(bsym));
    }
    let l = b
        .cholesky(UPLO::Lower)
        .map_err(|_| LinalgError::NotPositiveDefinite)?;
    // M = L^-1 A L^-H, computed with two triangular solves.
    let t = l
        .solve_triangular(UPLO::Lower, Diag::NonUnit, a)
        .map_err(|_| LinalgError::SingularMatrix)?;
    let th = conj_t(&t);
    let m_t = l
        .solve_triangular(UPLO::Lower, Diag::NonUnit, &th)
        .map_err(|_| LinalgError::SingularMatrix)?;
    // m_t = (L^-1 A L^-H)^H = L^-1 A L^-H since the product is Hermitian;
    // symmetrize to wash out rounding before the LAPACK call.
    let m = symmetrize(&m_t);
    let (vals, vecs) = eigh_oriented(&m)?;
    let lh = conj_t(&l);
    let back = lh
        .solve_triangular(UPLO::Upper, Diag::NonUnit, &vecs)
        .map_err(|_| LinalgError::SingularMatrix)?;
    let mut pairs: Vec<EigenPair> = vals
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let mut v = back.column(i).to_owned();
            normalize_phase(&mut v);
            EigenPair {
                value: C64::new(w, 0.0),
                vector: v,
            }
        })
        .collect();
    pairs.sort_by(|p, q| q.value.re.total_cmp(&p.value.re));
    Ok(pairs)
}

/// Eigendecomposition of a general square complex matrix.
///
/// Returns all eigenpairs sorted by descending real part (ties broken by
/// descending imaginary part).
pub fn eig_general(a: &CMatrix) -> Result<Vec<EigenPair>, LinalgError> {
    if a.nrows() != a.ncols() {
        return Err(LinalgError::ShapeMismatch(format!(
            "matrix must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    check_finite(a)?;
    let (vals, vecs) = a.eig().map_err(|_| LinalgError::NoConvergence)?;
    let mut pairs: Vec<EigenPair> = vals
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let mut v = vecs.column(i).to_owned();
            normalize_phase(&mut v);
            EigenPair { value: w, vector: v }
        })
        .collect();
    pairs.sort_by(|p, q| {
        q.value
            .re
            .total_cmp(&p.value.re)
            .then(q.value.im.total_cmp(&p.value.im))
    });
    Ok(pairs)
}

/// Eigendecomposition of a Hermitian matrix, values ascending.
pub fn eigh_ascending(a: &CMatrix) -> Result<(Array1<f64>, CMatrix), LinalgError> {
    let asym = hermitian_asymmetry(a);
    if asym > HERMITIAN_TOL {
        return Err(LinalgError::NotHermitian(asym));
    }
    let m = symmetrize(a);
    eigh_oriented(&m)
}

/// Conjugate transpose.
pub fn conj_t(a: &CMatrix) -> CMatrix {
    a.t().mapv(|z| z.conj())
}

/// Hermitian part `(A + A^H)/2`.
pub fn symmetrize(a: &CMatrix) -> CMatrix {
    let ah = conj_t(a);
    (a + &ah).mapv(|z| z * 0.5)
}
