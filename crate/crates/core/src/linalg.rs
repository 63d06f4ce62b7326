//! Small dense linear-algebra helpers on top of `nalgebra`.
//!
//! Everything here works on dynamically sized `f64` matrices. The
//! problem dimensions are small (a handful of states and controls), so
//! the helpers favour clarity over blocking or SIMD tricks.

use nalgebra::linalg::{SymmetricEigen, LU, SVD};
use nalgebra::{DMatrix, DVector, Dyn};

use crate::error::Error;

/// Dense real matrix.
pub type Matrix = DMatrix<f64>;
/// Dense real column vector.
pub type Vector = DVector<f64>;

/// `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Frobenius norm of `M − Mᵀ`.
pub fn asymmetry(m: &Matrix) -> f64 {
    (m - m.transpose()).norm()
}

/// Asymmetry relative to `max(1, ‖M‖_F)`.
pub fn relative_asymmetry(m: &Matrix) -> f64 {
    asymmetry(m) / m.norm().max(1.0)
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn sym_eigenvalues(m: &Matrix) -> Vector {
    if m.nrows() == 0 {
        return Vector::zeros(0);
    }
    let mut ev = SymmetricEigen::new(symmetrize(m)).eigenvalues;
    ev.as_mut_slice().sort_by(f64::total_cmp);
    ev
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_eigenvalue(m: &Matrix) -> f64 {
    sym_eigenvalues(m).iter().copied().fold(f64::INFINITY, f64::min)
}

/// `max(1, max |λ|)` for a symmetric matrix; the scale used by the
/// positivity thresholds.
pub fn spectral_scale(m: &Matrix) -> f64 {
    sym_eigenvalues(m).iter().fold(1.0_f64, |acc, l| acc.max(l.abs()))
}

/// PSD test with threshold `λ_min ≥ −tol · max(1, ‖M‖)`.
pub fn is_psd(m: &Matrix, tol: f64) -> bool {
    min_eigenvalue(m) >= -tol * spectral_scale(m)
}

/// Square root factor `D` with `D Dᵀ = M` for a symmetric PSD matrix.
/// Negative eigenvalues (rounding noise) are clamped to zero.
pub fn psd_sqrt(m: &Matrix) -> Matrix {
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut v = eig.eigenvectors;
    for (j, l) in eig.eigenvalues.iter().enumerate() {
        let s = libm::sqrt(l.max(0.0));
        v.column_mut(j).scale_mut(s);
    }
    v
}

/// 2-norm condition number via singular values. Returns `∞` for a
/// singular matrix.
pub fn condition_number(m: &Matrix) -> f64 {
    if m.nrows() == 0 {
        return 1.0;
    }
    let sv = SVD::new(m.clone(), false, false).singular_values;
    let max = sv.iter().copied().fold(0.0_f64, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Inverse of a small symmetric positive definite matrix (used for the
/// `m × m` control weights only).
pub fn spd_inverse(m: &Matrix, what: &'static str, step: usize) -> Result<Matrix, Error> {
    match symmetrize(m).cholesky() {
        Some(ch) => Ok(symmetrize(&ch.inverse())),
        None => Err(Error::Singular {
            what,
            step,
            condition: condition_number(m),
        }),
    }
}

/// LU factorization with partial pivoting, kept together with a
/// condition estimate so the factor can be reused for many solves.
#[derive(Clone, Debug)]
pub struct Factor {
    lu: LU<f64, Dyn, Dyn>,
    condition: f64,
}

/// Matrices with a condition estimate above this are treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e14;

impl Factor {
    pub fn new(m: &Matrix, what: &'static str, step: usize) -> Result<Self, Error> {
        let condition = condition_number(m);
        let lu = m.clone().lu();
        if !lu.is_invertible() || condition.is_nan() || condition >= SINGULAR_CONDITION {
            return Err(Error::Singular {
                what,
                step,
                condition,
            });
        }
        Ok(Self { lu, condition })
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Solves `M X = rhs`.
    pub fn solve(&self, rhs: &Matrix) -> Matrix {
        // invertibility was checked at construction
        self.lu.solve(rhs).expect("factor is invertible")
    }

    pub fn solve_vec(&self, rhs: &Vector) -> Vector {
        self.lu.solve(rhs).expect("factor is invertible")
    }
}

/// Quadratic form `⟨M v, v⟩`.
pub fn quad(m: &Matrix, v: &Vector) -> f64 {
    (m * v).dot(v)
}

/// Broadcasts one vector to `count` identical columns.
pub fn repeat_columns(v: &Vector, count: usize) -> Matrix {
    Matrix::from_fn(v.len(), count, |i, _| v[i])
}

pub fn all_finite(m: &Matrix) -> bool {
    m.iter().all(|x| x.is_finite())
}
