//! Scalar plumbing shared by every module.

use nalgebra::{DMatrix, DVector, RealField};
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar the numerical core is generic over.
///
/// Implemented for `f32` and `f64`. The associated tolerances scale with the
/// precision of the type so the same code paths work for both.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + std::fmt::Display + 'static
{
    /// Eigenvalues with magnitude below this are treated as exactly zero.
    fn zero_snap() -> Self;
    /// Default tolerance for identities that should hold to rounding.
    fn exact_tol() -> Self;
    /// Default tolerance for subspace comparisons (principal angles).
    fn angle_tol() -> Self;
}

impl Real for f64 {
    fn zero_snap() -> Self {
        1e-12
    }
    fn exact_tol() -> Self {
        1e-10
    }
    fn angle_tol() -> Self {
        1e-8
    }
}

impl Real for f32 {
    fn zero_snap() -> Self {
        1e-5
    }
    fn exact_tol() -> Self {
        1e-4
    }
    fn angle_tol() -> Self {
        1e-3
    }
}

/// Complex scalar over `T`.
pub type C<T> = Complex<T>;
/// Dense complex matrix.
pub type CMat<T> = DMatrix<Complex<T>>;
/// Dense complex column vector.
pub type CVec<T> = DVector<Complex<T>>;

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

/// Converts `T` to `f64` for reporting.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Real number as a complex scalar.
#[inline]
pub fn cr<T: Real>(x: T) -> C<T> {
    Complex::new(x, T::zero())
}

#[inline]
pub(crate) fn czero<T: Real>() -> C<T> {
    Complex::new(T::zero(), T::zero())
}

#[inline]
pub(crate) fn from_usize<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("usize representable in scalar type")
}

/// Largest absolute entry of a matrix.
pub fn max_abs<T: Real>(m: &CMat<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc.max(z.norm_sqr().sqrt()))
}

/// Spectral norm (largest singular value); zero for empty matrices.
pub fn op_norm<T: Real>(m: &CMat<T>) -> T {
    if m.nrows() == 0 || m.ncols() == 0 {
        return T::zero();
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(T::zero(), |acc, &s| acc.max(s))
}

/// Converts a real matrix into a complex one.
pub fn complexify<T: Real>(m: &DMatrix<T>) -> CMat<T> {
    m.map(cr)
}

/// Diagonal complex matrix from real entries.
pub fn diag_c<T: Real>(d: &[T]) -> CMat<T> {
    let n = d.len();
    let mut m = CMat::<T>::zeros(n, n);
    for (i, &x) in d.iter().enumerate() {
        m[(i, i)] = cr(x);
    }
    m
}

/// Inner product `⟨x, y⟩`, linear in `x` and conjugate linear in `y`.
#[inline]
pub fn inner<T: Real>(x: &CVec<T>, y: &CVec<T>) -> C<T> {
    y.dotc(x)
}
