//! Random test objects: Hermitian matrices, vectors, subspaces.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::scalar::{lit, CMat, CVec, Real, C};

fn gauss<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    let x: f64 = rng.sample(StandardNormal);
    lit(x)
}

/// Complex vector with independent standard Gaussian parts.
pub fn complex_vector<T: Real, R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVec<T> {
    CVec::<T>::from_fn(n, |_, _| C::new(gauss(rng), gauss(rng)))
}

/// Real Gaussian vector embedded in `ℂⁿ`.
pub fn real_vector<T: Real, R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVec<T> {
    CVec::<T>::from_fn(n, |_, _| C::new(gauss(rng), T::zero()))
}

/// Complex Gaussian matrix.
pub fn complex_matrix<T: Real, R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat<T> {
    CMat::<T>::from_fn(rows, cols, |_, _| C::new(gauss(rng), gauss(rng)))
}

/// `(G + Gᴴ)/2` for a complex Gaussian `G`.
pub fn hermitian<T: Real, R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMat<T> {
    let g = complex_matrix::<T, R>(rng, n, n);
    (&g + g.adjoint()) * C::new(lit::<T>(0.5), T::zero())
}

/// Real symmetric Gaussian matrix, as a complex matrix.
pub fn real_symmetric<T: Real, R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMat<T> {
    let g = CMat::<T>::from_fn(n, n, |_, _| C::new(gauss(rng), T::zero()));
    (&g + g.transpose()) * C::new(lit::<T>(0.5), T::zero())
}

/// Orthonormal basis of a random `k`-dimensional subspace of `ℂⁿ`.
pub fn subspace<T: Real, R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> CMat<T> {
    crate::bc::orth(&complex_matrix::<T, R>(rng, n, k))
}

/// Orthogonal projector onto a random `k`-dimensional subspace.
pub fn projector<T: Real, R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> CMat<T> {
    let q = subspace::<T, R>(rng, n, k);
    &q * q.adjoint()
}

/// Well conditioned invertible matrix `I + G/(4√n)`.
pub fn invertible<T: Real, R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMat<T> {
    let s = C::new(lit::<T>(0.25 / (n.max(1) as f64).sqrt()), T::zero());
    CMat::<T>::identity(n, n) + complex_matrix::<T, R>(rng, n, n) * s
}
