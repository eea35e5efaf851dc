//! The hybrid boundary spaces `Ȟ(A)` and `Ĥ(A) = Ȟ(−A)`.
//!
//! `Ȟ(A)` measures `χ⁻(A)v` in `H^{1/2}` and `χ⁺(A)v` in the dual of `H^{1/2}`;
//! the two parts are combined as a root-sum-square. Kernel modes sit on the
//! dual side of `Ȟ(A)` and, through `χ⁺(−A)`, on the dual side of `Ĥ(A)` too.

use serde::Serialize;

use crate::error::{check_dim, input, Result};
use crate::scalar::{lit, max_abs, to_f64, CVec, Real, C};
use crate::spectral::{
    chi_minus, spectral_projector, weighted_norm, EigenSystem, Interval,
    ZeroSide,
};

fn check_eps<T: Real>(epsilon: T) -> Result<()> {
    if epsilon > T::zero() {
        Ok(())
    } else {
        input("epsilon must be positive")
    }
}

/// Per-eigenvalue weights of the `Ȟ(A)` norm.
pub fn czech_weights<T: Real>(sys: &EigenSystem<T>, epsilon: T) -> Result<Vec<T>> {
    check_eps(epsilon)?;
    let half = lit::<T>(0.5);
    Ok((0..sys.dim())
        .map(|j| {
            let a = sys.eigenvalues()[j].abs() + epsilon;
            if sys.in_chi_plus(j) {
                a.powf(-half)
            } else {
                a.powf(half)
            }
        })
        .collect())
}

/// Whether eigen-index `j` of `A` lies in `χ⁺(−A)`.
fn in_chi_plus_of_negation<T: Real>(sys: &EigenSystem<T>, j: usize) -> bool {
    let l = sys.eigenvalues()[j];
    match sys.zero_side() {
        ZeroSide::Positive => l <= T::zero(),
        ZeroSide::Negative => l < T::zero(),
    }
}

/// Per-eigenvalue weights of the `Ĥ(A)` norm.
pub fn hat_weights<T: Real>(sys: &EigenSystem<T>, epsilon: T) -> Result<Vec<T>> {
    check_eps(epsilon)?;
    let half = lit::<T>(0.5);
    Ok((0..sys.dim())
        .map(|j| {
            let a = sys.eigenvalues()[j].abs() + epsilon;
            if in_chi_plus_of_negation(sys, j) {
                a.powf(-half)
            } else {
                a.powf(half)
            }
        })
        .collect())
}

/// `‖v‖_Ȟ(A)` for an ambient vector.
pub fn czech_norm<T: Real>(sys: &EigenSystem<T>, v: &CVec<T>, epsilon: T) -> Result<T> {
    Ok(weighted_norm(&czech_weights(sys, epsilon)?, &sys.to_coeffs(v)?))
}

/// `‖v‖_Ĥ(A)` for an ambient vector.
pub fn hat_norm<T: Real>(sys: &EigenSystem<T>, v: &CVec<T>, epsilon: T) -> Result<T> {
    Ok(weighted_norm(&hat_weights(sys, epsilon)?, &sys.to_coeffs(v)?))
}

/// `‖·‖_Ȟ` on eigencoefficients.
pub fn czech_norm_coeffs<T: Real>(sys: &EigenSystem<T>, c: &CVec<T>, epsilon: T) -> Result<T> {
    check_dim(sys.dim(), c.len())?;
    Ok(weighted_norm(&czech_weights(sys, epsilon)?, c))
}

/// `‖·‖_Ĥ` on eigencoefficients.
pub fn hat_norm_coeffs<T: Real>(sys: &EigenSystem<T>, c: &CVec<T>, epsilon: T) -> Result<T> {
    check_dim(sys.dim(), c.len())?;
    Ok(weighted_norm(&hat_weights(sys, epsilon)?, c))
}

/// Which side of the pairing a datum lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Side {
    Czech,
    Hat,
}

/// A boundary datum split along `χ⁻` and `χ⁺` of its base operator.
#[derive(Clone, Debug)]
pub struct BoundaryDatum<T: Real> {
    side: Side,
    base: Vec<T>,
    /// Eigencoefficients supported on the `H^{1/2}` side of the space.
    pub neg_part: CVec<T>,
    /// Eigencoefficients supported on the dual side of the space.
    pub pos_part: CVec<T>,
    pub epsilon: T,
}

/// Element of `Ȟ(A)`.
pub type CzechDatum<T> = BoundaryDatum<T>;
/// Element of `Ĥ(A)`.
pub type HatDatum<T> = BoundaryDatum<T>;

impl<T: Real> BoundaryDatum<T> {
    fn split(sys: &EigenSystem<T>, c: &CVec<T>, epsilon: T, side: Side) -> Result<Self> {
        check_dim(sys.dim(), c.len())?;
        check_eps(epsilon)?;
        let mut neg = c.clone();
        let mut pos = c.clone();
        for j in 0..sys.dim() {
            let dual_side = match side {
                Side::Czech => sys.in_chi_plus(j),
                Side::Hat => in_chi_plus_of_negation(sys, j),
            };
            if dual_side {
                neg[j] = C::new(T::zero(), T::zero());
            } else {
                pos[j] = C::new(T::zero(), T::zero());
            }
        }
        Ok(Self { side, base: sys.eigenvalues().to_vec(), neg_part: neg, pos_part: pos, epsilon })
    }

    /// `Ȟ(A)` datum from eigencoefficients.
    pub fn czech(sys: &EigenSystem<T>, coeffs: &CVec<T>, epsilon: T) -> Result<Self> {
        Self::split(sys, coeffs, epsilon, Side::Czech)
    }

    /// `Ĥ(A)` datum from eigencoefficients.
    pub fn hat(sys: &EigenSystem<T>, coeffs: &CVec<T>, epsilon: T) -> Result<Self> {
        Self::split(sys, coeffs, epsilon, Side::Hat)
    }

    pub fn side(&self) -> Side {
        self.side
    }

    /// All eigencoefficients.
    pub fn coefficients(&self) -> CVec<T> {
        &self.neg_part + &self.pos_part
    }

    /// Norm of the space the datum lives in.
    pub fn norm(&self) -> T {
        let mut acc = T::zero();
        for (j, &l) in self.base.iter().enumerate() {
            let a = l.abs() + self.epsilon;
            acc += a * self.neg_part[j].norm_sqr();
            acc += self.pos_part[j].norm_sqr() / a;
        }
        acc.sqrt()
    }
}

/// The pairing `Ȟ(A) × Ĥ(A) → ℂ` extending the `L²` inner product.
pub fn pairing<T: Real>(u: &CzechDatum<T>, v: &HatDatum<T>) -> Result<C<T>> {
    if u.side != Side::Czech || v.side != Side::Hat {
        return input("pairing expects a Ȟ datum and a Ĥ datum");
    }
    if u.base != v.base {
        return input("data built over different base operators");
    }
    Ok(v.coefficients().dotc(&u.coefficients()))
}

/// `sup_v |⟨u, v⟩| / ‖v‖_Ĥ` evaluated in closed form on eigencoefficients.
pub fn pairing_dual_norm<T: Real>(sys: &EigenSystem<T>, u: &CVec<T>, epsilon: T) -> Result<T> {
    let w = hat_weights(sys, epsilon)?;
    let inv: Vec<T> = w.iter().map(|&x| T::one() / x).collect();
    Ok(weighted_norm(&inv, &sys.to_coeffs(u)?))
}

/// Comparison of `Ȟ(A)` with `Ȟ(A − r)`.
#[derive(Clone, Debug, Serialize)]
pub struct ShiftReport {
    pub r: f64,
    pub epsilon: f64,
    /// `max |χ⁻(A − r) − χ_(−∞,r)(A)|`
    pub projector_defect: f64,
    /// `max |χ⁻(A − r) − χ⁻(A) − χ_[0,r)(A)|` for `r > 0`.
    pub decomposition_defect: Option<f64>,
    /// Range of `‖v‖_Ȟ(A) / ‖v‖_Ȟ(A−r)` over the samples.
    pub empirical_min: f64,
    pub empirical_max: f64,
    /// Exact extremes of the ratio, attained on single eigendirections.
    pub predicted_min: f64,
    pub predicted_max: f64,
    pub kernel_indices: Vec<usize>,
}

/// Verifies that shifting `A` by `r` changes `Ȟ` only up to equivalent norms.
pub fn shift_compare<T: Real>(
    sys: &EigenSystem<T>,
    r: T,
    epsilon: T,
    samples: &[CVec<T>],
) -> Result<ShiftReport> {
    let shifted = sys.shifted(r);
    let p1 = chi_minus(&shifted).matrix;
    let p2 = spectral_projector(sys, Interval::below(r)).matrix;
    let projector_defect = to_f64(max_abs(&(&p1 - p2)));
    let decomposition_defect = (r > T::zero()).then(|| {
        let band = spectral_projector(sys, Interval::new(
            crate::spectral::Endpoint::Closed(T::zero()),
            crate::spectral::Endpoint::Open(r),
        ))
        .matrix;
        to_f64(max_abs(&(&p1 - chi_minus(sys).matrix - band)))
    });
    let w0 = czech_weights(sys, epsilon)?;
    let w1 = czech_weights(&shifted, epsilon)?;
    let ratios: Vec<T> = w0.iter().zip(&w1).map(|(&a, &b)| a / b).collect();
    let predicted_min = ratios.iter().fold(T::max_value().unwrap_or(T::one()), |a, &b| a.min(b));
    let predicted_max = ratios.iter().fold(T::zero(), |a, &b| a.max(b));
    let mut emin = f64::INFINITY;
    let mut emax = 0.0f64;
    for v in samples {
        let c = sys.to_coeffs(v)?;
        let a = weighted_norm(&w0, &c);
        let b = weighted_norm(&w1, &c);
        if b > T::zero() {
            let q = to_f64(a / b);
            emin = emin.min(q);
            emax = emax.max(q);
        }
    }
    if samples.is_empty() {
        emin = f64::NAN;
        emax = f64::NAN;
    }
    Ok(ShiftReport {
        r: to_f64(r),
        epsilon: to_f64(epsilon),
        projector_defect,
        decomposition_defect,
        empirical_min: emin,
        empirical_max: emax,
        predicted_min: to_f64(predicted_min),
        predicted_max: to_f64(predicted_max),
        kernel_indices: sys.kernel_indices(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample;
    use crate::spectral::{dual_norm, frac_norm};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cv(x: &[f64]) -> CVec<f64> {
        CVec::from_iterator(x.len(), x.iter().map(|&a| C::new(a, 0.0)))
    }

    fn diag(x: &[f64]) -> EigenSystem<f64> {
        EigenSystem::diagonal(x).unwrap()
    }

    fn random_sys(seed: u64, n: usize) -> EigenSystem<f64> {
        EigenSystem::from_hermitian(&sample::hermitian(&mut ChaCha8Rng::seed_from_u64(seed), n)).unwrap()
    }

    #[test]
    fn norm_examples() {
        let one = cv(&[1.0]);
        assert_relative_eq!(czech_norm(&diag(&[-3.0]), &one, 1.0).unwrap(), 2.0, epsilon = 1e-14);
        assert_relative_eq!(czech_norm(&diag(&[3.0]), &one, 1.0).unwrap(), 0.5, epsilon = 1e-14);
        let two = cv(&[1.0, 1.0]);
        assert_relative_eq!(czech_norm(&diag(&[-3.0, 3.0]), &two, 1.0).unwrap(), 4.25f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(hat_norm(&diag(&[-3.0]), &one, 1.0).unwrap(), 0.5, epsilon = 1e-14);
        assert_relative_eq!(hat_norm(&diag(&[3.0]), &one, 1.0).unwrap(), 2.0, epsilon = 1e-14);
        assert_relative_eq!(hat_norm(&diag(&[0.0]), &one, 1.0).unwrap(), 1.0, epsilon = 1e-14);
        assert!(czech_norm(&diag(&[1.0]), &one, 0.0).is_err());
    }

    #[test]
    fn kernel_sits_on_dual_side_of_both() {
        let sys = diag(&[0.0]);
        assert_relative_eq!(czech_weights(&sys, 4.0).unwrap()[0], 0.5, epsilon = 1e-14);
        assert_relative_eq!(hat_weights(&sys, 4.0).unwrap()[0], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn pure_sign_agreement() {
        let sys = random_sys(31, 7);
        let mut r = ChaCha8Rng::seed_from_u64(32);
        let v = sample::complex_vector::<f64, _>(&mut r, 7);
        let neg = chi_minus(&sys).matrix * &v;
        let pos = &v - &neg;
        assert_relative_eq!(czech_norm(&sys, &neg, 1.0).unwrap(), frac_norm(&sys, 0.5, 1.0, &neg).unwrap(), max_relative = 1e-12);
        assert_relative_eq!(czech_norm(&sys, &pos, 1.0).unwrap(), dual_norm(&sys, 0.5, 1.0, &pos).unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn pairing_examples() {
        let sys = diag(&[-1.0, 2.0]);
        let e1 = BoundaryDatum::czech(&sys, &cv(&[1.0, 0.0]), 1.0).unwrap();
        let e2 = BoundaryDatum::hat(&sys, &cv(&[0.0, 1.0]), 1.0).unwrap();
        let e1h = BoundaryDatum::hat(&sys, &cv(&[1.0, 0.0]), 1.0).unwrap();
        assert_eq!(pairing(&e1, &e2).unwrap(), C::new(0.0, 0.0));
        assert_eq!(pairing(&e1, &e1h).unwrap(), C::new(1.0, 0.0));
        assert!(pairing(&e1h, &e1).is_err());
        let other = BoundaryDatum::hat(&diag(&[-1.0, 3.0]), &cv(&[1.0, 0.0]), 1.0).unwrap();
        assert!(pairing(&e1, &other).is_err());
    }

    #[test]
    fn datum_norm_matches_weights() {
        let sys = diag(&[-2.0, 0.0, 5.0]);
        let c = cv(&[1.0, 2.0, 3.0]);
        let u = BoundaryDatum::czech(&sys, &c, 1.0).unwrap();
        assert_relative_eq!(u.norm(), czech_norm_coeffs(&sys, &c, 1.0).unwrap(), max_relative = 1e-14);
        let v = BoundaryDatum::hat(&sys, &c, 1.0).unwrap();
        assert_relative_eq!(v.norm(), hat_norm_coeffs(&sys, &c, 1.0).unwrap(), max_relative = 1e-14);
        assert_eq!(u.coefficients(), c);
        assert!(u.neg_part.dotc(&u.pos_part).norm() == 0.0);
    }

    #[test]
    fn pairing_recovers_czech_norm() {
        let sys = random_sys(33, 6);
        let u = sample::complex_vector::<f64, _>(&mut ChaCha8Rng::seed_from_u64(34), 6);
        let c = sys.to_coeffs(&u).unwrap();
        // Maximiser v_j ∝ c_j / w_hat_j².
        let wh = hat_weights(&sys, 1.0).unwrap();
        let vc = CVec::from_iterator(6, c.iter().zip(&wh).map(|(z, &w)| z / (w * w)));
        let ud = BoundaryDatum::czech(&sys, &c, 1.0).unwrap();
        let vd = BoundaryDatum::hat(&sys, &vc, 1.0).unwrap();
        let sup = pairing(&ud, &vd).unwrap().norm() / vd.norm();
        assert_relative_eq!(sup, czech_norm(&sys, &u, 1.0).unwrap(), max_relative = 1e-8);
        assert_relative_eq!(pairing_dual_norm(&sys, &u, 1.0).unwrap(), sup, max_relative = 1e-8);
    }

    #[test]
    fn shift_zero_is_trivial() {
        let sys = random_sys(35, 5);
        let mut r = ChaCha8Rng::seed_from_u64(36);
        let samples: Vec<_> = (0..10).map(|_| sample::complex_vector::<f64, _>(&mut r, 5)).collect();
        let rep = shift_compare(&sys, 0.0, 1.0, &samples).unwrap();
        assert!(rep.projector_defect < 1e-12);
        assert_relative_eq!(rep.empirical_min, 1.0, epsilon = 1e-12);
        assert_relative_eq!(rep.empirical_max, 1.0, epsilon = 1e-12);
        assert!(rep.decomposition_defect.is_none());
    }

    #[test]
    fn shift_projector_example() {
        let sys = diag(&[-2.0, 1.0, 3.0]);
        let rep = shift_compare(&sys, 2.0, 1.0, &[]).unwrap();
        assert!(rep.projector_defect < 1e-15);
        assert!(rep.decomposition_defect.unwrap() < 1e-15);
        let p = chi_minus(&sys.shifted(2.0));
        assert_eq!(p.indices, vec![0, 1]);
    }

    #[test]
    fn shift_band_brute_force() {
        let lam: Vec<f64> = (-5..=5).map(f64::from).collect();
        let sys = diag(&lam);
        let mut r = ChaCha8Rng::seed_from_u64(37);
        let samples: Vec<_> = (0..100).map(|_| sample::complex_vector::<f64, _>(&mut r, 11)).collect();
        let rep = shift_compare(&sys, 2.0, 1.0, &samples).unwrap();
        // Only eigenvalues 0 and 1 change side; their weight ratio is
        // (|λ|+1)^{-1/2} / (|λ−2|+1)^{1/2}, i.e. 1/√3 at 0 and 1/2 at 1.
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for &l in &lam {
            let a: f64 = if l >= 0.0 { (l.abs() + 1.0).powf(-0.5) } else { (l.abs() + 1.0).sqrt() };
            let s = l - 2.0;
            let b: f64 = if s >= 0.0 { (s.abs() + 1.0).powf(-0.5) } else { (s.abs() + 1.0).sqrt() };
            lo = lo.min(a / b);
            hi = hi.max(a / b);
        }
        assert_relative_eq!(rep.predicted_min, lo, max_relative = 1e-12);
        assert_relative_eq!(rep.predicted_max, hi, max_relative = 1e-12);
        assert!(rep.empirical_min >= lo - 1e-12 && rep.empirical_max <= hi + 1e-12);
        assert!(rep.empirical_max.is_finite());
        assert_eq!(rep.kernel_indices, vec![5]);

        let far = shift_compare(&sys, 4.0, 1.0, &samples).unwrap();
        assert!(far.predicted_max / far.predicted_min > rep.predicted_max / rep.predicted_min);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn czech_is_a_norm(seed in 0u64..10_000, s in -3.0f64..3.0) {
            let sys = random_sys(seed, 5);
            let mut r = ChaCha8Rng::seed_from_u64(seed + 1);
            let u = sample::complex_vector::<f64, _>(&mut r, 5);
            let v = sample::complex_vector::<f64, _>(&mut r, 5);
            let n = |x: &CVec<f64>| czech_norm(&sys, x, 1.0).unwrap();
            prop_assert!(n(&(&u + &v)) <= n(&u) + n(&v) + 1e-12);
            prop_assert!((n(&(&u * C::new(s, 0.0))) - s.abs() * n(&u)).abs() <= 1e-12 * n(&u).max(1.0));
            prop_assert!(n(&u) > 0.0);
        }

        #[test]
        fn pairing_dual_within_root_two(seed in 0u64..10_000) {
            let sys = random_sys(seed, 6);
            let u = sample::complex_vector::<f64, _>(&mut ChaCha8Rng::seed_from_u64(seed + 2), 6);
            let d = pairing_dual_norm(&sys, &u, 1.0).unwrap();
            let h = czech_norm(&sys, &u, 1.0).unwrap();
            prop_assert!(d <= 2f64.sqrt() * h + 1e-12 && h <= 2f64.sqrt() * d + 1e-12);
        }

        #[test]
        fn shift_ratios_bracketed(seed in 0u64..10_000, shift in -4.0f64..4.0) {
            let sys = random_sys(seed, 6);
            let mut r = ChaCha8Rng::seed_from_u64(seed + 3);
            let samples: Vec<_> = (0..20).map(|_| sample::complex_vector::<f64, _>(&mut r, 6)).collect();
            let rep = shift_compare(&sys, shift, 1.0, &samples).unwrap();
            prop_assert!(rep.projector_defect < 1e-12);
            prop_assert!(rep.empirical_min >= rep.predicted_min * (1.0 - 1e-12));
            prop_assert!(rep.empirical_max <= rep.predicted_max * (1.0 + 1e-12));
            if let Some(d) = rep.decomposition_defect {
                prop_assert!(d < 1e-12);
            }
        }
    }
}
