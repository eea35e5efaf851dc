//! Hybrid boundary spaces `Ȟ(A)` and `Ĥ(A)`: sign-pure data, pairing,
//! dual norms and invariance under shifts of `A`.

use cylspec::czech::{czech_norm, hat_norm, hat_weights, pairing, pairing_dual_norm, shift_compare, BoundaryDatum};
use cylspec::sample;
use cylspec::spectral::{chi_minus, dual_norm, frac_norm, EigenSystem};
use cylspec::CVec;
use rand::Rng;

use super::Context;
use crate::config::SuiteName;
use crate::report::SuiteReport;

pub fn run(ctx: &Context) -> SuiteReport {
    let mut rec = ctx.recorder(SuiteName::Czech, ctx.truncation());
    let tol = ctx.cfg.tolerances.clone();
    let eps = ctx.cfg.epsilon;
    let mut rng = ctx.rng(SuiteName::Czech);
    let mut systems = vec![ctx.sys.clone()];
    rec.guard("instances", |_| {
        for n in [3, 6, 10, 16] {
            systems.push(ctx.system(&sample::hermitian(&mut rng, n))?);
        }
        systems.push(ctx.system(&super::calculus::with_kernel(&mut rng, 6, 2))?);
        Ok(())
    });

    rec.guard("pure_sign", |rec| {
        // On χ⁻ data Ȟ is H^{1/2}; on χ⁺ data it is H^{-1/2}.
        let mut worst = 0.0f64;
        for sys in &systems {
            let v = sample::complex_vector::<f64, _>(&mut rng, sys.dim());
            let neg = chi_minus(sys).matrix * &v;
            let pos = &v - &neg;
            for (x, y) in [
                (czech_norm(sys, &neg, eps)?, frac_norm(sys, 0.5, eps, &neg)?),
                (czech_norm(sys, &pos, eps)?, dual_norm(sys, 0.5, eps, &pos)?),
                (hat_norm(sys, &neg, eps)?, dual_norm(sys, 0.5, eps, &neg)?),
            ] {
                if y > 0.0 {
                    worst = worst.max((x - y).abs() / y);
                }
            }
        }
        rec.at_most("pure_sign_agreement", worst, tol.exact);
        Ok(())
    });

    rec.guard("pairing", |rec| {
        let (mut recovery, mut band, mut holder) = (0.0f64, 0.0f64, 0.0f64);
        for sys in &systems {
            let u = sample::complex_vector::<f64, _>(&mut rng, sys.dim());
            let c = sys.to_coeffs(&u)?;
            // The sup over Ĥ is attained at v_j = c_j / ŵ_j².
            let wh = hat_weights(sys, eps)?;
            let vc = CVec::from_iterator(c.len(), c.iter().zip(&wh).map(|(z, &w)| z / (w * w)));
            let ud = BoundaryDatum::czech(sys, &c, eps)?;
            let vd = BoundaryDatum::hat(sys, &vc, eps)?;
            let sup = pairing(&ud, &vd)?.norm() / vd.norm();
            let d = pairing_dual_norm(sys, &u, eps)?;
            let h = czech_norm(sys, &u, eps)?;
            recovery = recovery.max((sup - d).abs() / d);
            band = band.max(d / h).max(h / d);
            for _ in 0..8 {
                let wc = sample::complex_vector::<f64, _>(&mut rng, sys.dim());
                let wd = BoundaryDatum::hat(sys, &wc, eps)?;
                holder = holder.max(pairing(&ud, &wd)?.norm() / (d * wd.norm()) - 1.0);
            }
        }
        rec.at_most("pairing_sup_recovery", recovery, tol.angle);
        rec.at_most("pairing_dual_band", band, std::f64::consts::SQRT_2 * (1.0 + tol.exact));
        rec.at_most("pairing_inequality", holder, tol.exact);
        Ok(())
    });

    rec.guard("norm_axioms", |rec| {
        let mut worst = 0.0f64;
        for sys in &systems {
            for _ in 0..10 {
                let u = sample::complex_vector::<f64, _>(&mut rng, sys.dim());
                let v = sample::complex_vector::<f64, _>(&mut rng, sys.dim());
                let s: f64 = rng.random_range(-3.0..3.0);
                let n = |x: &CVec<f64>| czech_norm(sys, x, eps);
                worst = worst.max(n(&(&u + &v))? - n(&u)? - n(&v)?);
                let scaled = n(&u.map(|z| z * s))?;
                worst = worst.max((scaled - s.abs() * n(&u)?).abs() / n(&u)?);
            }
        }
        rec.at_most("czech_norm_axioms", worst, tol.exact);
        Ok(())
    });

    rec.guard("shift", |rec| {
        let mut rows = Vec::new();
        let (mut proj, mut decomp, mut outside) = (0.0f64, 0.0f64, 0.0f64);
        for sys in &systems {
            let samples: Vec<_> = (0..20).map(|_| sample::complex_vector::<f64, _>(&mut rng, sys.dim())).collect();
            for r in shifts(sys) {
                let rep = shift_compare(sys, r, eps, &samples)?;
                proj = proj.max(rep.projector_defect);
                decomp = decomp.max(rep.decomposition_defect.unwrap_or(0.0));
                outside = outside
                    .max(rep.predicted_min - rep.empirical_min)
                    .max(rep.empirical_max - rep.predicted_max);
                if !(rep.predicted_min > 0.0 && rep.predicted_max.is_finite()) {
                    outside = f64::INFINITY;
                }
                rows.push([r, rep.predicted_min, rep.predicted_max]);
            }
        }
        rec.at_most("shift_projector", proj, tol.exact);
        rec.at_most("shift_decomposition", decomp, tol.exact);
        rec.at_most("shift_norm_equivalence", outside, tol.exact);
        rec.data("shift_ratios", rows);
        Ok(())
    });
    rec.finish()
}

/// Every eigenvalue (the boundary cases) plus two generic shifts.
fn shifts(sys: &EigenSystem<f64>) -> Vec<f64> {
    let mut r = sys.eigenvalues().to_vec();
    r.dedup();
    r.extend([0.75, -2.5]);
    r
}
