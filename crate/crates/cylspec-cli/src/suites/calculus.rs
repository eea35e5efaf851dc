//! Functional calculus: projectors, polar decomposition, shifts, semigroup,
//! quadratic estimate, duality, Rellich embedding and involutions.

use cylspec::dirac::chiral_block;
use cylspec::sample;
use cylspec::scalar::{diag_c, max_abs};
use cylspec::spectral::{
    appends_smaller_tail, borel_apply, bounded_set_smoothing_check, chi_minus, chi_plus, dual_norm, frac_norm,
    involution_report, quadratic_estimate, rellich_singular_values, semigroup, sgn_apply, spectral_projector,
    EigenSystem, Interval, LogQuadrature,
};
use cylspec::{CMat, CVec};
use rand::Rng;

use super::Context;
use crate::config::SuiteName;
use crate::report::{Recorder, SuiteReport};
use crate::CliResult;

/// `Q diag(λ) Qᴴ` with a random unitary `Q` and `zeros` vanishing eigenvalues.
pub(crate) fn with_kernel<R: Rng>(rng: &mut R, n: usize, zeros: usize) -> CMat<f64> {
    let q = sample::subspace::<f64, _>(rng, n, n);
    let lam: Vec<f64> = (0..n)
        .map(|j| if j < zeros { 0.0 } else { rng.random_range(0.2..3.0) * if j % 2 == 0 { 1.0 } else { -1.0 } })
        .collect();
    &q * diag_c(&lam) * q.adjoint()
}

fn instances<R: Rng>(ctx: &Context, rng: &mut R) -> CliResult<Vec<EigenSystem<f64>>> {
    let mut out = vec![ctx.sys.clone()];
    for n in [2, 3, 5, 8, 13, 21] {
        out.push(ctx.system(&sample::hermitian(rng, n))?);
    }
    for (n, z) in [(4, 1), (7, 2), (12, 3)] {
        out.push(ctx.system(&with_kernel(rng, n, z))?);
    }
    Ok(out)
}

pub fn run(ctx: &Context) -> SuiteReport {
    let mut rec = ctx.recorder(SuiteName::Calculus, ctx.truncation());
    let tol = ctx.cfg.tolerances.clone();
    let mut rng = ctx.rng(SuiteName::Calculus);
    let systems = match instances(ctx, &mut rng) {
        Ok(s) => s,
        Err(e) => {
            rec.error("instances", e);
            return rec.finish();
        }
    };

    projector_checks(&mut rec, &systems, tol.exact);
    rec.guard("polar", |rec| {
        let mut worst = 0.0f64;
        for sys in &systems {
            let v = sample::complex_vector::<f64, _>(&mut rng, sys.dim());
            let abs = borel_apply(sys, |x| x.abs(), &v)?;
            let tv = sgn_apply(sys, &abs)?;
            let scale = (1.0 + sys.spectral_radius()) * v.norm();
            worst = worst.max((tv - sys.matrix() * &v).norm() / scale);
        }
        rec.at_most("polar", worst, tol.exact);
        Ok(())
    });
    rec.guard("semigroup", |rec| {
        let (mut law, mut contraction) = (0.0f64, 0.0f64);
        let eps = ctx.cfg.epsilon;
        for sys in &systems {
            let v = sample::complex_vector::<f64, _>(&mut rng, sys.dim());
            let a = semigroup(sys, 0.3, eps, &semigroup(sys, 0.45, eps, &v)?)?;
            let b = semigroup(sys, 0.75, eps, &v)?;
            law = law.max((a - &b).norm() / v.norm());
            contraction = contraction.max(b.norm() / ((-0.75 * eps).exp() * v.norm()) - 1.0);
        }
        rec.at_most("semigroup_law", law, tol.exact);
        rec.at_most("semigroup_contraction", contraction, tol.exact);
        Ok(())
    });
    rec.guard("quadratic_estimate", |rec| {
        let psi = |z: f64| z * (-z).exp();
        let mut worst = 0.0f64;
        for sys in &systems {
            let v = sample::complex_vector::<f64, _>(&mut rng, sys.dim());
            let q = quadratic_estimate(sys, psi, &v, &LogQuadrature::default())?;
            let kernel = spectral_projector(sys, Interval::closed(0.0, 0.0)).matrix * &v;
            let target = 0.25 * (v.norm_squared() - kernel.norm_squared());
            worst = worst.max((q.value - target).abs() / target);
        }
        rec.at_most("quadratic_estimate", worst, tol.quadrature);
        Ok(())
    });
    rec.guard("duality", |rec| {
        let eps = ctx.cfg.epsilon;
        let (mut recovery, mut holder) = (0.0f64, 0.0f64);
        for sys in &systems {
            let u = sample::complex_vector::<f64, _>(&mut rng, sys.dim());
            let w = sample::complex_vector::<f64, _>(&mut rng, sys.dim());
            for alpha in [0.5, 1.0] {
                // The pairing is maximised by v_j = (|λ_j| + ε)^{2α} c_j in eigencoefficients.
                let c = sys.to_coeffs(&u)?;
                let weights: Vec<f64> = sys.eigenvalues().iter().map(|l| (l.abs() + eps).powf(2.0 * alpha)).collect();
                let vc = CVec::from_iterator(c.len(), c.iter().zip(&weights).map(|(z, &k)| z * k));
                let v = sys.from_coeffs(&vc)?;
                let sup = v.dotc(&u).norm() / dual_norm(sys, alpha, eps, &v)?;
                let direct = frac_norm(sys, alpha, eps, &u)?;
                recovery = recovery.max((sup - direct).abs() / direct);
                let lhs = w.dotc(&u).norm();
                holder = holder.max(lhs / (direct * dual_norm(sys, alpha, eps, &w)?) - 1.0);
            }
        }
        rec.at_most("duality_recovery", recovery, tol.angle);
        rec.at_most("duality_inequality", holder, tol.exact);
        Ok(())
    });
    rellich_checks(&mut rec, ctx, tol.exact);
    rec.guard("involution", |rec| {
        let blk = chiral_block(&ctx.sys.matrix())?;
        let rep = involution_report(&blk.sys, &blk.xi)?;
        let scale = 1.0 + blk.sys.spectral_radius();
        rec.at_most("involution_square", rep.square_defect, tol.exact);
        rec.at_most("involution_anticommutes", rep.anticommutator / scale, tol.exact);
        rec.at_most("involution_intertwines", rep.intertwining_defect, tol.angle);
        rec.flag("involution_projectors_bounded", rep.norms.iter().all(|n| {
            [n.p_plus, n.p_minus, n.p_plus_adjoint, n.p_minus_adjoint].iter().all(|x| x.is_finite())
        }));
        rec.data("involution", &rep);
        Ok(())
    });
    rec.guard("smoothing", |rec| {
        let samples: Vec<_> = (0..20).map(|_| sample::complex_vector::<f64, _>(&mut rng, ctx.sys.dim())).collect();
        let rep = bounded_set_smoothing_check(&ctx.sys, Interval::closed(-1.0, 1.0), 0.5, ctx.cfg.epsilon, 3, &samples)?;
        rec.flag("smoothing_bounded_set", rep.passed);
        rec.data("smoothing", &rep);
        Ok(())
    });
    rec.finish()
}

fn projector_checks(rec: &mut Recorder, systems: &[EigenSystem<f64>], exact: f64) {
    let (mut partition, mut complement, mut idem, mut shift) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for sys in systems {
        let n = sys.dim();
        let id = CMat::<f64>::identity(n, n);
        let plus = chi_plus(sys);
        let minus = chi_minus(sys);
        // χ⁺ must be the spectral projector of [0, ∞), whose complement is (−∞, 0).
        let negative = spectral_projector(sys, Interval::negative()).matrix;
        partition = partition.max(max_abs(&(&plus.matrix + negative - &id)));
        complement = complement.max(max_abs(&(&plus.matrix + &minus.matrix - &id)));
        idem = idem.max(plus.projector_defect()).max(minus.projector_defect());
        let mut shifts = sys.eigenvalues().to_vec();
        shifts.extend([0.5, -1.25]);
        for r in shifts {
            let lhs = chi_plus(&sys.shifted(r)).matrix;
            let rhs = spectral_projector(sys, Interval::at_least(r)).matrix;
            shift = shift.max(max_abs(&(lhs - rhs)));
        }
    }
    rec.at_most("partition", partition, exact);
    rec.at_most("chi_complementary", complement, exact);
    rec.at_most("chi_idempotent", idem, exact);
    rec.at_most("shift_identity", shift, exact);
}

fn rellich_checks(rec: &mut Recorder, ctx: &Context, exact: f64) {
    rec.guard("rellich", |rec| {
        // λ_j = j with s = 1, t = 0: singular values (1 + j²)^{-1}.
        let n = 2 * ctx.cfg.grid.n_modes.max(4);
        let lam: Vec<f64> = (1..=n).map(|j| j as f64).collect();
        let sv = rellich_singular_values(&EigenSystem::diagonal(&lam)?, 1.0, 0.0)?;
        let formula = sv.iter().zip(&lam).map(|(s, l)| (s - 1.0 / (1.0 + l * l)).abs()).fold(0.0, f64::max);
        rec.at_most("rellich_formula", formula, exact);
        let rows: Vec<[f64; 2]> = lam.iter().zip(&sv).map(|(&j, &s)| [j, s]).collect();
        rec.data("rellich", rows);

        let half = rellich_singular_values(&EigenSystem::diagonal(&lam[..n / 2])?, 1.0, 0.0)?;
        rec.flag("rellich_tail", appends_smaller_tail(&half, &sv, exact));

        // Dense oracle on the configured operator: SVD of (1 + A²)^{-1/2} in the standard basis.
        let a = ctx.sys.matrix();
        let dim = a.nrows();
        let m = CMat::<f64>::identity(dim, dim) + &a * &a;
        let inv_sqrt = cylspec::spectral::borel_matrix(&ctx.sys, |x| (1.0 + x * x).powf(-0.5))?;
        let check = max_abs(&(&inv_sqrt * &m * &inv_sqrt - CMat::<f64>::identity(dim, dim)));
        let mut dense: Vec<f64> = inv_sqrt.svd(false, false).singular_values.iter().copied().collect();
        dense.sort_by(|x, y| y.total_cmp(x));
        let ours = rellich_singular_values(&ctx.sys, 0.5, 0.0)?;
        let diff = ours.iter().zip(&dense).map(|(x, y)| (x - y).abs()).fold(check, f64::max);
        rec.at_most("rellich_dense_svd", diff, exact);
        Ok(())
    });
}
