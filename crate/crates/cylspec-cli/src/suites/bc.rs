//! Boundary conditions: adjoints, biduality, projection and chiral conditions,
//! matching, and regularity verdicts.

use cylspec::bc::{
    adjoint_bc, aps, aps_projector, chiral, chiral_adjoint, green_compatibility, matching, projection_adjoint,
    projection_bc, regularity_check, regularity_sweep, spectral_at_least, BcKind, BoundaryCondition, ChiralBranch,
};
use cylspec::dirac::{chiral_block, circle_dirac_diagonal};
use cylspec::sample;
use cylspec::spectral::EigenSystem;
use cylspec::CMat;

use super::{cr, gap, reversal, Context};
use crate::config::{Mutation, SuiteName};
use crate::report::SuiteReport;
use crate::CliResult;

/// Random instances per adjoint identity.
const TRIALS: usize = 20;

pub fn run(ctx: &Context) -> SuiteReport {
    let mut rec = ctx.recorder(SuiteName::Bc, ctx.truncation());
    let angle = ctx.cfg.tolerances.angle;
    let eps = ctx.cfg.epsilon;
    let n_modes = ctx.cfg.grid.n_modes;
    let mut rng = ctx.rng(SuiteName::Bc);

    // Adjoint conditions go through this helper so that the `adjoint_sigma`
    // mutation reaches every identity that depends on them.
    let adjoint = |sys: &EigenSystem<f64>, b: &BoundaryCondition<f64>, s: &CMat<f64>| -> CliResult<BoundaryCondition<f64>> {
        let s = match ctx.cfg.mutation {
            Mutation::AdjointSigma => s + CMat::identity(s.nrows(), s.ncols()) * cr(0.5),
            _ => s.clone(),
        };
        Ok(adjoint_bc(sys, b, &s)?)
    };

    rec.guard("aps_adjoint", |rec| {
        // With σ₀ anticommuting with A, the adjoint of APS is χ⁻ ⊕ ker A.
        let sys = circle_dirac_diagonal(n_modes, 0.0)?;
        let s = reversal(sys.dim());
        let b = aps(&sys);
        let bad = adjoint(&sys, &b, &s)?;
        let expected = spectral_at_least(&sys.negated(), 0.0);
        rec.at_most("aps_adjoint_subspace", gap(bad.basis(), expected.basis()), angle);
        rec.at_most("aps_adjoint_green", green_compatibility(&b, &bad, &s), angle);
        Ok(())
    });

    rec.guard("biduality", |rec| {
        let (mut green, mut back, mut dims) = (0.0f64, 0.0f64, true);
        for trial in 0..TRIALS {
            let n = 4 + trial % 5;
            let sys = EigenSystem::from_hermitian(&sample::hermitian(&mut rng, n))?;
            let k = trial % (n + 1);
            let b = BoundaryCondition::new(sample::subspace(&mut rng, n, k), BcKind::Custom, None)?;
            let s = sample::invertible(&mut rng, n);
            let bad = adjoint(&sys, &b, &s)?;
            dims &= bad.dim() + b.dim() == n;
            green = green.max(green_compatibility(&b, &bad, &s));
            let s_ad = bad.sigma0.clone().unwrap_or_else(|| s.clone());
            let bb = adjoint(&sys, &bad, &s_ad)?;
            back = back.max(gap(bb.basis(), b.basis()));
        }
        rec.flag("adjoint_dimension", dims);
        rec.at_most("adjoint_green_compatibility", green, angle);
        rec.at_most("biduality", back, angle);
        Ok(())
    });

    rec.guard("projection", |rec| {
        let (mut two_ways, mut locadj, mut aps_agree) = (0.0f64, 0.0f64, 0.0f64);
        for trial in 0..TRIALS {
            let n = 3 + trial % 6;
            let sys = EigenSystem::from_hermitian(&sample::hermitian(&mut rng, n))?;
            let q = sample::projector(&mut rng, n, trial % n + 1);
            // Every other trial uses an oblique idempotent G Q G⁻¹.
            let p = if trial % 2 == 0 {
                q
            } else {
                let g = sample::invertible(&mut rng, n);
                let gi = g.clone().try_inverse().ok_or_else(|| crate::CliError::Config("singular sample".into()))?;
                &g * q * gi
            };
            let s = sample::invertible(&mut rng, n);
            let pb = projection_bc(&sys, &p, eps)?;
            let a = adjoint(&sys, &pb.bc, &s)?;
            let b = projection_adjoint(&p, &s)?;
            two_ways = two_ways.max(gap(a.basis(), b.basis()));
            let pa = projection_bc(&sys, &aps_projector(&sys), eps)?;
            locadj = locadj.max(pa.locadj_gap);
            aps_agree = aps_agree.max(gap(pa.bc.basis(), aps(&sys).basis()));
        }
        rec.at_most("projection_adjoint_two_ways", two_ways, angle);
        rec.at_most("projection_aps_locadj", locadj, angle);
        rec.at_most("projection_of_chi_minus_is_aps", aps_agree, angle);
        Ok(())
    });

    rec.guard("chiral", |rec| {
        let blk = chiral_block(&ctx.sys.matrix())?;
        let (bp, bm) = chiral(&blk.sys, &blk.xi)?;
        rec.equal("chiral_balance", bp.dim() as i64, bm.dim() as i64);
        let mut worst = 0.0f64;
        for (b, plus) in [(&bp, true), (&bm, false)] {
            let direct = adjoint(&blk.sys, b, &blk.sigma0)?;
            for branch in [ChiralBranch::AnticommutesWithA, ChiralBranch::CommutesWithXi] {
                let c = chiral_adjoint(&blk.sys, &blk.xi, &blk.sigma0, branch, plus)?;
                worst = worst.max(gap(c.basis(), direct.basis()));
            }
            let rep = regularity_check(&blk.sys, b, &blk.sigma0, eps)?;
            rec.flag(if plus { "chiral_plus_regular" } else { "chiral_minus_regular" }, rep.a_regular && rep.a_semi_regular);
        }
        rec.at_most("chiral_adjoint_branches", worst, angle);
        Ok(())
    });

    rec.guard("matching", |rec| {
        let m = matching(&ctx.sys)?;
        let n = ctx.sys.dim();
        rec.at_most("matching_annihilator", m.annihilator_gap, angle);
        // Adjoint of the diagonal {(u, u)} is the antidiagonal {(v, −v)}.
        let swap = block_swap(n);
        let bad = adjoint(&m.sys, &m.bc, &swap)?;
        let anti = CMat::from_fn(2 * n, n, |i, j| {
            let x = std::f64::consts::FRAC_1_SQRT_2;
            if i == j {
                cr(x)
            } else if i == j + n {
                cr(-x)
            } else {
                cr(0.0)
            }
        });
        rec.at_most("matching_adjoint_antidiagonal", gap(bad.basis(), &anti), angle);
        rec.at_most("matching_adjoint_green", green_compatibility(&m.bc, &bad, &swap), angle);
        let rep = regularity_check(&m.sys, &m.bc, &swap, eps)?;
        rec.flag("matching_regular", rep.a_regular);
        Ok(())
    });

    rec.guard("regularity", |rec| {
        let sys = circle_dirac_diagonal(n_modes, 0.0)?;
        let n = sys.dim();
        let s = reversal(n);
        let r_aps = regularity_check(&sys, &aps(&sys), &s, eps)?;
        rec.flag("aps_regular", r_aps.a_regular && r_aps.a_semi_regular);
        let r_zero = regularity_check(&sys, &BoundaryCondition::zero(n), &s, eps)?;
        rec.flag("zero_not_regular", !r_zero.a_regular && r_zero.structural.sigma_anticommutes);
        let r_full = regularity_check(&sys, &BoundaryCondition::full(n), &s, eps)?;
        rec.flag("full_not_semi_regular", !r_full.a_semi_regular && !r_full.a_regular);
        rec.data("regularity", serde_json::json!({ "aps": r_aps, "zero": r_zero, "full": r_full }));

        let sweep_aps = regularity_sweep(
            |m| {
                let sys = circle_dirac_diagonal(m, 0.0)?;
                let s = reversal(sys.dim());
                Ok((sys.clone(), aps(&sys), s))
            },
            n_modes.max(4),
            eps,
        )?;
        let sweep_zero = regularity_sweep(
            |m| {
                let sys = circle_dirac_diagonal(m, 0.0)?;
                let s = reversal(sys.dim());
                let d = sys.dim();
                Ok((sys, BoundaryCondition::zero(d), s))
            },
            n_modes.max(4),
            eps,
        )?;
        rec.flag("sweep_aps_stable", sweep_aps.semi_stable && sweep_aps.adjoint_stable);
        rec.flag("sweep_zero_unstable", !sweep_zero.adjoint_stable);
        rec.data("sweep", serde_json::json!({ "aps": sweep_aps, "zero": sweep_zero }));
        Ok(())
    });
    rec.finish()
}

/// `[[0, I], [I, 0]]`, which anticommutes with `A₀ ⊕ (−A₀)`.
fn block_swap(n: usize) -> CMat<f64> {
    let mut s = CMat::zeros(2 * n, 2 * n);
    for j in 0..n {
        s[(j, n + j)] = cr(1.0);
        s[(n + j, j)] = cr(1.0);
    }
    s
}
