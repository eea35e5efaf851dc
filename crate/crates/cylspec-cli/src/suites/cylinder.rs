//! Model cylinder: Green's formula, energy identity, extension and trace
//! constants, remainder control and the near-boundary estimate.

use cylspec::bc::aps;
use cylspec::cylinder::{
    energy_identity, energy_identity_residual, extension, extension_constant, extension_constant_sampled,
    greens_residual, h1_embedding_svals, near_boundary_apriori, remainder_control, trace_constant,
    trace_constant_exact, CutoffProfile, CylinderGrid, CylinderOperator, CylinderSection,
};
use cylspec::dirac::circle_dirac_diagonal;
use cylspec::sample;
use cylspec::scalar::diag_c;
use cylspec::spectral::EigenSystem;
use cylspec::{CMat, C};

use super::{cr, order_defect, Context};
use crate::config::{Mutation, SuiteName};
use crate::report::{Recorder, SuiteReport, Truncation};
use crate::CliResult;

/// Refinement levels for the convergence checks.
const LEVELS: [usize; 3] = [64, 128, 256];
/// Allowed deviation of an observed order from 2.
const ORDER_TOL: f64 = 0.2;

/// Smooth bump on `[0, 1]` vanishing for `t ≥ 0.8`.
fn bump(t: f64) -> f64 {
    if t >= 0.8 {
        0.0
    } else {
        (1.0 - t / 0.8).powi(4) * (1.0 + t)
    }
}

fn model(sys: EigenSystem<f64>, length: f64, nt: usize, sigma: &CMat<f64>) -> CliResult<CylinderOperator<f64>> {
    Ok(CylinderOperator::model(sys, CylinderGrid::new(length, nt)?, sigma)?)
}

/// `η_ρ`, or under the `eta_plateau` mutation a copy that starts at 1/2.
fn cutoff(ctx: &Context, grid: &CylinderGrid<f64>, rho: f64) -> CliResult<CutoffProfile<f64>> {
    let eta = CutoffProfile::new(grid, rho)?;
    Ok(match ctx.cfg.mutation {
        Mutation::EtaPlateau => {
            let mut s = eta.samples;
            s[0] = 0.5;
            CutoffProfile::from_samples_unchecked(rho, s)
        }
        _ => eta,
    })
}

pub fn run(ctx: &Context) -> SuiteReport {
    let g = &ctx.cfg.grid;
    let mut rec = ctx.recorder(
        SuiteName::Cylinder,
        Truncation { operator_dim: ctx.sys.dim(), n_modes: g.n_modes, nt: g.nt },
    );
    convergence(&mut rec, ctx);
    extension_checks(&mut rec, ctx);
    constants(&mut rec, ctx);
    rec.guard("remainder", |rec| {
        // |0.5tλ + 0.25| ≤ C(t|λ| + 1) holds with best constant 0.5.
        let op = model(EigenSystem::diagonal(&[-2.0, 1.0, 3.0])?, 0.5, 32, &CMat::identity(3, 3))?
            .with_remainder(|t| diag_c(&[-t, 0.5 * t, 1.5 * t]) + CMat::identity(3, 3) * cr(0.25))?;
        let r = remainder_control(&op);
        rec.flag("remainder_bracket", r.c_lower <= 0.5 + 1e-12 && r.c_upper >= 0.5 - 1e-3);
        let big = model(EigenSystem::diagonal(&[1.0])?, 1.0, 16, &CMat::identity(1, 1))?
            .with_remainder(|_| CMat::identity(1, 1) * cr(10.0))?;
        let rb = remainder_control(&big);
        rec.flag("remainder_shrinks_width", rb.shrunk && rb.t_d < 0.9);
        rec.data("remainder", serde_json::json!({ "bracket": r, "large": rb }));
        Ok(())
    });
    rec.guard("near_boundary", |rec| {
        let nt = g.nt;
        let op = model(ctx.sys.clone(), g.length, nt, &CMat::identity(ctx.sys.dim(), ctx.sys.dim()))?;
        let b = aps(&op.sys);
        let neg = op.sys.chi_minus_indices();
        let t_d = remainder_control(&op).t_d;
        let samples: Vec<_> = (1..=4)
            .map(|k| {
                let neg = neg.clone();
                CylinderSection::from_fn(op.grid, op.dim(), move |t, j| {
                    if neg.contains(&j) {
                        C::new(bump(t / t_d), (k * j) as f64 * 0.1 * t * bump(t / t_d))
                    } else {
                        cr(0.0)
                    }
                })
            })
            .collect();
        let rep = near_boundary_apriori(&op, &b, &samples, 4000)?;
        let exact = rep.exact_constant.unwrap_or(f64::INFINITY);
        rec.flag("near_boundary_finite", exact.is_finite());
        rec.at_most("near_boundary_sampled_below_exact", rep.sampled_constant, exact * (1.0 + 1e-10));
        rec.data("near_boundary", &rep);
        Ok(())
    });
    rec.guard("h1_embedding", |rec| {
        let grid = CylinderGrid::new(g.length, g.nt)?;
        let sv = h1_embedding_svals(&grid, &ctx.sys, g.length)?;
        rec.flag("h1_embedding_descending", sv.windows(2).all(|w| w[0] >= w[1]) && sv[0] <= 1.0 + 1e-12);
        let rows: Vec<[f64; 2]> = sv.iter().enumerate().map(|(i, &s)| [i as f64, s]).collect();
        rec.data("h1_embedding", rows);
        Ok(())
    });
    rec.finish()
}

fn convergence(rec: &mut Recorder, ctx: &Context) {
    rec.guard("green", |rec| {
        // σ₀ anticommuting with A plus a non-Hermitian, time-dependent remainder.
        let sigma = CMat::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(-1.0), cr(0.0)]);
        let mut errs = Vec::new();
        for nt in LEVELS {
            let op = model(EigenSystem::diagonal(&[-1.0, 1.0])?, 1.0, nt, &sigma)?
                .with_remainder(|t| CMat::from_row_slice(2, 2, &[cr(t), C::new(0.0, 0.2), cr(0.3), cr(-t)]))?;
            let u = CylinderSection::from_fn(op.grid, 2, |t, j| C::new(bump(t), 0.3 * j as f64 * bump(t)));
            let v = CylinderSection::from_fn(op.grid, 2, |t, j| cr(bump(t) * (1.0 + t + j as f64)));
            errs.push(greens_residual(&op, &u, &v)?);
        }
        // Same identity for the configured operator.
        let n = ctx.sys.dim();
        let mut cfg_errs = Vec::new();
        for nt in LEVELS {
            let op = model(ctx.sys.clone(), 1.0, nt, &CMat::identity(n, n))?
                .with_remainder(|t| CMat::from_fn(n, n, |a, b| C::new(0.1 * t * (a + b) as f64, 0.05 * (a as f64 - b as f64))))?;
            let u = CylinderSection::from_fn(op.grid, n, |t, j| C::new(bump(t) * (1.0 + (j as f64 * t).sin()), bump(t)));
            let v = CylinderSection::from_fn(op.grid, n, |t, j| C::new(bump(t) * (j as f64 + 1.0).recip(), -t * bump(t)));
            cfg_errs.push(greens_residual(&op, &u, &v)?);
        }
        rec.at_most("green_order", order_defect(&errs), ORDER_TOL);
        rec.at_most("green_order_config", order_defect(&cfg_errs), ORDER_TOL);
        rec.data("green_residuals", serde_json::json!({ "nt": LEVELS, "fixed": errs, "config": cfg_errs }));
        Ok(())
    });
    rec.guard("energy", |rec| {
        let n = ctx.sys.dim();
        let mut errs = Vec::new();
        for nt in LEVELS {
            let op = model(ctx.sys.clone(), 1.0, nt, &CMat::identity(n, n))?;
            let u = CylinderSection::from_fn(op.grid, n, |t, j| {
                C::new(bump(t) * (j as f64 + 1.0), (3.0 * t).sin() * bump(t))
            });
            errs.push(energy_identity_residual(&op, &u)?);
        }
        rec.at_most("energy_order", order_defect(&errs), ORDER_TOL);

        // λ = 1, u = 1 − t: ‖Du‖² = ∫t² = 1/3 = ‖∂ₜu‖² + ‖Au‖² − |u(0)|² = 1 + 1/3 − 1.
        let op = model(EigenSystem::diagonal(&[1.0])?, 1.0, *LEVELS.last().unwrap_or(&256), &CMat::identity(1, 1))?;
        let u = CylinderSection::from_fn(op.grid, 1, |t, _| cr(1.0 - t));
        let e = energy_identity(&op, &u)?;
        let h2 = op.grid.h().powi(2);
        rec.at_most("energy_linear_lhs", (e.lhs - 1.0 / 3.0).abs(), h2);
        rec.at_most("energy_linear_terms", (e.dt_sq - 1.0).abs() + (e.a_sq - 1.0 / 3.0).abs() + (e.boundary - 1.0).abs(), h2);
        rec.data("energy", serde_json::json!({ "nt": LEVELS, "residuals": errs, "linear": e }));
        Ok(())
    });
}

fn extension_checks(rec: &mut Recorder, ctx: &Context) {
    rec.guard("extension", |rec| {
        let g = &ctx.cfg.grid;
        let n = ctx.sys.dim();
        let op = model(ctx.sys.clone(), g.length, g.nt, &CMat::identity(n, n))?;
        let eta = cutoff(ctx, &op.grid, g.length)?;
        rec.flag("cutoff_valid", eta.validate(&op.grid).is_ok());
        let mut rng = ctx.rng(SuiteName::Cylinder);
        let samples: Vec<_> = (0..50).map(|_| sample::complex_vector::<f64, _>(&mut rng, n)).collect();
        let mut trace = 0.0f64;
        let mut support = true;
        for u0 in &samples {
            let e = extension(&op, &eta, ctx.cfg.epsilon, u0)?;
            trace = trace.max((e.trace() - u0).norm() / u0.norm());
            support &= e.supported_in(0.75 * g.length);
        }
        rec.at_most("extension_trace", trace, ctx.cfg.tolerances.exact);
        rec.flag("extension_support", support);
        let exact = extension_constant(&op, &eta, ctx.cfg.epsilon)?;
        let sampled = extension_constant_sampled(&op, &eta, ctx.cfg.epsilon, &samples)?;
        rec.flag("extension_constant_finite", exact.is_finite() && exact > 0.0);
        rec.at_most("extension_sampled_below_exact", sampled, exact * (1.0 + 1e-10));
        Ok(())
    });
}

/// Extension and trace constants on the circle Dirac family at shift −1/2.
fn constants_at(ctx: &Context, n_modes: usize, nt: usize) -> CliResult<(f64, f64)> {
    let g = &ctx.cfg.grid;
    let sys = circle_dirac_diagonal(n_modes, -0.5)?;
    let n = sys.dim();
    let op = model(sys, g.length, nt, &CMat::identity(n, n))?;
    let eta = cutoff(ctx, &op.grid, g.length)?;
    let ext = extension_constant(&op, &eta, ctx.cfg.epsilon)?;
    let tr = trace_constant_exact(&op, ctx.cfg.epsilon, 0.9 * g.length)?;
    Ok((ext, tr))
}

fn constants(rec: &mut Recorder, ctx: &Context) {
    rec.guard("constants", |rec| {
        let g = &ctx.cfg.grid;
        let mut rows = Vec::new();
        for k in 0..3 {
            let (n, nt) = (g.n_modes << k, g.nt << k);
            let (e, t) = constants_at(ctx, n, nt)?;
            rows.push([n as f64, nt as f64, e, t]);
        }
        let change = |col: usize| {
            rows.windows(2).map(|w| (w[1][col] - w[0][col]).abs() / w[0][col]).fold(0.0, f64::max)
        };
        rec.flag("constants_finite", rows.iter().all(|r| r[2].is_finite() && r[3].is_finite() && r[2] > 0.0 && r[3] > 0.0));
        rec.at_most("extension_constant_refinement", change(2), 0.1);
        rec.at_most("trace_constant_refinement", change(3), 0.1);

        // Sampled trace ratios never exceed the optimal constant.
        let sys = circle_dirac_diagonal(g.n_modes, -0.5)?;
        let n = sys.dim();
        let op = model(sys, g.length, g.nt, &CMat::identity(n, n))?;
        let width = 0.9 * g.length;
        let samples: Vec<_> = (0..6)
            .map(|k| CylinderSection::from_fn(op.grid, n, move |t, j| cr(bump(t / width) * ((k + j) as f64).cos() * (1.0 + k as f64 * t))))
            .collect();
        let sampled = trace_constant(&op, ctx.cfg.epsilon, &samples)?;
        rec.at_most("trace_sampled_below_exact", sampled, rows[0][3] * (1.0 + 1e-10));
        rec.data("constants", rows);
        Ok(())
    });
}
