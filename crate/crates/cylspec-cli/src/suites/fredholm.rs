//! Two-ended problems on the linear spectral flow: index against the
//! counting oracle, tolerance robustness, semi-Fredholm diagnostics and
//! coercivity.

use cylspec::bc::aps;
use cylspec::cylinder::{CylinderGrid, CylinderOperator};
use cylspec::dirac::circle_dirac_diagonal;
use cylspec::fredholm::{
    coercivity_margin_exact, flow_index, flow_instance, semifredholm_report, FlowIndex, SemiFredholm, SupportMask,
    DEFAULT_TOL,
};
use cylspec::CMat;
use serde::Serialize;

use super::Context;
use crate::config::SuiteName;
use crate::report::{SuiteReport, Truncation};
use crate::CliResult;

pub const SWEEP_SHIFTS: [f64; 3] = [-0.5, -0.25, 0.3];
pub const SWEEP_RATES: [f64; 3] = [-2.0, 0.4, 2.0];
pub const SWEEP_MODES: [usize; 3] = [2, 4, 6];
/// Mode cutoffs of the semi-Fredholm refinement.
pub const REFINEMENT: [usize; 3] = [8, 16, 32];

/// One row of the index sweep.
#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub n_modes: usize,
    pub shift: f64,
    pub c: f64,
    pub index: i64,
    pub oracle_index: i64,
    pub kernel: usize,
    pub cokernel: usize,
    pub agrees: bool,
}

/// Index against oracle for every combination of the sweep grid.
pub fn index_sweep(length: f64, nt: usize) -> CliResult<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(27);
    for &n in &SWEEP_MODES {
        for &shift in &SWEEP_SHIFTS {
            for &c in &SWEEP_RATES {
                let f = flow_index(n, shift, c, length, nt, DEFAULT_TOL)?;
                rows.push(SweepRow {
                    n_modes: n,
                    shift,
                    c,
                    index: f.report.index,
                    oracle_index: f.oracle_index,
                    kernel: f.report.kernel.dim,
                    cokernel: f.report.cokernel.dim,
                    agrees: f.agrees,
                });
            }
        }
    }
    Ok(rows)
}

/// The configured flow instance.
pub fn flagship(ctx: &Context) -> CliResult<FlowIndex> {
    let f = &ctx.cfg.flow;
    Ok(flow_index(f.n_modes, f.shift, f.c, f.length, f.nt, ctx.cfg.tolerances.kernel)?)
}

pub fn run(ctx: &Context) -> SuiteReport {
    let f = ctx.cfg.flow.clone();
    let mut rec = ctx.recorder(
        SuiteName::Fredholm,
        Truncation { operator_dim: 2 * f.n_modes + 1, n_modes: f.n_modes, nt: f.nt },
    );
    rec.guard("flagship", |rec| {
        let fi = flagship(ctx)?;
        let r = &fi.report;
        rec.equal("flagship_index_matches_oracle", r.index, fi.oracle_index);
        rec.flag("flagship_well_separated", !r.kernel.ill_separated && !r.cokernel.ill_separated);
        rec.at_most("flagship_range_pairing", r.range_pairing, ctx.cfg.tolerances.angle);
        rec.equal("flagship_dimension_count", r.dim_count, r.index);
        let stable = |s: &[usize]| s.windows(2).all(|w| w[0] == w[1]);
        rec.flag("flagship_tol_stable", stable(&r.kernel.sweep) && stable(&r.cokernel.sweep));
        rec.data(
            "flagship",
            serde_json::json!({
                "index": r.index,
                "oracle_index": fi.oracle_index,
                "kernel_dim": r.kernel.dim,
                "cokernel_dim": r.cokernel.dim,
                "sval_gap": r.kernel.smallest_nonkernel,
                "tol_stability": r.kernel.sweep,
                "far_end_orientation": r.far_end_orientation,
            }),
        );
        let rev = flow_index(f.n_modes, f.shift, -f.c, f.length, f.nt, ctx.cfg.tolerances.kernel)?;
        rec.equal("reversed_flow_negates", rev.report.index, -r.index);
        Ok(())
    });
    rec.guard("sweep", |rec| {
        let rows = index_sweep(f.length, f.nt)?;
        let agree = rows.iter().filter(|r| r.agrees).count();
        rec.equal("sweep_agreement", agree as i64, rows.len() as i64);
        rec.data("sweep", rows);
        Ok(())
    });
    rec.guard("semi_fredholm", |rec| {
        let mut rows = Vec::new();
        let mut ok = true;
        for &n in &REFINEMENT {
            let inst = flow_instance(n, -0.5, 2.0, 1.0, 16)?;
            match semifredholm_report(&inst.op, &inst.b0, &inst.b1, ctx.cfg.epsilon)? {
                SemiFredholm::Report(r) => {
                    ok &= r.kernel_dim == 2 && r.b0_semi_regular && r.b1_semi_regular && r.embedding_decays;
                    rows.push(serde_json::json!({ "n_modes": n, "report": r }));
                }
                SemiFredholm::NotApplicable { reason } => {
                    ok = false;
                    rows.push(serde_json::json!({ "n_modes": n, "not_applicable": reason }));
                }
            }
        }
        let gaps: Vec<f64> = rows
            .iter()
            .filter_map(|r| r.pointer("/report/sval_gap").and_then(|v| v.as_f64()))
            .collect();
        let lo = gaps.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = gaps.iter().copied().fold(0.0, f64::max);
        rec.flag("semi_fredholm_hypotheses", ok && gaps.len() == REFINEMENT.len());
        // The closed-range proxy must not collapse as the truncation grows.
        rec.at_least("semi_fredholm_gap_ratio", lo / hi, 0.5);
        rec.data("semi_fredholm", rows);
        Ok(())
    });
    rec.guard("coercivity", |rec| {
        let sys = circle_dirac_diagonal(f.n_modes, -0.5)?;
        let n = sys.dim();
        let nt = 32;
        let op = CylinderOperator::model(sys, CylinderGrid::new(2.0, nt)?, &CMat::identity(n, n))?;
        let b = aps(&op.sys);
        let mut margins = Vec::new();
        for cut in [nt, 24, 16] {
            let mask = SupportMask::from_fn(nt, n, |i, _| i >= cut);
            margins.push(coercivity_margin_exact(&op, &b, &mask)?);
        }
        rec.at_least("coercivity_positive", margins[0], 1e-3);
        rec.flag("coercivity_monotone_in_mask", margins.windows(2).all(|w| w[1] >= w[0] - 1e-9));
        rec.data("coercivity", margins);
        Ok(())
    });
    rec.finish()
}
