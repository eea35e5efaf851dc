//! Callias and para-Callias potentials, the `K_R` profile, and the
//! discreteness proxy on a Hermite truncation.

use cylspec::dirac::{
    callias_check, discreteness_proxy, hermite_dirac, para_callias_check, pauli, strongly_para_profile, CalliasSpec,
    KR,
};
use cylspec::CMat;

use super::{cr, Context};
use crate::config::SuiteName;
use crate::report::{Recorder, SuiteReport, Truncation};

/// Kink amplitude.
const MASS: f64 = 2.0;
/// Truncations compared by the discreteness proxy.
pub const TRUNCATIONS: [usize; 2] = [200, 400];
const STABLE_TOL: f64 = 1e-6;

fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// Pointwise eigenvalues of `Φ² + i[D, Φ]` for `Φ = m tanh(x) σ₃` with `γ = I`:
/// `m² tanh² x ± m sech² x`. Returns the smaller one.
pub fn kink_oracle(m: f64, x: f64) -> f64 {
    let sech2 = 1.0 / x.cosh().powi(2);
    m * m * x.tanh().powi(2) - m * sech2
}

pub fn kink(m: f64, lambda: f64, k: f64) -> CalliasSpec<f64> {
    CalliasSpec::sampled(grid(-6.0, 6.0, 1201), move |t: f64| pauli(3) * cr(m * t.tanh()), Some((-k, k)), lambda)
        .with_gamma(CMat::identity(2, 2))
}

pub fn run(ctx: &Context) -> SuiteReport {
    let mut rec = ctx.recorder(
        SuiteName::Callias,
        Truncation { operator_dim: 2, n_modes: TRUNCATIONS[1], nt: 1201 },
    );
    constant_mass(&mut rec);
    kink_checks(&mut rec);
    para(&mut rec);
    rec.guard("discreteness", |rec| {
        let osc = discreteness_proxy(|m| hermite_dirac::<f64>(m, |x| x), &TRUNCATIONS, 10, STABLE_TOL)?;
        rec.flag("oscillator_stabilizes", osc.stabilized);
        let worst = osc.last_differences.iter().copied().fold(0.0, f64::max);
        rec.at_most("oscillator_lowest_change", worst, STABLE_TOL);
        let bounded = discreteness_proxy(|m| hermite_dirac::<f64>(m, |x| x.tanh()), &TRUNCATIONS, 10, STABLE_TOL)?;
        rec.flag("bounded_control_flagged", !bounded.stabilized);
        rec.data("discreteness", serde_json::json!({ "oscillator": osc, "bounded": bounded }));
        Ok(())
    });
    rec.finish()
}

fn constant_mass(rec: &mut Recorder) {
    rec.guard("constant_mass", |rec| {
        let m = 1.5;
        let x = grid(-4.0, 4.0, 41);
        let spec = CalliasSpec::sampled(x.clone(), move |_| CMat::identity(2, 2) * cr(m), None, m * m);
        let r = callias_check(&spec)?;
        rec.flag("constant_mass_at_threshold", r.verdict && r.zeroth_order);
        let strict = CalliasSpec { lambda: m * m + 0.01, ..spec };
        rec.flag("constant_mass_above_threshold_fails", !callias_check(&strict)?.verdict);
        let zero = CalliasSpec::sampled(x, |_| CMat::zeros(2, 2), None, 0.1);
        rec.flag("zero_potential_fails", !callias_check(&zero)?.verdict);
        Ok(())
    });
}

fn kink_checks(rec: &mut Recorder) {
    rec.guard("kink", |rec| {
        let k = 2.0;
        let edge = kink_oracle(MASS, k);
        let spec = kink(MASS, edge - 0.05, k);
        let r = callias_check(&spec)?;
        let mut worst = 0.0f64;
        let mut rows = Vec::with_capacity(spec.x.len());
        for (&x, &got) in spec.x.iter().zip(&r.margins) {
            let want = kink_oracle(MASS, x);
            worst = worst.max((got - want).abs() / want.abs().max(1.0));
            rows.push([x, got]);
        }
        rec.at_most("kink_margin_oracle", worst, 1e-4);
        rec.flag("kink_passes_below_oracle", r.verdict);
        let high = kink(MASS, edge + 0.05, k);
        rec.flag("kink_fails_above_oracle", !callias_check(&high)?.verdict);
        rec.data("callias_margins", rows);

        // Sign symmetry: the classical bound for Φ forces both ±Φ to pass.
        let mut consistent = true;
        let mut exercised = 0;
        for &m in &[0.5, 1.0, 2.0, 3.0] {
            for &l in &[0.01, 0.1, 0.5, 2.0] {
                let r = callias_check(&kink(m, l, 1.5))?;
                if r.classical_pass {
                    exercised += 1;
                    consistent &= r.plus_pass && r.minus_pass;
                }
            }
        }
        rec.flag("sign_symmetry", consistent);
        rec.at_least("sign_symmetry_instances", exercised as f64, 1.0);
        Ok(())
    });
}

fn para(rec: &mut Recorder) {
    rec.guard("para", |rec| {
        let i = cylspec::C::new(0.0, 1.0);
        let c = 3.0;
        let x = grid(0.0, 2.0, 21);
        let constant = CalliasSpec::sampled(x.clone(), move |_| pauli(3) * (i * c), None, c * c);
        rec.flag("para_constant_passes", para_callias_check(&constant)?.verdict);
        let zero = CalliasSpec::sampled(x, |_| CMat::zeros(2, 2), None, 0.1);
        rec.flag("para_zero_fails", !para_callias_check(&zero)?.verdict);

        // Ψ = ixσ₃: the margin x² − 1 exceeds R exactly for |x| ≥ √(R + 1).
        let linear = CalliasSpec::sampled(grid(-10.0, 10.0, 2001), move |t: f64| pauli(3) * (i * t), None, 1.0);
        let rs = [1.0, 4.0, 16.0, 64.0];
        let prof = strongly_para_profile(&linear, &rs)?;
        let mut worst = 0.0f64;
        for (r, k) in rs.iter().zip(&prof) {
            worst = worst.max(match k {
                KR::Bounded(a) => (a - (r + 1.0f64).sqrt()).abs(),
                _ => f64::INFINITY,
            });
        }
        // The grid spacing is 0.01.
        rec.at_most("kr_profile", worst, 0.02);
        let bounded = CalliasSpec::sampled(grid(-10.0, 10.0, 2001), move |t: f64| pauli(3) * (i * t.tanh()), None, 1.0);
        rec.flag("kr_bounded_potential_unbounded", strongly_para_profile(&bounded, &[2.0])? == vec![KR::Unbounded]);
        rec.data("kr_profile", serde_json::json!({ "r": rs, "k": prof }));
        Ok(())
    });
}
