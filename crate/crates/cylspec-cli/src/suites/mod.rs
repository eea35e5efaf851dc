//! The six verification suites.
//!
//! Each suite draws its random samples from its own ChaCha stream, seeded by
//! the run seed and a per-suite salt, so reports do not depend on whether
//! suites run in parallel.

use cylspec::spectral::EigenSystem;
use cylspec::{CMat, C};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{RunConfig, SuiteName};
use crate::error::CliResult;
use crate::report::{Recorder, SuiteReport, Truncation};

pub mod bc;
pub mod calculus;
pub mod callias;
pub mod cylinder;
pub mod czech;
pub mod fredholm;

/// Shared inputs of a suite run.
pub struct Context<'a> {
    pub cfg: &'a RunConfig,
    /// The configured operator, with the run's zero convention.
    pub sys: EigenSystem<f64>,
}

impl<'a> Context<'a> {
    pub fn new(cfg: &'a RunConfig) -> CliResult<Self> {
        let sys = cfg.operator.system(cfg.zero_side())?;
        Ok(Self { cfg, sys })
    }

    pub fn rng(&self, suite: SuiteName) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.cfg.seed ^ salt(suite))
    }

    /// Diagonalises `m` under the run's zero convention.
    pub fn system(&self, m: &CMat<f64>) -> CliResult<EigenSystem<f64>> {
        Ok(EigenSystem::from_hermitian(m)?.with_zero_side(self.cfg.zero_side()))
    }

    pub fn recorder(&self, suite: SuiteName, truncation: Truncation) -> Recorder {
        Recorder::new(suite, self.cfg, truncation)
    }

    pub fn truncation(&self) -> Truncation {
        Truncation { operator_dim: self.sys.dim(), n_modes: self.cfg.grid.n_modes, nt: self.cfg.grid.nt }
    }
}

fn salt(suite: SuiteName) -> u64 {
    // Arbitrary distinct odd constants.
    match suite {
        SuiteName::Calculus => 0x9e37_79b9_7f4a_7c15,
        SuiteName::Czech => 0xbf58_476d_1ce4_e5b9,
        SuiteName::Bc => 0x94d0_49bb_1331_11eb,
        SuiteName::Cylinder => 0x2545_f491_4f6c_dd1d,
        SuiteName::Callias => 0x6a09_e667_f3bc_c909,
        SuiteName::Fredholm => 0xbb67_ae85_84ca_a73b,
    }
}

/// Runs one suite. Numerical failures become failed checks; only a broken
/// configuration is an error.
pub fn run_suite(suite: SuiteName, cfg: &RunConfig) -> CliResult<SuiteReport> {
    let ctx = Context::new(cfg)?;
    Ok(match suite {
        SuiteName::Calculus => calculus::run(&ctx),
        SuiteName::Czech => czech::run(&ctx),
        SuiteName::Bc => bc::run(&ctx),
        SuiteName::Cylinder => cylinder::run(&ctx),
        SuiteName::Callias => callias::run(&ctx),
        SuiteName::Fredholm => fredholm::run(&ctx),
    })
}

/// Largest principal angle, or `π/2` when the dimensions differ.
pub(crate) fn gap(a: &CMat<f64>, b: &CMat<f64>) -> f64 {
    cylspec::bc::subspace_gap(a, b)
}

pub(crate) fn cr(x: f64) -> C<f64> {
    C::new(x, 0.0)
}

/// Coordinate reversal; anticommutes with any spectrum symmetric about 0 in the standard basis.
pub(crate) fn reversal(n: usize) -> CMat<f64> {
    CMat::from_fn(n, n, |i, j| cr(if i + j + 1 == n { 1.0 } else { 0.0 }))
}

/// Orders of convergence `log₂(e_k / e_{k+1})` between successive refinements.
pub(crate) fn orders(errs: &[f64]) -> Vec<f64> {
    errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// Worst deviation of an order sequence from 2.
pub(crate) fn order_defect(errs: &[f64]) -> f64 {
    orders(errs).iter().map(|o| (o - 2.0).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Mutation, OperatorSpec};

    fn cfg() -> RunConfig {
        RunConfig::new(OperatorSpec::CircleDirac { n_modes: 4, shift: 0.0, potential: None })
    }

    #[test]
    fn streams_differ_per_suite_and_seed() {
        use rand::Rng;
        let c = cfg();
        let ctx = Context::new(&c).unwrap();
        let a: u64 = ctx.rng(SuiteName::Calculus).random();
        let b: u64 = ctx.rng(SuiteName::Czech).random();
        assert_ne!(a, b);
        let mut c2 = cfg();
        c2.seed = 5;
        let ctx2 = Context::new(&c2).unwrap();
        assert_ne!(a, ctx2.rng(SuiteName::Calculus).random::<u64>());
        assert_eq!(a, ctx.rng(SuiteName::Calculus).random::<u64>());
    }

    #[test]
    fn order_helpers() {
        assert!((orders(&[4.0, 1.0, 0.25])[1] - 2.0).abs() < 1e-15);
        assert!(order_defect(&[1.0, 0.5]) > 0.9);
    }

    #[test]
    fn every_suite_passes_on_defaults() {
        for s in SuiteName::ALL {
            let rep = run_suite(s, &cfg()).unwrap();
            let bad: Vec<_> = rep.checks.iter().filter(|c| !c.passed).collect();
            assert!(bad.is_empty(), "{}: {bad:#?}", s.as_str());
        }
    }

    #[test]
    fn mutations_are_caught() {
        for (m, s) in [
            (Mutation::ChiZeroNegative, SuiteName::Calculus),
            (Mutation::EtaPlateau, SuiteName::Cylinder),
            (Mutation::AdjointSigma, SuiteName::Bc),
        ] {
            let mut c = cfg();
            c.mutation = m;
            assert!(!run_suite(s, &c).unwrap().all_passed(), "{m:?}");
        }
    }
}
