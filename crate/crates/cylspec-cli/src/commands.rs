//! One-shot `index` and `callias` commands.

use std::path::Path;

use cylspec::dirac::{callias_check, para_callias_check, pauli, read_potential_csv, CalliasReport, CalliasSpec, Expr};
use cylspec::fredholm::FlowIndex;
use cylspec::{CMat, C};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// Index of the configured flow instance next to its oracle.
pub fn index(cfg: &RunConfig) -> CliResult<FlowIndex> {
    cfg.validate()?;
    let f = &cfg.flow;
    Ok(cylspec::fredholm::flow_index(f.n_modes, f.shift, f.c, f.length, f.nt, cfg.tolerances.kernel)?)
}

/// Where the potential comes from.
#[derive(Clone, Debug)]
pub enum Potential {
    /// CSV with `x,v` (meaning `v σ₃`) or `x,a,b,c` (meaning `aσ₁ + bσ₂ + cσ₃`).
    Csv(String),
    /// Expression in `x`, multiplied by `σ₃`.
    Expr(Expr),
}

impl Potential {
    /// A path to an existing file is read as CSV, anything else is parsed as
    /// an expression.
    pub fn parse(s: &str) -> CliResult<Self> {
        let p = Path::new(s);
        if p.is_file() {
            return Ok(Potential::Csv(std::fs::read_to_string(p)?));
        }
        if s.ends_with(".csv") {
            return Err(CliError::Config(format!("potential file `{s}` not found")));
        }
        Ok(Potential::Expr(Expr::parse(s)?))
    }
}

#[derive(Clone, Debug)]
pub struct CalliasArgs {
    pub potential: Potential,
    pub k: Option<(f64, f64)>,
    pub lambda: f64,
    /// Treat the potential as `Ψ = iΦ` and run the para-Callias check.
    pub para: bool,
    /// Pauli index of the symbol `γ`; 0 is the identity.
    pub gamma: usize,
    /// Sampling interval and count for expressions.
    pub x_range: (f64, f64),
    pub samples: usize,
}

fn combine(v: &[f64]) -> CliResult<CMat<f64>> {
    let c = |x: f64| C::new(x, 0.0);
    match v {
        [s] => Ok(pauli(3) * c(*s)),
        [a, b, s] => Ok(pauli(1) * c(*a) + pauli(2) * c(*b) + pauli(3) * c(*s)),
        _ => Err(CliError::Config(format!("potential rows need 1 or 3 values, got {}", v.len()))),
    }
}

pub fn callias(args: &CalliasArgs) -> CliResult<CalliasReport> {
    if !(args.lambda > 0.0) {
        return Err(CliError::Config("Lambda must be positive".into()));
    }
    if args.gamma > 3 {
        return Err(CliError::Config("gamma must be a Pauli index 0..=3".into()));
    }
    let (x, mut phi) = match &args.potential {
        Potential::Csv(text) => {
            let (x, rows) = read_potential_csv(text.as_bytes())?;
            let phi = rows.iter().map(|r| combine(r)).collect::<CliResult<Vec<_>>>()?;
            (x, phi)
        }
        Potential::Expr(e) => {
            let (a, b) = args.x_range;
            if args.samples < 3 || !(b > a) {
                return Err(CliError::Config("need an increasing x range and at least 3 samples".into()));
            }
            let n = args.samples;
            let x: Vec<f64> = (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect();
            let phi = x.iter().map(|&t| pauli(3) * C::new(e.eval(t), 0.0)).collect();
            (x, phi)
        }
    };
    if args.para {
        for p in &mut phi {
            *p *= C::new(0.0, 1.0);
        }
    }
    let spec = CalliasSpec { x, phi, gamma: pauli(args.gamma), k: args.k, lambda: args.lambda, differentiable: true };
    Ok(if args.para { para_callias_check(&spec)? } else { callias_check(&spec)? })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(p: &str) -> CalliasArgs {
        CalliasArgs {
            potential: Potential::parse(p).unwrap(),
            k: Some((-1.0, 1.0)),
            lambda: 0.5,
            para: false,
            gamma: 0,
            x_range: (-5.0, 5.0),
            samples: 201,
        }
    }

    #[test]
    fn constant_expression_passes() {
        assert!(callias(&args("2")).unwrap().verdict);
    }

    #[test]
    fn csv_with_three_columns() {
        let text = "x,a,b,c\n-1,0,0,2\n0,0,0,2\n1,0,0,2\n";
        let mut a = args("1");
        a.potential = Potential::Csv(text.into());
        a.k = None;
        assert!(callias(&a).unwrap().verdict);
        a.potential = Potential::Csv("x,a,b\n0,1,1\n1,1,1\n2,1,1\n".into());
        assert_eq!(callias(&a).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn missing_csv_is_a_config_error() {
        assert_eq!(Potential::parse("/nonexistent/v.csv").unwrap_err().exit_code(), 2);
    }
}
