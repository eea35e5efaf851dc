//! Run configuration (`schema: 1`).

use std::path::PathBuf;

use cylspec::dirac::{CircleDiracSpec, Expr};
use cylspec::spectral::{EigenSystem, ZeroSide};
use cylspec::{CMat, C};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const SCHEMA: u32 = 1;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "CYLSPEC_OUT_DIR";

/// Boundary operator `A`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum OperatorSpec {
    /// Hermitian matrix given by real and imaginary parts (row-major).
    Dense {
        re: Vec<Vec<f64>>,
        #[serde(default)]
        im: Option<Vec<Vec<f64>>>,
    },
    Diagonal(Vec<f64>),
    /// `−i d/dθ + shift + V(θ)` on modes `|k| ≤ n_modes`.
    CircleDirac {
        n_modes: usize,
        shift: f64,
        /// Expression in `theta`.
        #[serde(default)]
        potential: Option<String>,
    },
}

impl OperatorSpec {
    pub fn matrix(&self) -> CliResult<CMat<f64>> {
        match self {
            OperatorSpec::Dense { re, im } => {
                let n = re.len();
                if n == 0 || re.iter().any(|r| r.len() != n) {
                    return Err(CliError::Config("dense operator must be a nonempty square matrix".into()));
                }
                if let Some(im) = im {
                    if im.len() != n || im.iter().any(|r| r.len() != n) {
                        return Err(CliError::Config("imaginary part has the wrong shape".into()));
                    }
                }
                Ok(CMat::from_fn(n, n, |i, j| {
                    C::new(re[i][j], im.as_ref().map_or(0.0, |m| m[i][j]))
                }))
            }
            OperatorSpec::Diagonal(d) => {
                if d.is_empty() {
                    return Err(CliError::Config("diagonal operator is empty".into()));
                }
                Ok(cylspec::scalar::diag_c(d))
            }
            OperatorSpec::CircleDirac { n_modes, shift, potential } => {
                let mut spec = CircleDiracSpec::new(*n_modes, *shift);
                if let Some(p) = potential {
                    let e = Expr::parse(p)?;
                    spec = spec.with_potential(|th| e.eval(th));
                }
                Ok(spec.matrix()?)
            }
        }
    }

    pub fn system(&self, side: ZeroSide) -> CliResult<EigenSystem<f64>> {
        Ok(EigenSystem::from_hermitian(&self.matrix()?)?.with_zero_side(side))
    }
}

/// The verification suites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteName {
    Calculus,
    Czech,
    Bc,
    Cylinder,
    Callias,
    Fredholm,
}

impl SuiteName {
    pub const ALL: [SuiteName; 6] = [
        SuiteName::Calculus,
        SuiteName::Czech,
        SuiteName::Bc,
        SuiteName::Cylinder,
        SuiteName::Callias,
        SuiteName::Fredholm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SuiteName::Calculus => "calculus",
            SuiteName::Czech => "czech",
            SuiteName::Bc => "bc",
            SuiteName::Cylinder => "cylinder",
            SuiteName::Callias => "callias",
            SuiteName::Fredholm => "fredholm",
        }
    }

    pub fn parse(s: &str) -> CliResult<Self> {
        Self::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| CliError::Config(format!("unknown suite '{s}'")))
    }
}

/// Deliberate defects used to check that the suites can fail.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mutation {
    #[default]
    None,
    /// Route eigenvalue 0 to `χ⁻`.
    ChiZeroNegative,
    /// Cutoff `η_ρ` without its plateau at `t = 0`.
    EtaPlateau,
    /// Perturbed `σ₀` inside adjoint boundary conditions.
    AdjointSigma,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Grid {
    /// Mode cutoff of the circle Dirac family.
    pub n_modes: usize,
    /// Time samples.
    pub nt: usize,
    /// Cylinder length `T`.
    pub length: f64,
}

impl Default for Grid {
    fn default() -> Self {
        Self { n_modes: 4, nt: 64, length: 1.0 }
    }
}

/// Spectral flow instance `A + ct` on `[0, L]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Flow {
    pub n_modes: usize,
    pub shift: f64,
    pub c: f64,
    pub length: f64,
    pub nt: usize,
}

impl Default for Flow {
    fn default() -> Self {
        Self { n_modes: 6, shift: -0.5, c: 2.0, length: 1.0, nt: 32 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Identities that hold to rounding.
    pub exact: f64,
    /// Subspace comparisons (principal angles).
    pub angle: f64,
    /// Relative singular value threshold for kernels.
    pub kernel: f64,
    /// Relative error of quadratures.
    pub quadrature: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { exact: 1e-10, angle: 1e-8, kernel: 1e-8, quadrature: 1e-3 }
    }
}

impl Tolerances {
    fn validate(&self) -> CliResult<()> {
        for (name, v) in [
            ("exact", self.exact),
            ("angle", self.angle),
            ("kernel", self.kernel),
            ("quadrature", self.quadrature),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!("tolerance '{name}' must be positive")));
            }
        }
        Ok(())
    }
}

fn default_epsilon() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    pub operator: OperatorSpec,
    #[serde(default)]
    pub suites: Vec<SuiteName>,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default)]
    pub flow: Flow,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mutation: Mutation,
}

impl RunConfig {
    /// A configuration over the given operator with every default.
    pub fn new(operator: OperatorSpec) -> Self {
        Self {
            schema: SCHEMA,
            operator,
            suites: Vec::new(),
            grid: Grid::default(),
            flow: Flow::default(),
            tolerances: Tolerances::default(),
            epsilon: default_epsilon(),
            out_dir: None,
            seed: 0,
            mutation: Mutation::None,
        }
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.schema != SCHEMA {
            return Err(CliError::Config(format!("unsupported schema {} (expected {SCHEMA})", self.schema)));
        }
        self.tolerances.validate()?;
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(CliError::Config("epsilon must be positive".into()));
        }
        if self.grid.nt < 8 || self.flow.nt < 8 {
            return Err(CliError::Config("need at least 8 time samples".into()));
        }
        if self.grid.n_modes < 1 || self.flow.n_modes < 1 {
            return Err(CliError::Config("need at least one mode".into()));
        }
        if !(self.grid.length > 0.0) || !(self.flow.length > 0.0) {
            return Err(CliError::Config("cylinder lengths must be positive".into()));
        }
        let m = self.operator.matrix()?;
        if cylspec::scalar::max_abs(&(&m - m.adjoint())) > 1e-12 * cylspec::scalar::max_abs(&m).max(1.0) {
            return Err(CliError::Config("operator is not Hermitian".into()));
        }
        Ok(())
    }

    /// Zero-eigenvalue convention, which the `chi_zero_negative` mutation flips.
    pub fn zero_side(&self) -> ZeroSide {
        match self.mutation {
            Mutation::ChiZeroNegative => ZeroSide::Negative,
            _ => ZeroSide::Positive,
        }
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// Suites to run: the explicit list, else the configured list, else all.
    pub fn selected(&self, explicit: &[SuiteName]) -> Vec<SuiteName> {
        let mut v = if !explicit.is_empty() {
            explicit.to_vec()
        } else if !self.suites.is_empty() {
            self.suites.clone()
        } else {
            SuiteName::ALL.to_vec()
        };
        v.sort();
        v.dedup();
        v
    }
}
