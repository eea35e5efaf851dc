//! Truncated selfadjoint operators and their Borel functional calculus.
//!
//! Every operator is stored through its eigendecomposition `T = U diag(λ) Uᴴ`.
//! Functions of `T` act diagonally on eigencoefficients `Uᴴ v`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, input, Error, Result};
use crate::scalar::{cr, diag_c, from_usize, lit, max_abs, op_norm, CMat, CVec, Real, C};

/// Where eigenvalues equal to zero are routed by `χ±`.
///
/// The default puts zero in `χ⁺ = χ_[0,∞)`. `Negative` exists so test suites
/// can check that they notice a flipped convention.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZeroSide {
    #[default]
    Positive,
    Negative,
}

/// Sorted eigenvalues and an orthonormal eigenbasis of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct EigenSystem<T: Real> {
    values: Vec<T>,
    vectors: CMat<T>,
    zero_side: ZeroSide,
}

impl<T: Real> EigenSystem<T> {
    /// Diagonalises a Hermitian matrix.
    pub fn from_hermitian(m: &CMat<T>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return input(format!("matrix is {}x{}, not square", m.nrows(), m.ncols()));
        }
        if m.nrows() == 0 {
            return input("empty matrix");
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Domain("non-finite matrix entry".into()));
        }
        let scale = max_abs(m).max(T::one());
        let herm_defect = max_abs(&(m - m.adjoint()));
        if herm_defect > T::exact_tol() * scale {
            return input(format!("matrix not Hermitian (defect {herm_defect})"));
        }
        let sym = (m + m.adjoint()) * cr(lit::<T>(0.5));
        let eig = SymmetricEigen::new(sym);
        let n = m.nrows();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[a]
                .partial_cmp(&eig.eigenvalues[b])
                .expect("finite eigenvalues")
        });
        let snap = T::zero_snap();
        let values = order
            .iter()
            .map(|&j| {
                let l = eig.eigenvalues[j];
                if l.abs() < snap {
                    T::zero()
                } else {
                    l
                }
            })
            .collect();
        let vectors = CMat::<T>::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        Ok(Self { values, vectors, zero_side: ZeroSide::Positive })
    }

    /// Diagonalises a real symmetric matrix.
    pub fn from_real_symmetric(m: &DMatrix<T>) -> Result<Self> {
        Self::from_hermitian(&m.map(cr))
    }

    /// Operator that is diagonal in the standard basis.
    pub fn diagonal(values: &[T]) -> Result<Self> {
        if values.is_empty() {
            return input("empty spectrum");
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("non-finite eigenvalue".into()));
        }
        let n = values.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite"));
        let snap = T::zero_snap();
        let sorted = order
            .iter()
            .map(|&j| if values[j].abs() < snap { T::zero() } else { values[j] })
            .collect();
        let mut vectors = CMat::<T>::zeros(n, n);
        for (col, &j) in order.iter().enumerate() {
            vectors[(j, col)] = cr(T::one());
        }
        Ok(Self { values: sorted, vectors, zero_side: ZeroSide::Positive })
    }

    /// Builds a system from eigenpairs, sorting them and validating orthonormality.
    pub fn from_parts(values: Vec<T>, vectors: CMat<T>) -> Result<Self> {
        let n = values.len();
        check_dim(n, vectors.nrows())?;
        check_dim(n, vectors.ncols())?;
        if n == 0 {
            return input("empty spectrum");
        }
        let gram = vectors.adjoint() * &vectors;
        let defect = max_abs(&(gram - CMat::<T>::identity(n, n)));
        if defect > T::exact_tol() {
            return input(format!("eigenvectors not orthonormal (defect {defect})"));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite"));
        let snap = T::zero_snap();
        let sorted = order
            .iter()
            .map(|&j| if values[j].abs() < snap { T::zero() } else { values[j] })
            .collect();
        let vecs = CMat::<T>::from_fn(n, n, |i, j| vectors[(i, order[j])]);
        Ok(Self { values: sorted, vectors: vecs, zero_side: ZeroSide::Positive })
    }

    /// Same operator with a different routing of the zero eigenvalue.
    pub fn with_zero_side(mut self, side: ZeroSide) -> Self {
        self.zero_side = side;
        self
    }

    pub fn zero_side(&self) -> ZeroSide {
        self.zero_side
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> &[T] {
        &self.values
    }

    /// Orthonormal eigenvectors as columns, matching [`Self::eigenvalues`].
    pub fn eigenvectors(&self) -> &CMat<T> {
        &self.vectors
    }

    /// Reassembles `U diag(λ) Uᴴ`.
    pub fn matrix(&self) -> CMat<T> {
        &self.vectors * diag_c(&self.values) * self.vectors.adjoint()
    }

    /// Eigencoefficients `Uᴴ v` of an ambient vector.
    pub fn to_coeffs(&self, v: &CVec<T>) -> Result<CVec<T>> {
        check_dim(self.dim(), v.len())?;
        Ok(self.vectors.adjoint() * v)
    }

    /// Ambient vector `U c` with eigencoefficients `c`.
    pub fn from_coeffs(&self, c: &CVec<T>) -> Result<CVec<T>> {
        check_dim(self.dim(), c.len())?;
        Ok(&self.vectors * c)
    }

    /// The operator `−T`.
    pub fn negated(&self) -> Self {
        let n = self.dim();
        let values = self.values.iter().rev().map(|&l| -l).collect();
        let vectors = CMat::<T>::from_fn(n, n, |i, j| self.vectors[(i, n - 1 - j)]);
        Self { values, vectors, zero_side: self.zero_side }
    }

    /// The operator `T − rI`, sharing the eigenbasis.
    pub fn shifted(&self, r: T) -> Self {
        let snap = T::zero_snap();
        let values = self
            .values
            .iter()
            .map(|&l| {
                let x = l - r;
                if x.abs() < snap {
                    T::zero()
                } else {
                    x
                }
            })
            .collect();
        Self { values, vectors: self.vectors.clone(), zero_side: self.zero_side }
    }

    /// Whether eigenvalue `j` belongs to the range of `χ⁺`.
    pub fn in_chi_plus(&self, j: usize) -> bool {
        let l = self.values[j];
        match self.zero_side {
            ZeroSide::Positive => l >= T::zero(),
            ZeroSide::Negative => l > T::zero(),
        }
    }

    /// Indices in the range of `χ⁺`.
    pub fn chi_plus_indices(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&j| self.in_chi_plus(j)).collect()
    }

    /// Indices in the range of `χ⁻`.
    pub fn chi_minus_indices(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&j| !self.in_chi_plus(j)).collect()
    }

    /// Indices of zero eigenvalues.
    pub fn kernel_indices(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&j| self.values[j] == T::zero()).collect()
    }

    /// `max |λ|`.
    pub fn spectral_radius(&self) -> T {
        self.values.iter().fold(T::zero(), |a, &l| a.max(l.abs()))
    }

    /// Orthonormal basis (columns) of the span of the selected eigenvectors.
    pub fn eigvec_columns(&self, idx: &[usize]) -> CMat<T> {
        CMat::<T>::from_fn(self.dim(), idx.len(), |i, j| self.vectors[(i, idx[j])])
    }

    /// Conjugates a matrix given in eigencoordinates back to ambient coordinates.
    pub fn ambient_matrix(&self, coeff: &CMat<T>) -> CMat<T> {
        &self.vectors * coeff * self.vectors.adjoint()
    }

    /// Expresses an ambient matrix in eigencoordinates.
    pub fn coeff_matrix(&self, ambient: &CMat<T>) -> CMat<T> {
        self.vectors.adjoint() * ambient * &self.vectors
    }
}

/// One end of a real interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Endpoint<T> {
    Unbounded,
    Closed(T),
    Open(T),
}

/// A real interval with open, closed or infinite ends.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval<T> {
    pub lo: Endpoint<T>,
    pub hi: Endpoint<T>,
}

impl<T: Real> Interval<T> {
    pub fn new(lo: Endpoint<T>, hi: Endpoint<T>) -> Self {
        Self { lo, hi }
    }

    pub fn closed(a: T, b: T) -> Self {
        Self::new(Endpoint::Closed(a), Endpoint::Closed(b))
    }

    pub fn open(a: T, b: T) -> Self {
        Self::new(Endpoint::Open(a), Endpoint::Open(b))
    }

    /// `[r, ∞)`
    pub fn at_least(r: T) -> Self {
        Self::new(Endpoint::Closed(r), Endpoint::Unbounded)
    }

    /// `(−∞, r)`
    pub fn below(r: T) -> Self {
        Self::new(Endpoint::Unbounded, Endpoint::Open(r))
    }

    /// `[0, ∞)`
    pub fn nonnegative() -> Self {
        Self::at_least(T::zero())
    }

    /// `(−∞, 0)`
    pub fn negative() -> Self {
        Self::below(T::zero())
    }

    pub fn everything() -> Self {
        Self::new(Endpoint::Unbounded, Endpoint::Unbounded)
    }

    pub fn contains(&self, x: T) -> bool {
        let lo = match self.lo {
            Endpoint::Unbounded => true,
            Endpoint::Closed(a) => x >= a,
            Endpoint::Open(a) => x > a,
        };
        let hi = match self.hi {
            Endpoint::Unbounded => true,
            Endpoint::Closed(b) => x <= b,
            Endpoint::Open(b) => x < b,
        };
        lo && hi
    }

    /// The reflected interval `−I`.
    pub fn reflected(&self) -> Self {
        let flip = |e: Endpoint<T>| match e {
            Endpoint::Unbounded => Endpoint::Unbounded,
            Endpoint::Closed(a) => Endpoint::Closed(-a),
            Endpoint::Open(a) => Endpoint::Open(-a),
        };
        Self::new(flip(self.hi), flip(self.lo))
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self.lo, Endpoint::Unbounded) && !matches!(self.hi, Endpoint::Unbounded)
    }

    fn bounds(&self) -> Option<(T, T)> {
        let val = |e: Endpoint<T>| match e {
            Endpoint::Unbounded => None,
            Endpoint::Closed(a) | Endpoint::Open(a) => Some(a),
        };
        Some((val(self.lo)?, val(self.hi)?))
    }
}

/// `χ_I(T)` together with the eigen-indices it keeps.
#[derive(Clone, Debug)]
pub struct SpectralProjector<T: Real> {
    pub interval: Interval<T>,
    pub matrix: CMat<T>,
    pub indices: Vec<usize>,
}

impl<T: Real> SpectralProjector<T> {
    pub fn rank(&self) -> usize {
        self.indices.len()
    }

    /// `max(‖P² − P‖, ‖P − Pᴴ‖)` entrywise.
    pub fn projector_defect(&self) -> T {
        let p = &self.matrix;
        max_abs(&(p * p - p)).max(max_abs(&(p - p.adjoint())))
    }
}

fn projector_from_indices<T: Real>(sys: &EigenSystem<T>, idx: &[usize]) -> CMat<T> {
    let v = sys.eigvec_columns(idx);
    &v * v.adjoint()
}

/// `χ_I(T)` for an explicit interval.
pub fn spectral_projector<T: Real>(sys: &EigenSystem<T>, interval: Interval<T>) -> SpectralProjector<T> {
    let indices: Vec<usize> =
        (0..sys.dim()).filter(|&j| interval.contains(sys.eigenvalues()[j])).collect();
    SpectralProjector { interval, matrix: projector_from_indices(sys, &indices), indices }
}

/// `χ⁺(T)`, honouring the system's zero convention.
pub fn chi_plus<T: Real>(sys: &EigenSystem<T>) -> SpectralProjector<T> {
    let indices = sys.chi_plus_indices();
    SpectralProjector {
        interval: Interval::nonnegative(),
        matrix: projector_from_indices(sys, &indices),
        indices,
    }
}

/// `χ⁻(T)`, honouring the system's zero convention.
pub fn chi_minus<T: Real>(sys: &EigenSystem<T>) -> SpectralProjector<T> {
    let indices = sys.chi_minus_indices();
    SpectralProjector {
        interval: Interval::negative(),
        matrix: projector_from_indices(sys, &indices),
        indices,
    }
}

fn check_finite<T: Real>(vals: &[C<T>], sys: &EigenSystem<T>) -> Result<()> {
    for (j, z) in vals.iter().enumerate() {
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::Domain(format!(
                "function undefined at eigenvalue {}",
                sys.eigenvalues()[j]
            )));
        }
    }
    Ok(())
}

/// `f(T)` as an ambient matrix, for complex-valued `f`.
pub fn borel_matrix_complex<T: Real>(sys: &EigenSystem<T>, f: impl Fn(T) -> C<T>) -> Result<CMat<T>> {
    let fv: Vec<C<T>> = sys.eigenvalues().iter().map(|&l| f(l)).collect();
    check_finite(&fv, sys)?;
    let u = sys.eigenvectors();
    let mut scaled = u.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= fv[j];
    }
    Ok(scaled * u.adjoint())
}

/// `f(T)` as an ambient matrix.
pub fn borel_matrix<T: Real>(sys: &EigenSystem<T>, f: impl Fn(T) -> T) -> Result<CMat<T>> {
    borel_matrix_complex(sys, |x| cr(f(x)))
}

/// `f(T) v` for complex-valued `f`.
pub fn borel_apply_complex<T: Real>(
    sys: &EigenSystem<T>,
    f: impl Fn(T) -> C<T>,
    v: &CVec<T>,
) -> Result<CVec<T>> {
    let mut c = sys.to_coeffs(v)?;
    let fv: Vec<C<T>> = sys.eigenvalues().iter().map(|&l| f(l)).collect();
    check_finite(&fv, sys)?;
    for (cj, fj) in c.iter_mut().zip(fv) {
        *cj *= fj;
    }
    sys.from_coeffs(&c)
}

/// `f(T) v` for a real Borel function `f`.
pub fn borel_apply<T: Real>(sys: &EigenSystem<T>, f: impl Fn(T) -> T, v: &CVec<T>) -> Result<CVec<T>> {
    borel_apply_complex(sys, |x| cr(f(x)), v)
}

/// `sgn(T) v = (χ⁺ − χ⁻)(T) v`.
pub fn sgn_apply<T: Real>(sys: &EigenSystem<T>, v: &CVec<T>) -> Result<CVec<T>> {
    let mut c = sys.to_coeffs(v)?;
    for j in 0..sys.dim() {
        if !sys.in_chi_plus(j) {
            c[j] = -c[j];
        }
    }
    sys.from_coeffs(&c)
}

/// Weights `(|λ_j| + ε)^p` for any real power `p`.
pub fn shifted_abs_powers<T: Real>(sys: &EigenSystem<T>, p: T, epsilon: T) -> Result<Vec<T>> {
    if !(epsilon > T::zero()) {
        return input("epsilon must be positive");
    }
    Ok(sys.eigenvalues().iter().map(|&l| (l.abs() + epsilon).powf(p)).collect())
}

/// `‖diag(w) c‖` for eigencoefficients `c`.
pub fn weighted_norm<T: Real>(w: &[T], c: &CVec<T>) -> T {
    w.iter()
        .zip(c.iter())
        .fold(T::zero(), |acc, (&wj, cj)| acc + wj * wj * cj.norm_sqr())
        .sqrt()
}

/// `‖(|T| + ε)^α v‖`.
pub fn frac_norm<T: Real>(sys: &EigenSystem<T>, alpha: T, epsilon: T, v: &CVec<T>) -> Result<T> {
    if alpha < T::zero() {
        return input("negative alpha: use dual_norm");
    }
    let w = shifted_abs_powers(sys, alpha, epsilon)?;
    Ok(weighted_norm(&w, &sys.to_coeffs(v)?))
}

/// `‖(|T| + ε)^{−α} v‖`, the norm of the dual of `dom(|T|^α)`.
pub fn dual_norm<T: Real>(sys: &EigenSystem<T>, alpha: T, epsilon: T, v: &CVec<T>) -> Result<T> {
    if alpha < T::zero() {
        return input("negative alpha");
    }
    let w = shifted_abs_powers(sys, -alpha, epsilon)?;
    Ok(weighted_norm(&w, &sys.to_coeffs(v)?))
}

/// Scale a [`GradedVector`] lives in.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Scale<T> {
    /// `dom(|T|^α)`
    Sobolev(T),
    /// dual of `dom(|T|^α)`
    Dual(T),
    /// `Ȟ(T)`
    Czech,
    /// `Ĥ(T) = Ȟ(−T)`
    Hat,
}

/// Eigencoefficients tagged with the scale used to measure them.
#[derive(Clone, Debug)]
pub struct GradedVector<T: Real> {
    pub coefficients: CVec<T>,
    pub scale: Scale<T>,
    pub epsilon: T,
}

impl<T: Real> GradedVector<T> {
    pub fn new(sys: &EigenSystem<T>, coefficients: CVec<T>, scale: Scale<T>, epsilon: T) -> Result<Self> {
        check_dim(sys.dim(), coefficients.len())?;
        if !(epsilon > T::zero()) {
            return input("epsilon must be positive");
        }
        if let Scale::Sobolev(a) | Scale::Dual(a) = scale {
            if a < T::zero() {
                return input("negative order");
            }
        }
        Ok(Self { coefficients, scale, epsilon })
    }

    /// Norm in the tagged scale.
    pub fn norm(&self, sys: &EigenSystem<T>) -> Result<T> {
        check_dim(sys.dim(), self.coefficients.len())?;
        let w = match self.scale {
            Scale::Sobolev(a) => shifted_abs_powers(sys, a, self.epsilon)?,
            Scale::Dual(a) => shifted_abs_powers(sys, -a, self.epsilon)?,
            Scale::Czech => crate::czech::czech_weights(sys, self.epsilon)?,
            Scale::Hat => crate::czech::hat_weights(sys, self.epsilon)?,
        };
        Ok(weighted_norm(&w, &self.coefficients))
    }
}

/// `e^{−t(|T| + ε)} v`.
pub fn semigroup<T: Real>(sys: &EigenSystem<T>, t: T, epsilon: T, v: &CVec<T>) -> Result<CVec<T>> {
    if t < T::zero() {
        return input("negative time");
    }
    if epsilon < T::zero() {
        return input("negative epsilon");
    }
    borel_apply(sys, |l| (-(t * (l.abs() + epsilon))).exp(), v)
}

/// Log-spaced trapezoid rule for `∫₀^∞ g(t) dt/t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogQuadrature<T> {
    pub nodes: usize,
    /// Lower end; `None` means `1e-6 / λ_max`.
    pub t_min: Option<T>,
    /// Upper end; `None` means `1e3 / λ_min` over nonzero `|λ|`.
    pub t_max: Option<T>,
}

impl<T> Default for LogQuadrature<T> {
    fn default() -> Self {
        Self { nodes: 400, t_min: None, t_max: None }
    }
}

/// Result of [`quadratic_estimate`].
#[derive(Clone, Debug)]
pub struct QuadraticEstimate<T> {
    pub value: T,
    /// Norm of the discarded kernel component.
    pub kernel_norm: T,
    pub warning: Option<String>,
}

/// `∫₀^∞ ‖ψ(t|T|) v‖² dt/t` with the kernel component of `v` removed.
pub fn quadratic_estimate<T: Real>(
    sys: &EigenSystem<T>,
    psi: impl Fn(T) -> T,
    v: &CVec<T>,
    quad: &LogQuadrature<T>,
) -> Result<QuadraticEstimate<T>> {
    if quad.nodes < 2 {
        return input("quadrature needs at least two nodes");
    }
    let c = sys.to_coeffs(v)?;
    let abs: Vec<T> = sys.eigenvalues().iter().map(|l| l.abs()).collect();
    let mut kernel_sq = T::zero();
    for (j, &a) in abs.iter().enumerate() {
        if a == T::zero() {
            kernel_sq += c[j].norm_sqr();
        }
    }
    let kernel_norm = kernel_sq.sqrt();
    let warning = (kernel_norm > T::zero())
        .then(|| format!("kernel component of norm {kernel_norm} excluded"));
    let nonzero: Vec<T> = abs.iter().copied().filter(|&a| a > T::zero()).collect();
    if nonzero.is_empty() {
        return Ok(QuadraticEstimate { value: T::zero(), kernel_norm, warning });
    }
    let lmax = nonzero.iter().fold(T::zero(), |a, &b| a.max(b));
    let lmin = nonzero.iter().fold(lmax, |a, &b| a.min(b));
    let t0 = quad.t_min.unwrap_or(lit::<T>(1e-6) / lmax);
    let t1 = quad.t_max.unwrap_or(lit::<T>(1e3) / lmin);
    if !(t0 > T::zero() && t1 > t0) {
        return input("quadrature range must satisfy 0 < t_min < t_max");
    }
    let (s0, s1) = (t0.ln(), t1.ln());
    let ds = (s1 - s0) / from_usize::<T>(quad.nodes - 1);
    let half = lit::<T>(0.5);
    let mut value = T::zero();
    for (j, &a) in abs.iter().enumerate() {
        if a == T::zero() {
            continue;
        }
        let cj = c[j].norm_sqr();
        let mut acc = T::zero();
        for k in 0..quad.nodes {
            let t = (s0 + ds * from_usize::<T>(k)).exp();
            let p = psi(t * a);
            let w = if k == 0 || k + 1 == quad.nodes { half } else { T::one() };
            acc += w * p * p;
        }
        value += acc * ds * cj;
    }
    Ok(QuadraticEstimate { value, kernel_norm, warning })
}

/// Singular values `(1 + λ_j²)^{t−s}` of `dom((1+T²)^s) ↪ dom((1+T²)^t)`, descending.
pub fn rellich_singular_values<T: Real>(sys: &EigenSystem<T>, s: T, t: T) -> Result<Vec<T>> {
    if !(s > t) || t < T::zero() {
        return input("need s > t >= 0");
    }
    let mut v: Vec<T> =
        sys.eigenvalues().iter().map(|&l| (T::one() + l * l).powf(t - s)).collect();
    v.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    Ok(v)
}

/// Rellich singular values with a compactness proxy flag.
#[derive(Clone, Debug)]
pub struct RellichReport<T> {
    pub values: Vec<T>,
    pub smallest: T,
    /// The tail has dropped below the threshold.
    pub compact_proxy: bool,
}

pub fn rellich_report<T: Real>(sys: &EigenSystem<T>, s: T, t: T, threshold: T) -> Result<RellichReport<T>> {
    let values = rellich_singular_values(sys, s, t)?;
    let smallest = *values.last().expect("nonempty");
    Ok(RellichReport { compact_proxy: smallest < threshold, smallest, values })
}

/// `large` (descending) starts with `small` and continues only with values no
/// bigger than the last entry of `small`.
pub fn appends_smaller_tail<T: Real>(small: &[T], large: &[T], tol: T) -> bool {
    if large.len() < small.len() {
        return false;
    }
    let head_ok = small.iter().zip(large).all(|(a, b)| (*a - *b).abs() <= tol);
    let floor = small.last().copied().unwrap_or(T::max_value().unwrap_or(T::one()));
    head_ok && large[small.len()..].iter().all(|&x| x <= floor + tol)
}

/// Operator norms of the involution projectors on one Sobolev level.
#[derive(Clone, Debug, Serialize)]
pub struct ProjectorNorms {
    pub alpha: f64,
    pub p_plus: f64,
    pub p_minus: f64,
    pub p_plus_adjoint: f64,
    pub p_minus_adjoint: f64,
}

/// Interaction of an involution `Ξ` with `T`.
#[derive(Clone, Debug, Serialize)]
pub struct InvolutionReport {
    /// `max |Ξ² − I|`
    pub square_defect: f64,
    /// `‖ΞT + TΞ‖` (spectral norm)
    pub anticommutator: f64,
    /// `max |P±² − P±|`
    pub idempotence_defect: f64,
    /// `max |χ_I(T) Ξ − Ξ χ_{−I}(T)|` over `I = (0,∞), [0,∞), (−∞,0)`
    pub intertwining_defect: f64,
    pub norms: Vec<ProjectorNorms>,
}

impl InvolutionReport {
    pub fn is_involution(&self, tol: f64) -> bool {
        self.square_defect <= tol
    }
    pub fn anticommutes(&self, tol: f64) -> bool {
        self.anticommutator <= tol
    }
}

/// Norm of `P` as a map on `dom(|T|^α)` (with `ε = 1`).
pub fn sobolev_op_norm<T: Real>(sys: &EigenSystem<T>, p: &CMat<T>, alpha: T, epsilon: T) -> Result<T> {
    check_dim(sys.dim(), p.nrows())?;
    let w = shifted_abs_powers(sys, alpha, epsilon)?;
    let c = sys.coeff_matrix(p);
    let n = sys.dim();
    let m = CMat::<T>::from_fn(n, n, |i, j| c[(i, j)] * cr(w[i] / w[j]));
    Ok(op_norm(&m))
}

/// Checks `Ξ² = I`, anticommutation with `T`, and boundedness of `P± = (I ± Ξ)/2`.
pub fn involution_report<T: Real>(sys: &EigenSystem<T>, xi: &CMat<T>) -> Result<InvolutionReport> {
    if xi.nrows() != xi.ncols() {
        return input("Xi must be square");
    }
    check_dim(sys.dim(), xi.nrows())?;
    let n = sys.dim();
    let id = CMat::<T>::identity(n, n);
    let t = sys.matrix();
    let half = cr(lit::<T>(0.5));
    let pp = (&id + xi) * half;
    let pm = (&id - xi) * half;
    let idem = max_abs(&(&pp * &pp - &pp)).max(max_abs(&(&pm * &pm - &pm)));
    let mut inter = T::zero();
    let zero = T::zero();
    for iv in [
        Interval::new(Endpoint::Open(zero), Endpoint::Unbounded),
        Interval::nonnegative(),
        Interval::negative(),
    ] {
        let a = spectral_projector(sys, iv).matrix;
        let b = spectral_projector(sys, iv.reflected()).matrix;
        inter = inter.max(max_abs(&(a * xi - xi * b)));
    }
    let eps = T::one();
    let mut norms = Vec::new();
    for alpha in [0.0, 0.5, 1.0] {
        let a = lit::<T>(alpha);
        norms.push(ProjectorNorms {
            alpha,
            p_plus: crate::scalar::to_f64(sobolev_op_norm(sys, &pp, a, eps)?),
            p_minus: crate::scalar::to_f64(sobolev_op_norm(sys, &pm, a, eps)?),
            p_plus_adjoint: crate::scalar::to_f64(sobolev_op_norm(sys, &pp.adjoint(), a, eps)?),
            p_minus_adjoint: crate::scalar::to_f64(sobolev_op_norm(sys, &pm.adjoint(), a, eps)?),
        });
    }
    Ok(InvolutionReport {
        square_defect: crate::scalar::to_f64(max_abs(&(xi * xi - &id))),
        anticommutator: crate::scalar::to_f64(op_norm(&(xi * &t + &t * xi))),
        idempotence_defect: crate::scalar::to_f64(idem),
        intertwining_defect: crate::scalar::to_f64(inter),
        norms,
    })
}

/// One power `k` of [`bounded_set_smoothing_check`].
#[derive(Clone, Debug, Serialize)]
pub struct SmoothingRow {
    pub k: usize,
    /// `sup |x|^{2k} · sup (|x|+ε)^α` over the spectrum inside `S`.
    pub constant: f64,
    /// The same suprema taken over all of `S`.
    pub interval_constant: f64,
    /// Largest observed `‖T^{2k} χ_S v‖ / (constant · dual_norm(v))`.
    pub max_ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SmoothingReport {
    pub rows: Vec<SmoothingRow>,
    pub passed: bool,
}

/// Checks `‖T^{2k} χ_S(T) v‖ ≤ C_{k,S} ‖v‖_{dual(H^α)}` for bounded `S` on sample vectors.
pub fn bounded_set_smoothing_check<T: Real>(
    sys: &EigenSystem<T>,
    s: Interval<T>,
    alpha: T,
    epsilon: T,
    k_max: usize,
    samples: &[CVec<T>],
) -> Result<SmoothingReport> {
    let (lo, hi) = match s.bounds() {
        Some(b) if s.is_bounded() => b,
        _ => return input("S must be bounded"),
    };
    if k_max == 0 {
        return input("k_max must be at least 1");
    }
    let proj = spectral_projector(sys, s);
    let inside: Vec<T> = proj.indices.iter().map(|&j| sys.eigenvalues()[j]).collect();
    let s_abs = lo.abs().max(hi.abs());
    let tol = lit::<T>(1e-8);
    let mut rows = Vec::new();
    let mut passed = true;
    for k in 1..=k_max {
        let kk = from_usize::<T>(2 * k);
        let sup_pow = inside.iter().fold(T::zero(), |a, &l| a.max(l.abs().powf(kk)));
        let sup_w = inside.iter().fold(T::zero(), |a, &l| a.max((l.abs() + epsilon).powf(alpha)));
        let constant = sup_pow * sup_w;
        let interval_constant = s_abs.powf(kk) * (s_abs + epsilon).powf(alpha);
        let mut max_ratio = T::zero();
        for v in samples {
            let c = sys.to_coeffs(v)?;
            let mut num = T::zero();
            for &j in &proj.indices {
                let l = sys.eigenvalues()[j];
                num += l.abs().powf(kk * lit::<T>(2.0)) * c[j].norm_sqr();
            }
            let num = num.sqrt();
            let den = constant * dual_norm(sys, alpha, epsilon, v)?;
            let ratio = if num == T::zero() { T::zero() } else { num / den };
            max_ratio = max_ratio.max(ratio);
        }
        if max_ratio > T::one() + tol {
            passed = false;
        }
        rows.push(SmoothingRow {
            k,
            constant: crate::scalar::to_f64(constant),
            interval_constant: crate::scalar::to_f64(interval_constant),
            max_ratio: crate::scalar::to_f64(max_ratio),
        });
    }
    Ok(SmoothingReport { rows, passed })
}

/// Identity helper used by callers that need `χ_S = 0` detection.
pub fn is_zero_projector<T: Real>(p: &SpectralProjector<T>) -> bool {
    p.indices.is_empty() && max_abs(&p.matrix) == T::zero()
}
