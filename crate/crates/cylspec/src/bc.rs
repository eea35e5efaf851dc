//! Boundary conditions as subspaces of `Ȟ(A)`, their adjoints and regularity.
//!
//! Bases are stored in ambient coordinates with Euclidean-orthonormal columns.
//! In a truncation every subspace is closed and every vector is in
//! `dom(|A|^{1/2})`, so regularity is measured through norm margins and
//! whether those margins survive a change of resolution.

use serde::{Deserialize, Serialize};

use crate::czech::{czech_weights, hat_weights};
use crate::error::{check_dim, input, Error, Result};
use crate::scalar::{cr, lit, max_abs, op_norm, to_f64, CMat, Real};
use crate::spectral::{chi_minus, shifted_abs_powers, EigenSystem};

/// Where a boundary condition came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BcKind {
    Aps,
    Projection,
    ChiralPlus,
    ChiralMinus,
    Matching,
    Custom,
}

/// A subspace `B` of boundary data with an orthonormal basis.
#[derive(Clone, Debug)]
pub struct BoundaryCondition<T: Real> {
    basis: CMat<T>,
    pub kind: BcKind,
    /// Boundary symbol the condition is paired with, if any.
    pub sigma0: Option<CMat<T>>,
}

impl<T: Real> BoundaryCondition<T> {
    /// Wraps a basis that is already orthonormal.
    pub fn new(basis: CMat<T>, kind: BcKind, sigma0: Option<CMat<T>>) -> Result<Self> {
        let k = basis.ncols();
        let defect = max_abs(&(basis.adjoint() * &basis - CMat::<T>::identity(k, k)));
        if defect > T::exact_tol() {
            return input(format!("basis not orthonormal (defect {defect})"));
        }
        if let Some(s) = &sigma0 {
            check_dim(basis.nrows(), s.nrows())?;
            check_dim(basis.nrows(), s.ncols())?;
        }
        Ok(Self { basis, kind, sigma0 })
    }

    /// Orthonormalises the span of the given columns.
    pub fn from_span(vectors: &CMat<T>, kind: BcKind) -> Self {
        Self { basis: orth(vectors), kind, sigma0: None }
    }

    /// The zero subspace of `ℂⁿ`.
    pub fn zero(n: usize) -> Self {
        Self { basis: CMat::<T>::zeros(n, 0), kind: BcKind::Custom, sigma0: None }
    }

    /// All of `ℂⁿ`.
    pub fn full(n: usize) -> Self {
        Self { basis: CMat::<T>::identity(n, n), kind: BcKind::Custom, sigma0: None }
    }

    pub fn with_sigma0(mut self, sigma0: CMat<T>) -> Self {
        self.sigma0 = Some(sigma0);
        self
    }

    pub fn basis(&self) -> &CMat<T> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Orthogonal projector onto `B`.
    pub fn projector(&self) -> CMat<T> {
        &self.basis * self.basis.adjoint()
    }

    /// Euclidean orthogonal complement, which is also the pairing annihilator.
    pub fn complement(&self) -> CMat<T> {
        complement(&self.basis)
    }
}

/// Orthonormal basis of the column span, dropping numerically dependent directions.
pub fn orth<T: Real>(m: &CMat<T>) -> CMat<T> {
    orth_above(m, T::zero())
}

/// [`orth`] that also drops directions with singular value at most `floor`.
///
/// The rank comes from the Gram matrix `MᴴM`; the basis is a QR of `M V_r`,
/// whose span is exact even when `V_r` is only accurate up to rotations
/// inside the kept space. (Complex SVD vectors are unreliable for
/// rank-deficient input.)
pub fn orth_above<T: Real>(m: &CMat<T>, floor: T) -> CMat<T> {
    let n = m.nrows();
    if m.ncols() == 0 || n == 0 {
        return CMat::<T>::zeros(n, 0);
    }
    let g = m.adjoint() * m;
    let eig = nalgebra::SymmetricEigen::new((&g + g.adjoint()) * cr(lit::<T>(0.5)));
    let lmax = eig.eigenvalues.iter().fold(T::zero(), |a, &s| a.max(s));
    if lmax <= floor * floor {
        return CMat::<T>::zeros(n, 0);
    }
    // Gram eigenvalues carry absolute noise of order eps·λ_max.
    let cut = (lmax * T::default_epsilon() * lit::<T>(1000.0)).max(floor * floor);
    let keep: Vec<usize> = (0..eig.eigenvalues.len()).filter(|&j| eig.eigenvalues[j] > cut).collect();
    let v = CMat::<T>::from_fn(m.ncols(), keep.len(), |i, j| eig.eigenvectors[(i, keep[j])]);
    (m * v).qr().q()
}

/// Orthonormal basis of the Euclidean complement of the span of `basis`.
pub fn complement<T: Real>(basis: &CMat<T>) -> CMat<T> {
    let n = basis.nrows();
    let q = orth(basis);
    let p = CMat::<T>::identity(n, n) - &q * q.adjoint();
    let eig = nalgebra::SymmetricEigen::new((&p + p.adjoint()) * cr(lit::<T>(0.5)));
    let keep: Vec<usize> =
        (0..n).filter(|&j| eig.eigenvalues[j] > lit::<T>(0.5)).collect();
    CMat::<T>::from_fn(n, keep.len(), |i, j| eig.eigenvectors[(i, keep[j])])
}

/// Principal angles between equal-dimensional subspaces, ascending.
///
/// Computed from sines (singular values of `(I − QₐQₐᴴ)Q_b`) so that tiny angles
/// keep full relative accuracy.
pub fn principal_angles<T: Real>(a: &CMat<T>, b: &CMat<T>) -> Result<Vec<T>> {
    check_dim(a.nrows(), b.nrows())?;
    let qa = orth(a);
    let qb = orth(b);
    if qa.ncols() != qb.ncols() {
        return input(format!("subspace dimensions differ ({} vs {})", qa.ncols(), qb.ncols()));
    }
    if qa.ncols() == 0 {
        return Ok(Vec::new());
    }
    let n = a.nrows();
    let r = (CMat::<T>::identity(n, n) - &qa * qa.adjoint()) * &qb;
    let mut s: Vec<T> = r
        .svd(false, false)
        .singular_values
        .iter()
        .map(|&x| x.min(T::one()).asin())
        .collect();
    s.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
    Ok(s)
}

/// Largest principal angle, or `π/2` when the dimensions differ.
pub fn subspace_gap<T: Real>(a: &CMat<T>, b: &CMat<T>) -> T {
    match principal_angles(a, b) {
        Ok(v) => v.last().copied().unwrap_or(T::zero()),
        Err(_) => T::frac_pi_2(),
    }
}

/// Whether two subspaces agree to the given angle.
pub fn same_subspace<T: Real>(a: &CMat<T>, b: &CMat<T>, tol: T) -> bool {
    subspace_gap(a, b) < tol
}

/// Distance of a vector from a subspace, relative to its length.
pub fn relative_distance<T: Real>(basis: &CMat<T>, v: &crate::CVec<T>) -> T {
    let nv = v.norm();
    if nv == T::zero() {
        return T::zero();
    }
    let proj = basis * (basis.adjoint() * v);
    (v - proj).norm() / nv
}

/// The APS condition: span of eigenvectors with `λ < 0`.
pub fn aps<T: Real>(sys: &EigenSystem<T>) -> BoundaryCondition<T> {
    BoundaryCondition {
        basis: sys.eigvec_columns(&sys.chi_minus_indices()),
        kind: BcKind::Aps,
        sigma0: None,
    }
}

/// Spectral condition `ran χ⁺(A − r) = span{λ ≥ r}`.
pub fn spectral_at_least<T: Real>(sys: &EigenSystem<T>, r: T) -> BoundaryCondition<T> {
    let shifted = sys.shifted(r);
    BoundaryCondition {
        basis: sys.eigvec_columns(&shifted.chi_plus_indices()),
        kind: BcKind::Projection,
        sigma0: None,
    }
}

/// `(κ, ‖σ‖, ‖σ⁻¹‖)` for a square matrix; `κ = ∞` if singular.
pub fn condition_number<T: Real>(sigma: &CMat<T>) -> f64 {
    if sigma.nrows() == 0 {
        return 1.0;
    }
    let sv = sigma.clone().svd(false, false).singular_values;
    let smax = sv.iter().fold(T::zero(), |a, &s| a.max(s));
    let smin = sv.iter().fold(smax, |a, &s| a.min(s));
    if smin == T::zero() {
        f64::INFINITY
    } else {
        to_f64(smax / smin)
    }
}

fn invert<T: Real>(sigma: &CMat<T>) -> Result<CMat<T>> {
    if sigma.nrows() != sigma.ncols() {
        return input("sigma0 must be square");
    }
    let kappa = condition_number(sigma);
    if !(kappa < 1e12) {
        return input(format!("sigma0 is singular (condition number {kappa:e})"));
    }
    sigma
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Input("sigma0 is singular".into()))
}

/// Adjoint condition `B^ad = (σ₀⁻¹)ᴴ B^⊥`.
///
/// The result carries the symbol `−σ₀ᴴ` of the adjoint operator, so applying
/// this function twice with the stored symbol returns `B`.
pub fn adjoint_bc<T: Real>(
    sys: &EigenSystem<T>,
    b: &BoundaryCondition<T>,
    sigma0: &CMat<T>,
) -> Result<BoundaryCondition<T>> {
    check_dim(sys.dim(), b.ambient_dim())?;
    check_dim(sys.dim(), sigma0.nrows())?;
    let inv_adj = invert(sigma0)?.adjoint();
    let basis = orth(&(inv_adj * b.complement()));
    Ok(BoundaryCondition { basis, kind: BcKind::Custom, sigma0: Some(-sigma0.adjoint()) })
}

/// `max |⟨σ₀u, v⟩| / (‖u‖‖v‖)` over `u ∈ B`, `v ∈ B'`.
pub fn green_compatibility<T: Real>(
    b: &BoundaryCondition<T>,
    bad: &BoundaryCondition<T>,
    sigma0: &CMat<T>,
) -> T {
    op_norm(&(bad.basis().adjoint() * sigma0 * b.basis()))
}

/// A projection boundary condition with its boundedness diagnostics.
#[derive(Clone, Debug)]
pub struct ProjectionBc<T: Real> {
    pub bc: BoundaryCondition<T>,
    /// `‖|A|_ε^{1/2} P |A|_ε^{−1/2}‖`
    pub h_half_norm: T,
    /// `‖|A|_ε^{−1/2} P |A|_ε^{1/2}‖`
    pub dual_norm: T,
    /// Largest angle between `closure(P H^{1/2})` and `P dual(H^{1/2}) ∩ Ȟ`.
    pub locadj_gap: T,
}

fn weighted_conjugate<T: Real>(sys: &EigenSystem<T>, p: &CMat<T>, w: &[T]) -> CMat<T> {
    let c = sys.coeff_matrix(p);
    let n = sys.dim();
    CMat::<T>::from_fn(n, n, |i, j| c[(i, j)] * cr(w[i] / w[j]))
}

/// `B = ran(P)` for an idempotent `P`.
pub fn projection_bc<T: Real>(sys: &EigenSystem<T>, p: &CMat<T>, epsilon: T) -> Result<ProjectionBc<T>> {
    check_dim(sys.dim(), p.nrows())?;
    check_dim(sys.dim(), p.ncols())?;
    let scale = max_abs(p).max(T::one());
    let idem = max_abs(&(p * p - p));
    if idem > T::exact_tol() * scale {
        return input(format!("P is not idempotent (defect {idem})"));
    }
    let w = shifted_abs_powers(sys, lit::<T>(0.5), epsilon)?;
    let winv: Vec<T> = w.iter().map(|&x| T::one() / x).collect();
    let h_half_norm = op_norm(&weighted_conjugate(sys, p, &w));
    let dual_norm = op_norm(&weighted_conjugate(sys, p, &winv));
    // P applied to a spanning set of H^{1/2} versus one of the dual space.
    let u = sys.eigenvectors();
    let from_h = orth(&(p * u * crate::scalar::diag_c(&winv)));
    let from_dual = orth(&(p * u * crate::scalar::diag_c(&w)));
    let locadj_gap = subspace_gap(&from_h, &from_dual);
    let bc = BoundaryCondition { basis: orth(p), kind: BcKind::Projection, sigma0: None };
    Ok(ProjectionBc { bc, h_half_norm, dual_norm, locadj_gap })
}

/// Adjoint of a projection condition through `σ₀ᴴ B^ad = ran(I − Pᴴ)`.
pub fn projection_adjoint<T: Real>(p: &CMat<T>, sigma0: &CMat<T>) -> Result<BoundaryCondition<T>> {
    let n = p.nrows();
    check_dim(n, sigma0.nrows())?;
    let q = CMat::<T>::identity(n, n) - p.adjoint();
    let inv_adj = invert(sigma0)?.adjoint();
    // I − Pᴴ is pure rounding noise when P = I.
    let floor = T::exact_tol() * max_abs(p).max(T::one()) * op_norm(&inv_adj);
    Ok(BoundaryCondition {
        basis: orth_above(&(inv_adj * q), floor),
        kind: BcKind::Custom,
        sigma0: Some(-sigma0.adjoint()),
    })
}

/// Margins of a failed chirality precondition.
fn chirality_defects<T: Real>(sys: &EigenSystem<T>, xi: &CMat<T>) -> Result<(T, T)> {
    if xi.nrows() != xi.ncols() {
        return input("Xi must be square");
    }
    check_dim(sys.dim(), xi.nrows())?;
    let n = sys.dim();
    let a = sys.matrix();
    let sq = max_abs(&(xi * xi - CMat::<T>::identity(n, n)));
    let anti = max_abs(&(xi * &a + &a * xi));
    Ok((sq, anti))
}

fn involution_ranges<T: Real>(xi: &CMat<T>) -> (CMat<T>, CMat<T>) {
    let n = xi.nrows();
    let id = CMat::<T>::identity(n, n);
    let half = cr(lit::<T>(0.5));
    (orth(&((&id + xi) * half)), orth(&((&id - xi) * half)))
}

/// Chiral conditions `B± = ran((I ± Ξ)/2)` for an involution anticommuting with `A`.
pub fn chiral<T: Real>(
    sys: &EigenSystem<T>,
    xi: &CMat<T>,
) -> Result<(BoundaryCondition<T>, BoundaryCondition<T>)> {
    let (sq, anti) = chirality_defects(sys, xi)?;
    let scale = sys.spectral_radius().max(T::one());
    if sq > T::exact_tol() || anti > T::exact_tol() * scale {
        return input(format!(
            "not a chirality operator: |Xi^2 - I| = {sq}, |Xi A + A Xi| = {anti}"
        ));
    }
    let (p, m) = involution_ranges(xi);
    Ok((
        BoundaryCondition { basis: p, kind: BcKind::ChiralPlus, sigma0: None },
        BoundaryCondition { basis: m, kind: BcKind::ChiralMinus, sigma0: None },
    ))
}

/// Which hypothesis on `σ₀` identifies the adjoint of a chiral condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChiralBranch {
    /// `σ₀Ξ = Ξσ₀`: the adjoint of `B±` is the `∓` range of `Ξᴴ`.
    CommutesWithXi,
    /// `σ₀A = −Aσ₀`: the adjoint of `B±` is the `∓` range of `σ₀Ξᴴσ₀⁻¹`.
    AnticommutesWithA,
}

/// Adjoint of `B₊` (`plus = true`) or `B₋` as a chiral condition.
pub fn chiral_adjoint<T: Real>(
    sys: &EigenSystem<T>,
    xi: &CMat<T>,
    sigma0: &CMat<T>,
    branch: ChiralBranch,
    plus: bool,
) -> Result<BoundaryCondition<T>> {
    chiral(sys, xi)?;
    check_dim(sys.dim(), sigma0.nrows())?;
    let scale = max_abs(sigma0).max(T::one()) * sys.spectral_radius().max(T::one());
    let xi_t = match branch {
        ChiralBranch::CommutesWithXi => {
            let d = max_abs(&(sigma0 * xi - xi * sigma0));
            if d > T::exact_tol() * scale {
                return input(format!("sigma0 does not commute with Xi (defect {d})"));
            }
            xi.adjoint()
        }
        ChiralBranch::AnticommutesWithA => {
            let a = sys.matrix();
            let d = max_abs(&(sigma0 * &a + &a * sigma0));
            if d > T::exact_tol() * scale {
                return input(format!("sigma0 does not anticommute with A (defect {d})"));
            }
            sigma0 * xi.adjoint() * invert(sigma0)?
        }
    };
    let (p, m) = involution_ranges(&xi_t);
    let (basis, kind) = if plus { (m, BcKind::ChiralMinus) } else { (p, BcKind::ChiralPlus) };
    Ok(BoundaryCondition { basis, kind, sigma0: Some(-sigma0.adjoint()) })
}

/// Matching condition on the doubled boundary `A₀ ⊕ (−A₀)`.
#[derive(Clone, Debug)]
pub struct MatchingBc<T: Real> {
    /// The doubled operator.
    pub sys: EigenSystem<T>,
    /// `{(u, u)}`
    pub bc: BoundaryCondition<T>,
    /// Largest angle between the pairing annihilator and `{(v, −v)}`.
    pub annihilator_gap: T,
}

/// Builds `A₀ ⊕ (−A₀)` and the diagonal subspace `{(u, u)}`.
pub fn matching<T: Real>(sys0: &EigenSystem<T>) -> Result<MatchingBc<T>> {
    let n = sys0.dim();
    let a0 = sys0.matrix();
    let mut a = CMat::<T>::zeros(2 * n, 2 * n);
    a.view_mut((0, 0), (n, n)).copy_from(&a0);
    a.view_mut((n, n), (n, n)).copy_from(&(-&a0));
    let sys = EigenSystem::from_hermitian(&a)?.with_zero_side(sys0.zero_side());
    let s = cr(T::one() / lit::<T>(2.0).sqrt());
    let mut diag = CMat::<T>::zeros(2 * n, n);
    let mut anti = CMat::<T>::zeros(2 * n, n);
    for j in 0..n {
        diag[(j, j)] = s;
        diag[(n + j, j)] = s;
        anti[(j, j)] = s;
        anti[(n + j, j)] = -s;
    }
    let bc = BoundaryCondition { basis: diag, kind: BcKind::Matching, sigma0: None };
    let annihilator_gap = subspace_gap(&bc.complement(), &anti);
    Ok(MatchingBc { sys, bc, annihilator_gap })
}

/// Ratio growth beyond which a margin counts as resolution-unstable.
pub const GROWTH_LIMIT: f64 = 1.5;

/// `sup_{u ∈ span(basis)} ‖W_num Uᴴu‖ / ‖W_den Uᴴu‖`.
fn subspace_margin<T: Real>(sys: &EigenSystem<T>, basis: &CMat<T>, num: &[T], den: &[T]) -> T {
    let k = basis.ncols();
    if k == 0 {
        return T::zero();
    }
    let c = sys.eigenvectors().adjoint() * basis;
    let n = sys.dim();
    let mn = CMat::<T>::from_fn(n, k, |i, j| c[(i, j)] * cr(num[i]));
    let md = CMat::<T>::from_fn(n, k, |i, j| c[(i, j)] * cr(den[i]));
    let r = md.qr().r();
    // X R = M_n  ⇔  Rᴴ Xᴴ = M_nᴴ
    match r.adjoint().solve_lower_triangular(&mn.adjoint()) {
        Some(xh) => op_norm(&xh),
        None => T::max_value().unwrap_or(T::one()),
    }
}

/// Indices with `|λ| ≤ Λ/2`, or `None` when the band is trivial.
fn lower_band<T: Real>(sys: &EigenSystem<T>) -> Option<Vec<usize>> {
    let cap = sys.spectral_radius() * lit::<T>(0.5);
    let band: Vec<usize> =
        (0..sys.dim()).filter(|&j| sys.eigenvalues()[j].abs() <= cap).collect();
    (!band.is_empty() && band.len() < sys.dim()).then_some(band)
}

/// Margin on the band-compressed subspace `P_band B`.
fn band_margin<T: Real>(sys: &EigenSystem<T>, basis: &CMat<T>, num: &[T], den: &[T]) -> Option<T> {
    let band = lower_band(sys)?;
    let pb = sys.eigvec_columns(&band);
    let compressed = orth(&(&pb * (pb.adjoint() * basis)));
    Some(subspace_margin(sys, &compressed, num, den))
}

fn stable<T: Real>(full: T, band: Option<T>) -> bool {
    match band {
        None => true,
        Some(b) => to_f64(full) <= GROWTH_LIMIT * to_f64(b).max(1.0) + 1e-12,
    }
}

/// Norm of `σ` restricted to `span(basis)`, measured in the weighted norm `w`.
fn restricted_norm<T: Real>(sys: &EigenSystem<T>, sigma: &CMat<T>, basis: &CMat<T>, w: &[T]) -> T {
    let k = basis.ncols();
    if k == 0 {
        return T::zero();
    }
    let n = sys.dim();
    let u = sys.eigenvectors();
    let img = u.adjoint() * sigma * basis;
    let c = u.adjoint() * basis;
    let mn = CMat::<T>::from_fn(n, k, |i, j| img[(i, j)] * cr(w[i]));
    let md = CMat::<T>::from_fn(n, k, |i, j| c[(i, j)] * cr(w[i]));
    let r = md.qr().r();
    match r.adjoint().solve_lower_triangular(&mn.adjoint()) {
        Some(xh) => op_norm(&xh),
        None => T::max_value().unwrap_or(T::one()),
    }
}

fn restricted_band_norm<T: Real>(
    sys: &EigenSystem<T>,
    sigma: &CMat<T>,
    basis: &CMat<T>,
    w: &[T],
) -> Option<T> {
    let band = lower_band(sys)?;
    let pb = sys.eigvec_columns(&band);
    let compressed = orth(&(&pb * (pb.adjoint() * basis)));
    Some(restricted_norm(sys, sigma, &compressed, w))
}

/// The hypotheses of the structural regularity criterion.
#[derive(Clone, Debug, Serialize)]
pub struct StructuralCheck {
    pub sigma_anticommutes: bool,
    pub sigma_preserves_b: bool,
    pub sigma_adjoint_preserves_annihilator: bool,
    /// `σ₀` on `B` (in `Ȟ`) and `σ₀ᴴ` on `B^⊥` (in `Ĥ`) have resolution-stable norms.
    pub bounded_on_spaces: bool,
    pub applies: bool,
}

/// Outcome of [`regularity_check`].
#[derive(Clone, Debug, Serialize)]
pub struct RegularityReport {
    pub epsilon: f64,
    pub a_semi_regular: bool,
    /// `sup_{u∈B} ‖u‖_{H^{1/2}} / ‖u‖_Ȟ`
    pub semi_margin: f64,
    /// Same margin on the lower half of the spectrum, if that band is proper.
    pub semi_band_margin: Option<f64>,
    pub a_regular: bool,
    /// `sup_{v∈B^⊥} ‖v‖_{H^{1/2}} / ‖v‖_Ĥ`, i.e. the margin of `σ₀ᴴB^ad`.
    pub adjoint_margin: f64,
    pub adjoint_band_margin: Option<f64>,
    pub structural: StructuralCheck,
    /// Kernel eigen-indices whose eigenvector lies in `B`.
    pub kernel_overlap: Vec<usize>,
    /// Real and imaginary parts of the adjoint basis (ambient coordinates).
    pub adjoint_basis_re: Vec<Vec<f64>>,
    pub adjoint_basis_im: Vec<Vec<f64>>,
}

fn split_matrix<T: Real>(m: &CMat<T>) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let re = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| to_f64(m[(i, j)].re)).collect()).collect();
    let im = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| to_f64(m[(i, j)].im)).collect()).collect();
    (re, im)
}

/// A-elliptic (semi-)regularity of `B` with respect to `A` and `σ₀`.
pub fn regularity_check<T: Real>(
    sys: &EigenSystem<T>,
    b: &BoundaryCondition<T>,
    sigma0: &CMat<T>,
    epsilon: T,
) -> Result<RegularityReport> {
    check_dim(sys.dim(), b.ambient_dim())?;
    let half = shifted_abs_powers(sys, lit::<T>(0.5), epsilon)?;
    let wc = czech_weights(sys, epsilon)?;
    let wh = hat_weights(sys, epsilon)?;
    let perp = b.complement();

    let semi = subspace_margin(sys, b.basis(), &half, &wc);
    let semi_band = band_margin(sys, b.basis(), &half, &wc);
    let adj = subspace_margin(sys, &perp, &half, &wh);
    let adj_band = band_margin(sys, &perp, &half, &wh);
    let semi_ok = stable(semi, semi_band);
    let adj_ok = stable(adj, adj_band);

    let a = sys.matrix();
    let scale = max_abs(sigma0).max(T::one()) * sys.spectral_radius().max(T::one());
    let sigma_anticommutes = max_abs(&(sigma0 * &a + &a * sigma0)) <= T::exact_tol() * scale;
    let tol = T::angle_tol();
    let sigma_preserves_b = same_subspace(&(sigma0 * b.basis()), b.basis(), tol);
    let sigma_adjoint_preserves_annihilator = same_subspace(&(sigma0.adjoint() * &perp), &perp, tol);
    let nb = restricted_norm(sys, sigma0, b.basis(), &wc);
    let nb_band = restricted_band_norm(sys, sigma0, b.basis(), &wc);
    let np = restricted_norm(sys, &sigma0.adjoint(), &perp, &wh);
    let np_band = restricted_band_norm(sys, &sigma0.adjoint(), &perp, &wh);
    let bounded_on_spaces = stable(nb, nb_band) && stable(np, np_band);
    let applies = sigma_anticommutes
        && sigma_preserves_b
        && sigma_adjoint_preserves_annihilator
        && bounded_on_spaces;

    let adjoint = adjoint_bc(sys, b, sigma0)?;
    let (adjoint_basis_re, adjoint_basis_im) = split_matrix(adjoint.basis());
    let pb = b.projector();
    let kernel_overlap = sys
        .kernel_indices()
        .into_iter()
        .filter(|&j| {
            let e = sys.eigenvectors().column(j).into_owned();
            (&e - &pb * &e).norm() < tol
        })
        .collect();
    Ok(RegularityReport {
        epsilon: to_f64(epsilon),
        a_semi_regular: semi_ok || applies,
        semi_margin: to_f64(semi),
        semi_band_margin: semi_band.map(to_f64),
        a_regular: (semi_ok && adj_ok) || applies,
        adjoint_margin: to_f64(adj),
        adjoint_band_margin: adj_band.map(to_f64),
        structural: StructuralCheck {
            sigma_anticommutes,
            sigma_preserves_b,
            sigma_adjoint_preserves_annihilator,
            bounded_on_spaces,
            applies,
        },
        kernel_overlap,
        adjoint_basis_re,
        adjoint_basis_im,
    })
}

/// Margins of a family of conditions at truncations `n` and `2n`.
#[derive(Clone, Debug, Serialize)]
pub struct RegularitySweep {
    pub n: usize,
    pub semi_margins: [f64; 2],
    pub adjoint_margins: [f64; 2],
    pub semi_stable: bool,
    pub adjoint_stable: bool,
}

/// Compares regularity margins of a truncation-indexed family at `n` and `2n`.
pub fn regularity_sweep<T: Real, F>(build: F, n: usize, epsilon: T) -> Result<RegularitySweep>
where
    F: Fn(usize) -> Result<(EigenSystem<T>, BoundaryCondition<T>, CMat<T>)>,
{
    let mut semi = [0.0; 2];
    let mut adj = [0.0; 2];
    for (slot, m) in [n, 2 * n].into_iter().enumerate() {
        let (sys, b, s) = build(m)?;
        let r = regularity_check(&sys, &b, &s, epsilon)?;
        semi[slot] = r.semi_margin;
        adj[slot] = r.adjoint_margin;
    }
    let ok = |m: [f64; 2]| m[1] <= GROWTH_LIMIT * m[0].max(1.0) + 1e-12;
    Ok(RegularitySweep {
        n,
        semi_margins: semi,
        adjoint_margins: adj,
        semi_stable: ok(semi),
        adjoint_stable: ok(adj),
    })
}

/// JSON form of a boundary condition.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConditionJson {
    pub kind: BcKind,
    pub basis_re: Vec<Vec<f64>>,
    pub basis_im: Vec<Vec<f64>>,
    pub sigma0_re: Option<Vec<Vec<f64>>>,
    pub sigma0_im: Option<Vec<Vec<f64>>>,
}

fn join_matrix<T: Real>(re: &[Vec<f64>], im: &[Vec<f64>], rows: usize) -> Result<CMat<T>> {
    if re.len() != rows || im.len() != rows {
        return input("matrix row count mismatch");
    }
    let cols = re.first().map_or(0, |r| r.len());
    if re.iter().chain(im).any(|r| r.len() != cols) {
        return input("ragged matrix");
    }
    Ok(CMat::<T>::from_fn(rows, cols, |i, j| {
        crate::C::new(lit::<T>(re[i][j]), lit::<T>(im[i][j]))
    }))
}

impl<T: Real> BoundaryCondition<T> {
    pub fn to_json(&self) -> BoundaryConditionJson {
        let (basis_re, basis_im) = split_matrix(&self.basis);
        let (sigma0_re, sigma0_im) = match &self.sigma0 {
            Some(s) => {
                let (r, i) = split_matrix(s);
                (Some(r), Some(i))
            }
            None => (None, None),
        };
        BoundaryConditionJson { kind: self.kind, basis_re, basis_im, sigma0_re, sigma0_im }
    }

    pub fn from_json(j: &BoundaryConditionJson) -> Result<Self> {
        let n = j.basis_re.len();
        let basis = join_matrix(&j.basis_re, &j.basis_im, n)?;
        let sigma0 = match (&j.sigma0_re, &j.sigma0_im) {
            (Some(r), Some(i)) => Some(join_matrix(r, i, n)?),
            (None, None) => None,
            _ => return input("sigma0 needs both real and imaginary parts"),
        };
        Self::new(basis, j.kind, sigma0)
    }
}

/// `χ⁻(A)` as a matrix, a convenience for building projection conditions.
pub fn aps_projector<T: Real>(sys: &EigenSystem<T>) -> CMat<T> {
    chi_minus(sys).matrix
}
