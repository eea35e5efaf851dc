//! Two-ended boundary value problems on `[0, L] × ∂M` and their index.
//!
//! The operator is discretised with the box scheme: block row `i` is
//! `σ̄_i[(u_{i+1} − u_i)/h + ½(M_i u_i + M_{i+1}u_{i+1})]` with `M_i = A + R_i`
//! and `σ̄_i = ½(σ_i + σ_{i+1})`. Per eigenmode this is an exact one-step
//! recursion, so the discrete solution space of the ODE has dimension `dim A`
//! for every grid. Boundary conditions are appended as orthonormal rows that
//! annihilate the traces' components in `B^⊥`.
//!
//! At the far end the inward normal is `−∂_t`, so Green's formula contributes
//! `+⟨σ_L u(L), v(L)⟩` and the adjoint condition there is `(σ_L⁻¹)ᴴ B₁^⊥`.

use serde::Serialize;

use crate::bc::{adjoint_bc, aps, complement, orth, regularity_check, spectral_at_least, BoundaryCondition};
use crate::cylinder::{admissible_basis, h1_embedding_svals, CylinderGrid, CylinderOperator, CylinderSection};
use crate::error::{check_dim, input, Error, Result};
use crate::scalar::{cr, lit, max_abs, to_f64, CMat, CVec, Real};
use crate::spectral::EigenSystem;

/// Thresholds used for the tolerance-stability check.
pub const TOL_SWEEP: [f64; 3] = [1e-10, 1e-8, 1e-6];
/// Default relative singular-value threshold.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Which operator an assembled system discretises.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Primal,
    Adjoint,
}

/// Discrete `D` with boundary rows at `t = 0` and `t = L`.
#[derive(Clone, Debug)]
pub struct AssembledBvp<T: Real> {
    pub matrix: CMat<T>,
    pub nt: usize,
    pub dim: usize,
    /// Constraint rows at each end.
    pub constraints: (usize, usize),
    pub side: Side,
}

/// Boundary condition basis in eigencoordinates.
fn to_coeff<T: Real>(sys: &EigenSystem<T>, b: &BoundaryCondition<T>) -> CMat<T> {
    sys.eigenvectors().adjoint() * b.basis()
}

fn invert<T: Real>(m: &CMat<T>) -> Result<CMat<T>> {
    m.clone().try_inverse().ok_or_else(|| Error::Input("singular sigma_t".into()))
}

impl<T: Real> AssembledBvp<T> {
    /// Wraps an explicit matrix (`nt · dim` columns).
    pub fn from_matrix(matrix: CMat<T>, nt: usize, dim: usize) -> Result<Self> {
        check_dim(nt * dim, matrix.ncols())?;
        Ok(Self { matrix, nt, dim, constraints: (0, 0), side: Side::Primal })
    }

    fn build(
        op: &CylinderOperator<T>,
        start: &CMat<T>,
        end: &CMat<T>,
        side: Side,
    ) -> Result<Self> {
        let n = op.dim();
        let nt = op.grid.nt;
        let h = op.grid.h();
        let lam = op.sys.eigenvalues();
        let perp0 = complement(start);
        let perp1 = complement(end);
        let (c0, c1) = (perp0.ncols(), perp1.ncols());
        let rows = (nt - 1) * n + c0 + c1;
        let mut m = CMat::<T>::zeros(rows, nt * n);
        let half = cr(lit::<T>(0.5));
        let inv_h = cr(T::one() / h);
        let id = CMat::<T>::identity(n, n);
        let a = crate::scalar::diag_c(lam);
        for i in 0..nt - 1 {
            let (left, right) = match side {
                Side::Primal => {
                    let s = (op.sigma_at(i) + op.sigma_at(i + 1)) * half;
                    let ml = &a + op.remainder_at(i);
                    let mr = &a + op.remainder_at(i + 1);
                    (
                        &s * (&ml * half - &id * inv_h),
                        &s * (&mr * half + &id * inv_h),
                    )
                }
                Side::Adjoint => {
                    // −∂_t w + (A + Rᴴ)w with w = σᴴv.
                    let ml = &a + op.remainder_at(i).adjoint();
                    let mr = &a + op.remainder_at(i + 1).adjoint();
                    (
                        (&ml * half + &id * inv_h) * op.sigma_at(i).adjoint(),
                        (&mr * half - &id * inv_h) * op.sigma_at(i + 1).adjoint(),
                    )
                }
            };
            m.view_mut((i * n, i * n), (n, n)).copy_from(&left);
            m.view_mut((i * n, (i + 1) * n), (n, n)).copy_from(&right);
        }
        let r0 = (nt - 1) * n;
        m.view_mut((r0, 0), (c0, n)).copy_from(&perp0.adjoint());
        m.view_mut((r0 + c0, (nt - 1) * n), (c1, n)).copy_from(&perp1.adjoint());
        Ok(Self { matrix: m, nt, dim: n, constraints: (c0, c1), side })
    }

    /// Discrete `D` with `u(0) ∈ B₀`, `u(L) ∈ B₁`.
    pub fn assemble(op: &CylinderOperator<T>, b0: &BoundaryCondition<T>, b1: &BoundaryCondition<T>) -> Result<Self> {
        check_dim(op.dim(), b0.ambient_dim())?;
        check_dim(op.dim(), b1.ambient_dim())?;
        Self::build(op, &to_coeff(&op.sys, b0), &to_coeff(&op.sys, b1), Side::Primal)
    }

    /// Discrete `D†` with `v(0) ∈ B₀^ad` and `v(L) ∈ (σ_L⁻¹)ᴴB₁^⊥`.
    pub fn assemble_adjoint(
        op: &CylinderOperator<T>,
        b0: &BoundaryCondition<T>,
        b1: &BoundaryCondition<T>,
    ) -> Result<Self> {
        check_dim(op.dim(), b0.ambient_dim())?;
        check_dim(op.dim(), b1.ambient_dim())?;
        let ad0 = adjoint_bc(&op.sys, b0, &op.sigma0_ambient())?;
        let s_l = op.sigma_at(op.grid.nt - 1);
        let far = orth(&(invert(s_l)?.adjoint() * complement(&to_coeff(&op.sys, b1))));
        Self::build(op, &to_coeff(&op.sys, &ad0), &far, Side::Adjoint)
    }

    pub fn singular_values(&self) -> Vec<T> {
        let mut sv: Vec<T> = self.matrix.clone().svd(false, false).singular_values.iter().copied().collect();
        sv.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
        sv
    }
}

/// Kernel dimension with its tolerance sweep.
#[derive(Clone, Debug, Serialize)]
pub struct KernelDim {
    pub dim: usize,
    pub tol: f64,
    /// Dimension at each threshold of [`TOL_SWEEP`].
    pub sweep: Vec<usize>,
    pub ill_separated: bool,
    /// Smallest singular value counted as nonzero, relative to `σ_max`.
    pub smallest_nonkernel: f64,
    /// Largest singular value counted as zero, relative to `σ_max`.
    pub largest_kernel: f64,
}

fn count_kernel<T: Real>(sv: &[T], cols: usize, tol: f64) -> usize {
    let smax = sv.first().copied().unwrap_or(T::zero());
    let thr = lit::<T>(tol) * smax;
    cols - sv.iter().filter(|&&s| s >= thr && s > T::zero()).count()
}

/// `cols − #{σ ≥ tol · σ_max}`.
pub fn kernel_dim<T: Real>(bvp: &AssembledBvp<T>, tol: f64) -> Result<KernelDim> {
    if bvp.matrix.is_empty() {
        return input("empty system");
    }
    if !(tol > 0.0) {
        return input("tol must be positive");
    }
    let sv = bvp.singular_values();
    let cols = bvp.matrix.ncols();
    let smax = to_f64(sv[0]);
    let dim = count_kernel(&sv, cols, tol);
    let sweep: Vec<usize> = TOL_SWEEP.iter().map(|&t| count_kernel(&sv, cols, t)).collect();
    let rank = cols - dim;
    let rel = |s: T| if smax > 0.0 { to_f64(s) / smax } else { 0.0 };
    let smallest_nonkernel = if rank > 0 { rel(sv[rank - 1]) } else { 0.0 };
    // Kernel singular values beyond the row count are exact zeros.
    let largest_kernel = if dim > 0 && rank < sv.len() { rel(sv[rank]) } else { 0.0 };
    Ok(KernelDim {
        dim,
        tol,
        ill_separated: sweep.iter().any(|&k| k != sweep[0]),
        sweep,
        smallest_nonkernel,
        largest_kernel,
    })
}

/// Index of `D` with two boundary conditions.
#[derive(Clone, Debug, Serialize)]
pub struct IndexReport {
    pub kernel: KernelDim,
    pub cokernel: KernelDim,
    pub index: i64,
    /// `dim B₀ + dim B₁ − dim A`, the index of the discrete system by counting.
    pub dim_count: i64,
    /// Largest `|⟨y, D_B u⟩|` over left null vectors `y` of the primal system.
    pub range_pairing: f64,
    pub far_end_orientation: &'static str,
}

const ORIENTATION: &str = "far end: inward normal is -dt; Green term +<sigma_L u(L), v(L)>";

/// `dim ker D_{B₀,B₁} − dim ker D†_{B₀^ad,B₁^ad}`.
pub fn index<T: Real>(
    op: &CylinderOperator<T>,
    b0: &BoundaryCondition<T>,
    b1: &BoundaryCondition<T>,
    tol: f64,
) -> Result<IndexReport> {
    let primal = AssembledBvp::assemble(op, b0, b1)?;
    let adjoint = AssembledBvp::assemble_adjoint(op, b0, b1)?;
    let kernel = kernel_dim(&primal, tol)?;
    let cokernel = kernel_dim(&adjoint, tol)?;
    let n = op.dim() as i64;
    Ok(IndexReport {
        index: kernel.dim as i64 - cokernel.dim as i64,
        dim_count: b0.dim() as i64 + b1.dim() as i64 - n,
        range_pairing: range_pairing(&primal),
        kernel,
        cokernel,
        far_end_orientation: ORIENTATION,
    })
}

/// Pairing of the primal system's left null space with its range, restricted to
/// the admissible domain (traces in `B₀`, `B₁`), relative to `σ_max`.
fn range_pairing<T: Real>(bvp: &AssembledBvp<T>) -> f64 {
    let ode_rows = (bvp.nt - 1) * bvp.dim;
    let ode = bvp.matrix.rows(0, ode_rows).into_owned();
    let cons = bvp.matrix.rows(ode_rows, bvp.matrix.nrows() - ode_rows).into_owned();
    let domain = complement(&cons.adjoint());
    let restricted = &ode * &domain;
    if restricted.ncols() == 0 {
        return 0.0;
    }
    let smax = crate::scalar::op_norm(&restricted);
    if smax == T::zero() {
        return 0.0;
    }
    let left_null = complement(&orth(&restricted));
    if left_null.ncols() == 0 {
        return 0.0;
    }
    to_f64(crate::scalar::op_norm(&(left_null.adjoint() * &restricted)) / smax)
}

/// `#{λ ∈ [−cL, 0)}` for `c ≥ 0`, and `−#{λ ∈ [0, −cL)}` for `c < 0`.
pub fn aps_index_oracle(eigenvalues: &[f64], c: f64, length: f64) -> i64 {
    let r = c * length;
    if r >= 0.0 {
        eigenvalues.iter().filter(|&&l| l >= -r && l < 0.0).count() as i64
    } else {
        -(eigenvalues.iter().filter(|&&l| l >= 0.0 && l < -r).count() as i64)
    }
}

/// Linear spectral flow `A + ct` on the circle Dirac family.
#[derive(Clone, Debug)]
pub struct FlowInstance<T: Real> {
    pub op: CylinderOperator<T>,
    /// APS at `t = 0`.
    pub b0: BoundaryCondition<T>,
    /// Nonnegative modes of `A + cL` at `t = L`.
    pub b1: BoundaryCondition<T>,
    pub c: T,
}

/// `σ = I`, `R_t = ctI` on `[0, L]` over the truncated circle Dirac operator.
pub fn flow_instance<T: Real>(n_modes: usize, shift: T, c: T, length: T, nt: usize) -> Result<FlowInstance<T>> {
    let sys = crate::dirac::circle_dirac_diagonal(n_modes, shift)?;
    let n = sys.dim();
    let grid = CylinderGrid::new(length, nt)?;
    let op = CylinderOperator::model(sys, grid, &CMat::identity(n, n))?
        .with_remainder(|t| CMat::identity(n, n) * cr(c * t))?;
    let b0 = aps(&op.sys);
    let b1 = spectral_at_least(&op.sys, -c * length);
    Ok(FlowInstance { op, b0, b1, c })
}

/// Index of a flow instance next to its oracle.
#[derive(Clone, Debug, Serialize)]
pub struct FlowIndex {
    pub n_modes: usize,
    pub shift: f64,
    pub c: f64,
    pub length: f64,
    pub nt: usize,
    pub report: IndexReport,
    pub oracle_index: i64,
    pub agrees: bool,
}

pub fn flow_index<T: Real>(n_modes: usize, shift: T, c: T, length: T, nt: usize, tol: f64) -> Result<FlowIndex> {
    let inst = flow_instance(n_modes, shift, c, length, nt)?;
    let report = index(&inst.op, &inst.b0, &inst.b1, tol)?;
    let eig: Vec<f64> = inst.op.sys.eigenvalues().iter().map(|&x| to_f64(x)).collect();
    let oracle_index = aps_index_oracle(&eig, to_f64(c), to_f64(length));
    Ok(FlowIndex {
        n_modes,
        shift: to_f64(shift),
        c: to_f64(c),
        length: to_f64(length),
        nt,
        agrees: report.index == oracle_index && !report.kernel.ill_separated && !report.cokernel.ill_separated,
        report,
        oracle_index,
    })
}

/// Time-and-mode support mask; `true` marks points of the compact set `K`.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportMask {
    pub nt: usize,
    pub dim: usize,
    cells: Vec<bool>,
}

impl SupportMask {
    pub fn empty(nt: usize, dim: usize) -> Self {
        Self { nt, dim, cells: vec![false; nt * dim] }
    }

    pub fn from_fn(nt: usize, dim: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut cells = Vec::with_capacity(nt * dim);
        for i in 0..nt {
            for j in 0..dim {
                cells.push(f(i, j));
            }
        }
        Self { nt, dim, cells }
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.cells[i * self.dim + j]
    }

    pub fn union(&self, other: &Self) -> Self {
        Self {
            nt: self.nt,
            dim: self.dim,
            cells: self.cells.iter().zip(&other.cells).map(|(a, b)| *a || *b).collect(),
        }
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }
}

/// `min ‖Du‖/‖u‖` over samples with trace in `B`, vanishing on `K` and at `t = T`.
pub fn coercivity_margin<T: Real>(
    op: &CylinderOperator<T>,
    b: &BoundaryCondition<T>,
    mask: &SupportMask,
    samples: &[CylinderSection<T>],
) -> Result<T> {
    check_dim(op.grid.nt, mask.nt)?;
    check_dim(op.dim(), mask.dim)?;
    let mut best: Option<T> = None;
    for u in samples {
        let amb = op.sys.from_coeffs(&u.trace())?;
        if crate::bc::relative_distance(b.basis(), &amb) > T::angle_tol() {
            return input("sample trace not in B");
        }
        if !u.vanishes_at_end(2) {
            return input("sample must vanish at the far end");
        }
        let scale = max_abs(&u.values);
        for i in 0..mask.nt {
            for j in 0..mask.dim {
                if mask.contains(i, j) && u.values[(i, j)].norm_sqr().sqrt() > lit::<T>(1e-14) * scale {
                    return input("sample meets K");
                }
            }
        }
        let nu = u.norm();
        if nu == T::zero() {
            continue;
        }
        let r = op.apply_full(u)?.norm() / nu;
        best = Some(best.map_or(r, |b: T| b.min(r)));
    }
    best.ok_or_else(|| Error::Input("no admissible samples".into()))
}

fn flatten<T: Real>(u: &CylinderSection<T>, sqrt_w: &[T]) -> CVec<T> {
    let n = u.dim();
    CVec::<T>::from_fn(u.grid.nt * n, |k, _| u.values[(k / n, k % n)] * cr(sqrt_w[k / n]))
}

/// Exact `inf ‖Du‖/‖u‖` over all admissible sections (trace in `B`, vanishing on
/// `K` and at the last two samples).
pub fn coercivity_margin_exact<T: Real>(
    op: &CylinderOperator<T>,
    b: &BoundaryCondition<T>,
    mask: &SupportMask,
) -> Result<T> {
    check_dim(op.grid.nt, mask.nt)?;
    check_dim(op.dim(), mask.dim)?;
    let b_coeff = to_coeff(&op.sys, b);
    let forbid = |i: usize, j: usize| mask.contains(i, j);
    let basis = admissible_basis(&op.grid, &b_coeff, op.grid.length, Some(&forbid));
    if basis.is_empty() {
        return input("admissible space is empty");
    }
    let sw: Vec<T> = op.grid.weights().iter().map(|w| w.sqrt()).collect();
    let rows = op.grid.nt * op.dim();
    let k = basis.len();
    let mut u = CMat::<T>::zeros(rows, k);
    let mut d = CMat::<T>::zeros(rows, k);
    for (c, s) in basis.iter().enumerate() {
        u.set_column(c, &flatten(s, &sw));
        d.set_column(c, &flatten(&op.apply_full(s)?, &sw));
    }
    let qr = u.qr();
    let r = qr.r();
    let rinv = r.try_inverse().ok_or_else(|| Error::Domain("degenerate admissible basis".into()))?;
    let sv = (d * rinv).svd(false, false).singular_values;
    Ok(sv.iter().fold(sv[0], |a, &x| a.min(x)))
}

/// Largest distance of `M·B` from `B` (relative), zero when the multiplier preserves `B`.
pub fn cutoff_preserves_bc<T: Real>(b: &BoundaryCondition<T>, multiplier: &CMat<T>) -> Result<T> {
    check_dim(b.ambient_dim(), multiplier.nrows())?;
    let img = multiplier * b.basis();
    let mut worst = T::zero();
    for j in 0..img.ncols() {
        let v = img.column(j).into_owned();
        worst = worst.max(crate::bc::relative_distance(b.basis(), &v));
    }
    Ok(worst)
}

/// Semi-Fredholm diagnostics of a two-ended problem.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SemiFredholm {
    Report(Box<SemiFredholmReport>),
    NotApplicable { reason: String },
}

#[derive(Clone, Debug, Serialize)]
pub struct SemiFredholmReport {
    pub kernel_dim: usize,
    pub tol_stability: Vec<usize>,
    pub ill_separated: bool,
    /// Smallest nonzero singular value over `σ_max` (closed-range proxy).
    pub sval_gap: f64,
    pub coercivity_margin: f64,
    pub b0_semi_regular: bool,
    /// `B₁` checked against the far-end boundary operator `−(A + R_L)`.
    pub b1_semi_regular: bool,
    /// Leading and trailing singular values of `H¹ ↪ L²` on `[0, L]`.
    pub embedding_head: f64,
    pub embedding_tail: f64,
    pub embedding_decays: bool,
    pub far_end_orientation: &'static str,
}

/// Kernel, range gap, coercivity, regularity of both conditions and embedding decay.
pub fn semifredholm_report<T: Real>(
    op: &CylinderOperator<T>,
    b0: &BoundaryCondition<T>,
    b1: &BoundaryCondition<T>,
    epsilon: T,
) -> Result<SemiFredholm> {
    let bvp = AssembledBvp::assemble(op, b0, b1)?;
    semifredholm_from(op, &bvp, b0, b1, epsilon)
}

/// As [`semifredholm_report`] for an explicitly assembled system.
pub fn semifredholm_from<T: Real>(
    op: &CylinderOperator<T>,
    bvp: &AssembledBvp<T>,
    b0: &BoundaryCondition<T>,
    b1: &BoundaryCondition<T>,
    epsilon: T,
) -> Result<SemiFredholm> {
    if bvp.matrix.is_empty() || max_abs(&bvp.matrix) == T::zero() {
        return Ok(SemiFredholm::NotApplicable { reason: "operator is identically zero".into() });
    }
    let k = kernel_dim(bvp, DEFAULT_TOL)?;
    let r0 = regularity_check(&op.sys, b0, &op.sigma0_ambient(), epsilon)?;
    let nt = op.grid.nt;
    let far = -(op.sys.matrix() + op.sys.ambient_matrix(op.remainder_at(nt - 1)));
    let far = (&far + far.adjoint()) * cr(lit::<T>(0.5));
    let far_sys = EigenSystem::from_hermitian(&far)?;
    let sigma_l = op.sys.ambient_matrix(op.sigma_at(nt - 1));
    let r1 = regularity_check(&far_sys, b1, &sigma_l, epsilon)?;
    let coercivity = coercivity_margin_exact(op, b0, &SupportMask::empty(nt, op.dim()))?;
    let emb = h1_embedding_svals(&op.grid, &op.sys, op.grid.length)?;
    let head = to_f64(emb[0]);
    let tail = to_f64(*emb.last().expect("nonempty"));
    Ok(SemiFredholm::Report(Box::new(SemiFredholmReport {
        kernel_dim: k.dim,
        tol_stability: k.sweep.clone(),
        ill_separated: k.ill_separated,
        sval_gap: k.smallest_nonkernel,
        coercivity_margin: to_f64(coercivity),
        b0_semi_regular: r0.a_semi_regular,
        b1_semi_regular: r1.a_semi_regular,
        embedding_head: head,
        embedding_tail: tail,
        embedding_decays: tail < head,
        far_end_orientation: ORIENTATION,
    })))
}
