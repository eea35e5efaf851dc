//! Concrete boundary operators and Callias-type potentials.
//!
//! The circle Dirac operator `−i d/dθ + s` is truncated to Fourier modes
//! `k ∈ [−N, N]` (basis index `k + N`). Callias checks work on a sampled line
//! with the one-dimensional Dirac operator `D = −iγ d/dx`.

use std::io::Read;

use serde::Serialize;

use crate::error::{check_dim, input, Error, Result};
use crate::scalar::{cr, czero, from_usize, lit, max_abs, op_norm, to_f64, CMat, Real, C};
use crate::spectral::{EigenSystem, ZeroSide};

/// Truncated circle Dirac operator with optional real potential.
#[derive(Clone, Debug)]
pub struct CircleDiracSpec<T: Real> {
    /// Mode cutoff `N`.
    pub n_modes: usize,
    pub shift: T,
    /// `V(θ_m)` at `θ_m = 2πm/(2N+1)`, `m = 0..2N`.
    pub potential: Option<Vec<C<T>>>,
}

impl<T: Real> CircleDiracSpec<T> {
    pub fn new(n_modes: usize, shift: T) -> Self {
        Self { n_modes, shift, potential: None }
    }

    /// Samples `v` on the `2N+1` point grid.
    pub fn with_potential(mut self, v: impl Fn(f64) -> f64) -> Self {
        let m = 2 * self.n_modes + 1;
        self.potential = Some(
            (0..m)
                .map(|j| cr(lit::<T>(v(2.0 * std::f64::consts::PI * j as f64 / m as f64))))
                .collect(),
        );
        self
    }

    pub fn dim(&self) -> usize {
        2 * self.n_modes + 1
    }

    /// Fourier matrix `diag(k + s) + Toeplitz(V̂)`.
    pub fn matrix(&self) -> Result<CMat<T>> {
        let n = self.n_modes;
        if n < 1 {
            return input("need N >= 1");
        }
        let dim = self.dim();
        let mut m = CMat::<T>::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = cr(from_usize::<T>(i) - from_usize::<T>(n) + self.shift);
        }
        if let Some(v) = &self.potential {
            let vhat = potential_coefficients(v, n)?;
            for i in 0..dim {
                for j in 0..dim {
                    let d = i as isize - j as isize;
                    if d.unsigned_abs() <= n {
                        m[(i, j)] += vhat[(d + n as isize) as usize];
                    }
                }
            }
        }
        Ok(m)
    }

    pub fn build(&self) -> Result<EigenSystem<T>> {
        EigenSystem::from_hermitian(&self.matrix()?)
    }
}

/// `V̂_k`, `k ∈ [−N, N]`, from samples on the `2N+1` point grid.
fn potential_coefficients<T: Real>(v: &[C<T>], n: usize) -> Result<Vec<C<T>>> {
    let m = 2 * n + 1;
    check_dim(m, v.len())?;
    let scale = v.iter().fold(T::zero(), |a, z| a.max(z.norm_sqr().sqrt())).max(T::one());
    if v.iter().any(|z| z.im.abs() > T::exact_tol() * scale) {
        return input("potential must be real");
    }
    if v.iter().any(|z| !z.re.is_finite()) {
        return input("potential must be finite");
    }
    let two_pi = lit::<T>(2.0 * std::f64::consts::PI);
    let mf = from_usize::<T>(m);
    let coeffs: Vec<C<T>> = (0..m)
        .map(|kk| {
            let k = T::from_isize(kk as isize - n as isize).expect("small integer");
            let mut acc = czero::<T>();
            for (j, z) in v.iter().enumerate() {
                let th = two_pi * from_usize::<T>(j) / mf;
                acc += cr(z.re) * C::new((k * th).cos(), -(k * th).sin());
            }
            acc / cr(mf)
        })
        .collect();
    for (kk, c) in coeffs.iter().enumerate() {
        let k = (kk as isize - n as isize).unsigned_abs();
        if 2 * k > n && c.norm_sqr().sqrt() > T::angle_tol() * scale {
            return input(format!("potential not band-limited: |V^({k})| = {}", c.norm_sqr().sqrt()));
        }
    }
    Ok(coeffs)
}

/// `circle_dirac(spec)` as an eigensystem.
pub fn circle_dirac<T: Real>(spec: &CircleDiracSpec<T>) -> Result<EigenSystem<T>> {
    spec.build()
}

/// Circle Dirac without potential as an exact diagonal system (modes in order `−N..N`).
pub fn circle_dirac_diagonal<T: Real>(n_modes: usize, shift: T) -> Result<EigenSystem<T>> {
    if n_modes < 1 {
        return input("need N >= 1");
    }
    let vals: Vec<T> = (0..2 * n_modes + 1)
        .map(|i| from_usize::<T>(i) - from_usize::<T>(n_modes) + shift)
        .collect();
    EigenSystem::diagonal(&vals)
}

/// Block system `A = [[0, A₀], [A₀, 0]]` with `Ξ = diag(I, −I)` and `σ₀ = iΞ`.
///
/// `Ξ` is an involution anticommuting with `A`, and `σ₀` both commutes with `Ξ`
/// and anticommutes with `A`.
#[derive(Clone, Debug)]
pub struct ChiralBlock<T: Real> {
    pub sys: EigenSystem<T>,
    pub xi: CMat<T>,
    pub sigma0: CMat<T>,
}

pub fn chiral_block<T: Real>(a0: &CMat<T>) -> Result<ChiralBlock<T>> {
    let n = a0.nrows();
    check_dim(n, a0.ncols())?;
    let mut a = CMat::<T>::zeros(2 * n, 2 * n);
    a.view_mut((0, n), (n, n)).copy_from(a0);
    a.view_mut((n, 0), (n, n)).copy_from(a0);
    let sys = EigenSystem::from_hermitian(&a)?;
    let mut xi = CMat::<T>::identity(2 * n, 2 * n);
    for j in n..2 * n {
        xi[(j, j)] = cr(-T::one());
    }
    let sigma0 = &xi * C::new(T::zero(), T::one());
    Ok(ChiralBlock { sys, xi, sigma0 })
}

/// `σ₀ = [[0, −I], [I, 0]]` on a doubled space; anticommutes with `[[0, A₀], [A₀, 0]]`.
pub fn block_sigma<T: Real>(n: usize) -> CMat<T> {
    let mut s = CMat::<T>::zeros(2 * n, 2 * n);
    for j in 0..n {
        s[(j, n + j)] = cr(-T::one());
        s[(n + j, j)] = cr(T::one());
    }
    s
}

// ---------------------------------------------------------------------------
// Callias potentials on a sampled line.

/// Pauli matrices.
pub fn pauli<T: Real>(k: usize) -> CMat<T> {
    let (o, l, i) = (czero::<T>(), cr(T::one()), C::new(T::zero(), T::one()));
    match k {
        1 => CMat::from_row_slice(2, 2, &[o, l, l, o]),
        2 => CMat::from_row_slice(2, 2, &[o, -i, i, o]),
        3 => CMat::from_row_slice(2, 2, &[l, o, o, -l]),
        _ => CMat::identity(2, 2),
    }
}

/// Sampled potential for `D = −iγ d/dx`.
#[derive(Clone, Debug)]
pub struct CalliasSpec<T: Real> {
    pub x: Vec<T>,
    /// `Φ(x_i)`, or `Ψ(x_i)` for the para-Callias checks.
    pub phi: Vec<CMat<T>>,
    /// Symbol `γ`.
    pub gamma: CMat<T>,
    /// Compact set `K = [a, b]`; `None` is the empty set.
    pub k: Option<(T, T)>,
    pub lambda: T,
    /// User declaration that the sampled potential is smooth.
    pub differentiable: bool,
}

impl<T: Real> CalliasSpec<T> {
    /// Samples `phi` on `x`, with `γ = σ₁`.
    pub fn sampled(x: Vec<T>, phi: impl Fn(T) -> CMat<T>, k: Option<(T, T)>, lambda: T) -> Self {
        let p = x.iter().map(|&t| phi(t)).collect();
        Self { x, phi: p, gamma: pauli(1), k, lambda, differentiable: true }
    }

    pub fn with_gamma(mut self, gamma: CMat<T>) -> Self {
        self.gamma = gamma;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.x.len() < 3 {
            return input("need at least three samples");
        }
        check_dim(self.x.len(), self.phi.len())?;
        if self.x.windows(2).any(|w| !(w[1] > w[0])) {
            return input("x grid must be increasing");
        }
        let r = self.gamma.nrows();
        if self.phi.iter().any(|p| p.nrows() != r || p.ncols() != r) {
            return input("potential and symbol sizes differ");
        }
        Ok(())
    }

    fn outside_k(&self, x: T) -> bool {
        match self.k {
            None => true,
            Some((a, b)) => x < a || x > b,
        }
    }

    /// `Φ′` by centred differences, second-order one-sided at the ends.
    pub fn derivative(&self) -> Vec<CMat<T>> {
        let n = self.x.len();
        let x = &self.x;
        let p = &self.phi;
        (0..n)
            .map(|i| {
                let (a, b, c, xa, xb, xc) = if i == 0 {
                    (0, 1, 2, x[0], x[1], x[2])
                } else if i == n - 1 {
                    (n - 3, n - 2, n - 1, x[n - 3], x[n - 2], x[n - 1])
                } else {
                    (i - 1, i, i + 1, x[i - 1], x[i], x[i + 1])
                };
                // Derivative at x[i] of the quadratic through three nodes.
                let t = x[i];
                let la = ((t - xb) + (t - xc)) / ((xa - xb) * (xa - xc));
                let lb = ((t - xa) + (t - xc)) / ((xb - xa) * (xb - xc));
                let lc = ((t - xa) + (t - xb)) / ((xc - xa) * (xc - xb));
                &p[a] * cr(la) + &p[b] * cr(lb) + &p[c] * cr(lc)
            })
            .collect()
    }
}

fn herm<T: Real>(m: &CMat<T>) -> CMat<T> {
    (m + m.adjoint()) * cr(lit::<T>(0.5))
}

fn min_eig<T: Real>(m: &CMat<T>) -> T {
    let e = nalgebra::SymmetricEigen::new(herm(m));
    e.eigenvalues.iter().fold(T::max_value().unwrap_or(T::one()), |a, &x| a.min(x))
}

/// Outcome of a pointwise potential check.
#[derive(Clone, Debug, Serialize)]
pub struct CalliasReport {
    pub verdict: bool,
    /// Smallest eigenvalue of the pointwise form at each sample.
    pub margins: Vec<f64>,
    /// Infimum of the margins outside `K`.
    pub margin_outside_k: f64,
    /// `[D, Φ]` has no first-order part (`[γ, Φ] = 0`), or for para checks `{γ, Ψ} = 0`.
    pub zeroth_order: bool,
    pub zeroth_order_defect: f64,
    pub differentiable: bool,
    /// Classical bound `Φ² − |[D, Φ]| ≥ Λ` outside `K`.
    pub classical_pass: bool,
    pub classical_margins: Vec<f64>,
    pub plus_pass: bool,
    pub minus_pass: bool,
    pub grid_spacing: f64,
}

fn summarize<T: Real>(
    spec: &CalliasSpec<T>,
    plus: &[T],
    minus: &[T],
    classical: &[T],
    defect: T,
) -> CalliasReport {
    let lam = spec.lambda;
    let tol = T::angle_tol();
    let zeroth_order = defect <= tol;
    let outside: Vec<usize> = (0..spec.x.len()).filter(|&i| spec.outside_k(spec.x[i])).collect();
    let slack = T::exact_tol() * lam.abs().max(T::one());
    let pass = |m: &[T]| zeroth_order && outside.iter().all(|&i| m[i] >= lam - slack);
    let inf = outside.iter().fold(f64::INFINITY, |a, &i| a.min(to_f64(plus[i])));
    let spacing = spec.x.windows(2).fold(0.0f64, |a, w| a.max(to_f64(w[1] - w[0])));
    CalliasReport {
        verdict: pass(plus),
        margins: plus.iter().map(|&m| to_f64(m)).collect(),
        margin_outside_k: inf,
        zeroth_order,
        zeroth_order_defect: to_f64(defect),
        differentiable: spec.differentiable,
        classical_pass: pass(classical),
        classical_margins: classical.iter().map(|&m| to_f64(m)).collect(),
        plus_pass: pass(plus),
        minus_pass: pass(minus),
        grid_spacing: spacing,
    }
}

/// Pointwise check of `Φ² + i[D, Φ] ≥ Λ` outside `K`, with `i[D, Φ] = γΦ′`.
pub fn callias_check<T: Real>(spec: &CalliasSpec<T>) -> Result<CalliasReport> {
    spec.validate()?;
    for p in &spec.phi {
        if max_abs(&(p - p.adjoint())) > T::exact_tol() * max_abs(p).max(T::one()) {
            return input("potential must be Hermitian");
        }
    }
    let dphi = spec.derivative();
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    let mut classical = Vec::new();
    let mut defect = T::zero();
    for (p, dp) in spec.phi.iter().zip(&dphi) {
        defect = defect.max(max_abs(&(&spec.gamma * p - p * &spec.gamma)));
        let sq = p * p;
        let comm = &spec.gamma * dp;
        plus.push(min_eig(&(&sq + &comm)));
        minus.push(min_eig(&(&sq - &comm)));
        classical.push(min_eig(&sq) - op_norm(&comm));
    }
    Ok(summarize(spec, &plus, &minus, &classical, defect))
}

/// Pointwise check of `(iΨ)² + i[D, Ψ]₊ ≥ Λ` outside `K`, where the zeroth-order
/// part of `i[D, Ψ]₊` is `γΨ′`.
pub fn para_callias_check<T: Real>(spec: &CalliasSpec<T>) -> Result<CalliasReport> {
    spec.validate()?;
    for p in &spec.phi {
        if max_abs(&(p + p.adjoint())) > T::exact_tol() * max_abs(p).max(T::one()) {
            return input("para-Callias potential must be skew-Hermitian");
        }
    }
    let dpsi = spec.derivative();
    let i = C::new(T::zero(), T::one());
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    let mut classical = Vec::new();
    let mut defect = T::zero();
    for (p, dp) in spec.phi.iter().zip(&dpsi) {
        defect = defect.max(max_abs(&(&spec.gamma * p + p * &spec.gamma)));
        let ip = p * i;
        let sq = &ip * &ip;
        let anti = &spec.gamma * dp;
        plus.push(min_eig(&(&sq + &anti)));
        minus.push(min_eig(&(&sq - &anti)));
        classical.push(min_eig(&sq) - op_norm(&anti));
    }
    Ok(summarize(spec, &plus, &minus, &classical, defect))
}

/// `max |(A + iσ₀Φ₀) + σ₀⁻¹(A − iσ₀Φ₀)σ₀|`, zero when `σ₀` anticommutes with `A`
/// and commutes with `Φ₀`.
pub fn para_conjugation_defect<T: Real>(a: &CMat<T>, sigma0: &CMat<T>, phi0: &CMat<T>) -> Result<T> {
    let inv = sigma0
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Input("sigma0 not invertible".into()))?;
    let i = C::new(T::zero(), T::one());
    let sp = sigma0 * phi0 * i;
    Ok(max_abs(&((a + &sp) + &inv * (a - &sp) * sigma0)))
}

/// Compact set outside which the pointwise bound holds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "half_width", rename_all = "snake_case")]
pub enum KR {
    /// `K_R = ∅`.
    Empty,
    /// `K_R = [−a, a]`.
    Bounded(f64),
    /// The bound fails at the edge of the sampled domain.
    Unbounded,
}

/// Minimal symmetric `K_R` for each `R` from the para-Callias margins.
pub fn strongly_para_profile<T: Real>(spec: &CalliasSpec<T>, r_list: &[T]) -> Result<Vec<KR>> {
    if r_list.windows(2).any(|w| !(w[1] > w[0])) {
        return input("R list must be increasing");
    }
    let rep = para_callias_check(spec)?;
    let edge = spec.x.iter().fold(0.0f64, |a, &x| a.max(to_f64(x).abs()));
    Ok(r_list
        .iter()
        .map(|&r| {
            let r = to_f64(r);
            let mut half = None::<f64>;
            for (i, &m) in rep.margins.iter().enumerate() {
                if m < r {
                    let ax = to_f64(spec.x[i]).abs();
                    half = Some(half.map_or(ax, |h| h.max(ax)));
                }
            }
            match half {
                None => KR::Empty,
                Some(h) if h >= edge => KR::Unbounded,
                Some(h) => KR::Bounded(h),
            }
        })
        .collect())
}

/// Truncation sweep of the lowest eigenvalues (by magnitude).
#[derive(Clone, Debug, Serialize)]
pub struct DiscretenessReport {
    pub truncations: Vec<usize>,
    /// `lowest[t][j]`: `j`-th smallest `|λ|` eigenvalue (signed) at truncation `t`.
    pub lowest: Vec<Vec<f64>>,
    /// Largest change of each tracked eigenvalue between the last two truncations.
    pub last_differences: Vec<f64>,
    /// Eigenvalue count in `[−L, L]`, `L` the largest tracked magnitude at the first truncation.
    pub counting: Vec<usize>,
    pub stabilized: bool,
    /// Indices of tracked eigenvalues that moved by more than the tolerance.
    pub unstable: Vec<usize>,
}

/// Lowest `m` eigenvalues of `build(M)` for each truncation `M`.
pub fn discreteness_proxy<T: Real>(
    build: impl Fn(usize) -> Result<CMat<T>>,
    truncations: &[usize],
    m: usize,
    tol: f64,
) -> Result<DiscretenessReport> {
    if truncations.len() < 2 || truncations.windows(2).any(|w| w[1] <= w[0]) {
        return input("need at least two increasing truncations");
    }
    let mut lowest = Vec::new();
    let mut spectra = Vec::new();
    for &t in truncations {
        let sys = EigenSystem::from_hermitian(&build(t)?)?;
        let mut ev: Vec<f64> = sys.eigenvalues().iter().map(|&x| to_f64(x)).collect();
        if ev.len() < m {
            return input(format!("truncation {t} has fewer than {m} eigenvalues"));
        }
        ev.sort_by(|a, b| a.abs().partial_cmp(&b.abs()).expect("finite").then(a.partial_cmp(b).expect("finite")));
        let mut low: Vec<f64> = ev[..m].to_vec();
        low.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        lowest.push(low);
        spectra.push(ev);
    }
    let level = lowest[0].iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    let counting = spectra
        .iter()
        .map(|ev| ev.iter().filter(|x| x.abs() <= level + 1e-9).count())
        .collect();
    let k = lowest.len();
    let last_differences: Vec<f64> =
        lowest[k - 1].iter().zip(&lowest[k - 2]).map(|(a, b)| (a - b).abs()).collect();
    let unstable: Vec<usize> =
        last_differences.iter().enumerate().filter(|(_, &d)| !(d < tol)).map(|(j, _)| j).collect();
    Ok(DiscretenessReport {
        truncations: truncations.to_vec(),
        lowest,
        last_differences,
        counting,
        stabilized: unstable.is_empty(),
        unstable,
    })
}

/// `−iσ₁∂ₓ + σ₃φ(X)` on `L²(ℝ, ℂ²)` in Hermite functions, written in the
/// eigenbasis of `σ₂` (which anticommutes with the operator).
///
/// The `σ₂ = +1` component keeps `M` Hermite functions and the `σ₂ = −1`
/// component `M − 1`, so the truncation carries the same chiral index as the
/// line operator and no spurious zero mode appears at the truncation edge.
/// `φ(X)` is applied through the eigendecomposition of the truncated position
/// operator, so linear `φ` is exact.
pub fn hermite_dirac<T: Real>(m: usize, phi: impl Fn(T) -> T) -> Result<CMat<T>> {
    if m < 2 {
        return input("need at least two Hermite functions");
    }
    let s = T::one() / lit::<T>(2.0).sqrt();
    let mut x = nalgebra::DMatrix::<T>::zeros(m, m);
    let mut d = nalgebra::DMatrix::<T>::zeros(m, m);
    for n in 1..m {
        let a = from_usize::<T>(n).sqrt() * s;
        x[(n - 1, n)] = a;
        x[(n, n - 1)] = a;
        // ∂ = (a − a†)/√2
        d[(n - 1, n)] = a;
        d[(n, n - 1)] = -a;
    }
    let xs = EigenSystem::from_real_symmetric(&x)?;
    let phix = crate::spectral::borel_matrix(&xs, phi)?;
    let i = C::new(T::zero(), T::one());
    let dd = crate::scalar::complexify(&d) * -i;
    let mut h = CMat::<T>::zeros(2 * m, 2 * m);
    h.view_mut((0, 0), (m, m)).copy_from(&phix);
    h.view_mut((m, m), (m, m)).copy_from(&(-&phix));
    h.view_mut((0, m), (m, m)).copy_from(&dd);
    h.view_mut((m, 0), (m, m)).copy_from(&dd);
    // Columns: σ₂ eigenvectors (1, ±i)/√2 tensored with the Hermite basis.
    let mut u = CMat::<T>::zeros(2 * m, 2 * m);
    for k in 0..m {
        u[(k, k)] = cr(s);
        u[(m + k, k)] = i * s;
        u[(k, m + k)] = cr(s);
        u[(m + k, m + k)] = -i * s;
    }
    let full = u.adjoint() * h * u;
    Ok(full.remove_row(2 * m - 1).remove_column(2 * m - 1))
}

/// `‖χy‖_{H^{1/2}} ≤ C′‖χ‖_∞^{1/2}(‖χ‖_∞ + ‖χ′‖_∞)^{1/2}‖y‖_{H^{1/2}}` on the circle.
#[derive(Clone, Debug, Serialize)]
pub struct MultiplierReport {
    pub n_modes: usize,
    pub sup_chi: f64,
    pub sup_dchi: f64,
    /// Exact operator norm of `y ↦ χy` on truncated `H^{1/2}`.
    pub operator_norm: f64,
    /// Largest ratio over the samples.
    pub sampled_ratio: f64,
    /// Smallest admissible `C′` (from the operator norm).
    pub c_prime: f64,
}

/// `χ` given as a function of `θ`; `H^{1/2}` weights are `(|k + s| + 1)^{1/2}`.
pub fn multiplier_halfnorm_check<T: Real>(
    n_modes: usize,
    shift: T,
    chi: impl Fn(f64) -> f64,
    samples: &[nalgebra::DVector<C<T>>],
) -> Result<MultiplierReport> {
    let dim = 2 * n_modes + 1;
    let fine = (16 * dim).max(512);
    let vals: Vec<f64> = (0..fine)
        .map(|j| chi(2.0 * std::f64::consts::PI * j as f64 / fine as f64))
        .collect();
    let coef = |k: isize| -> C<f64> {
        let mut acc = C::new(0.0, 0.0);
        for (j, &v) in vals.iter().enumerate() {
            let th = 2.0 * std::f64::consts::PI * j as f64 / fine as f64;
            acc += C::new(v * (k as f64 * th).cos(), -v * (k as f64 * th).sin());
        }
        acc / fine as f64
    };
    let maxk = 2 * n_modes as isize;
    let chat: Vec<C<f64>> = (-maxk..=maxk).map(coef).collect();
    let sup_chi = vals.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    // Spectral derivative of the sampled χ on the fine grid.
    let half = fine as isize / 2;
    let all: Vec<C<f64>> = (-half + 1..half).map(coef).collect();
    let sup_dchi = (0..fine)
        .map(|j| {
            let th = 2.0 * std::f64::consts::PI * j as f64 / fine as f64;
            let mut acc = C::new(0.0, 0.0);
            for (i, c) in all.iter().enumerate() {
                let k = (i as isize - half + 1) as f64;
                acc += c * C::new(0.0, k) * C::new((k * th).cos(), (k * th).sin());
            }
            acc.re.abs()
        })
        .fold(0.0f64, f64::max);
    let w: Vec<T> = (0..dim)
        .map(|i| (from_usize::<T>(i) - from_usize::<T>(n_modes) + shift).abs() + T::one())
        .map(|a| a.sqrt())
        .collect();
    let mut weighted = CMat::<T>::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            let c = chat[(i as isize - j as isize + maxk) as usize];
            weighted[(i, j)] = C::<T>::new(lit(c.re), lit(c.im)) * cr(w[i] / w[j]);
        }
    }
    let operator_norm = to_f64(op_norm(&weighted));
    let mut sampled = 0.0f64;
    for y in samples {
        check_dim(dim, y.len())?;
        let wy = nalgebra::DVector::<C<T>>::from_fn(dim, |j, _| y[j] * cr(w[j]));
        let den = to_f64(wy.norm());
        if den > 0.0 {
            let out = &weighted * &wy;
            sampled = sampled.max(to_f64(out.norm()) / den);
        }
    }
    let bound = (sup_chi * (sup_chi + sup_dchi)).sqrt();
    Ok(MultiplierReport {
        n_modes,
        sup_chi,
        sup_dchi,
        operator_norm,
        sampled_ratio: sampled,
        c_prime: if bound > 0.0 { operator_norm / bound } else { 0.0 },
    })
}

/// Reads `x,value[,value...]` rows (header required).
pub fn read_potential_csv<R: Read>(r: R) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let mut rd = csv::Reader::from_reader(r);
    let mut xs = Vec::new();
    let mut vals = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| Error::Io(e.to_string()))?;
        if rec.len() < 2 {
            return input("potential csv needs x and at least one value column");
        }
        let parsed: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Input(e.to_string())))
            .collect::<Result<_>>()?;
        xs.push(parsed[0]);
        vals.push(parsed[1..].to_vec());
    }
    Ok((xs, vals))
}

/// Circle Dirac spec with the zero convention applied.
pub fn circle_dirac_with_side<T: Real>(spec: &CircleDiracSpec<T>, side: ZeroSide) -> Result<EigenSystem<T>> {
    Ok(spec.build()?.with_zero_side(side))
}

// ---------------------------------------------------------------------------
// Closed-form expressions.

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn lex(s: &str) -> Result<Vec<Tok>> {
    let mut out = Vec::new();
    let chars: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let st = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let save = i;
                i += 1;
                if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                    i += 1;
                }
                if i < chars.len() && chars[i].is_ascii_digit() {
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                } else {
                    i = save;
                }
            }
            let t: String = chars[st..i].iter().collect();
            out.push(Tok::Num(t.parse().map_err(|_| Error::Input(format!("bad number {t}")))?));
        } else if c.is_alphabetic() || c == '_' {
            let st = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[st..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else if c == '−' {
            out.push(Tok::Op('-'));
            i += 1;
        } else {
            return input(format!("unexpected character '{c}'"));
        }
    }
    Ok(out)
}

/// Parsed arithmetic expression in one variable (`x` or `theta`).
#[derive(Clone, Debug)]
pub enum Expr {
    Num(f64),
    Var,
    Neg(Box<Expr>),
    Bin(char, Box<Expr>, Box<Expr>),
    Call(String, Box<Expr>),
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

const FUNCS: [&str; 11] = ["sin", "cos", "tan", "tanh", "sech", "exp", "sqrt", "abs", "cosh", "sinh", "ln"];

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Bin('+', Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Bin('-', Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Bin('*', Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Expr::Bin('/', Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat('^') {
            // Right associative; exponent may carry a sign.
            return Ok(Expr::Bin('^', Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.toks.get(self.pos).cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                match name.as_str() {
                    "x" | "theta" | "θ" => Ok(Expr::Var),
                    "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                    "e" => Ok(Expr::Num(std::f64::consts::E)),
                    f if FUNCS.contains(&f) => {
                        if !self.eat('(') {
                            return input(format!("expected '(' after {f}"));
                        }
                        let arg = self.expr()?;
                        if !self.eat(')') {
                            return input("missing ')'");
                        }
                        Ok(Expr::Call(f.to_string(), Box::new(arg)))
                    }
                    other => input(format!("unknown identifier '{other}'")),
                }
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return input("missing ')'");
                }
                Ok(e)
            }
            other => input(format!("unexpected token {other:?}")),
        }
    }
}

impl Expr {
    pub fn parse(s: &str) -> Result<Self> {
        let mut p = Parser { toks: lex(s)?, pos: 0 };
        if p.toks.is_empty() {
            return input("empty expression");
        }
        let e = p.expr()?;
        if p.pos != p.toks.len() {
            return input(format!("trailing input in '{s}'"));
        }
        Ok(e)
    }

    pub fn eval(&self, v: f64) -> f64 {
        match self {
            Expr::Num(c) => *c,
            Expr::Var => v,
            Expr::Neg(a) => -a.eval(v),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(v), b.eval(v));
                match op {
                    '+' => a + b,
                    '-' => a - b,
                    '*' => a * b,
                    '/' => a / b,
                    _ => a.powf(b),
                }
            }
            Expr::Call(f, a) => {
                let a = a.eval(v);
                match f.as_str() {
                    "sin" => a.sin(),
                    "cos" => a.cos(),
                    "tan" => a.tan(),
                    "tanh" => a.tanh(),
                    "sech" => 1.0 / a.cosh(),
                    "exp" => a.exp(),
                    "sqrt" => a.sqrt(),
                    "abs" => a.abs(),
                    "cosh" => a.cosh(),
                    "sinh" => a.sinh(),
                    _ => a.ln(),
                }
            }
        }
    }
}
