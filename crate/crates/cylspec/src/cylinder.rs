//! The model half-cylinder `[0, T] × ∂M` with boundary operator `A`.
//!
//! Sections are sampled on a uniform time grid and stored as eigencoefficients
//! of `A` (row `i` holds `u(t_i)`). Time derivatives use centred differences
//! with second order one-sided stencils at the ends; integrals use the
//! trapezoid rule.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::bc::{relative_distance, BoundaryCondition};
use crate::czech::czech_weights;
use crate::error::{check_dim, input, Error, Result};
use crate::scalar::{cr, czero, from_usize, lit, max_abs, op_norm, to_f64, CMat, CVec, Real, C};
use crate::spectral::EigenSystem;

/// Uniform time grid on `[0, T]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylinderGrid<T> {
    /// Cylinder length `T`.
    pub length: T,
    /// Number of samples, including both ends.
    pub nt: usize,
}

impl<T: Real> CylinderGrid<T> {
    pub fn new(length: T, nt: usize) -> Result<Self> {
        if nt < 8 {
            return input("need at least 8 time samples");
        }
        if !(length > T::zero()) || !length.is_finite() {
            return input("cylinder length must be positive");
        }
        Ok(Self { length, nt })
    }

    /// Step `h = T / (nt − 1)`.
    pub fn h(&self) -> T {
        self.length / from_usize::<T>(self.nt - 1)
    }

    pub fn time(&self, i: usize) -> T {
        self.h() * from_usize::<T>(i)
    }

    pub fn times(&self) -> Vec<T> {
        (0..self.nt).map(|i| self.time(i)).collect()
    }

    /// Trapezoid weights.
    pub fn weights(&self) -> Vec<T> {
        let h = self.h();
        (0..self.nt)
            .map(|i| if i == 0 || i + 1 == self.nt { h * lit::<T>(0.5) } else { h })
            .collect()
    }

    /// Same length, twice as many intervals.
    pub fn refined(&self) -> Self {
        Self { length: self.length, nt: 2 * self.nt - 1 }
    }

    /// Dense first-derivative matrix (centred, one-sided at the ends).
    pub fn derivative_matrix(&self) -> nalgebra::DMatrix<T> {
        let n = self.nt;
        let h2 = self.h() * lit::<T>(2.0);
        let mut d = nalgebra::DMatrix::<T>::zeros(n, n);
        d[(0, 0)] = lit::<T>(-3.0) / h2;
        d[(0, 1)] = lit::<T>(4.0) / h2;
        d[(0, 2)] = lit::<T>(-1.0) / h2;
        for i in 1..n - 1 {
            d[(i, i - 1)] = -T::one() / h2;
            d[(i, i + 1)] = T::one() / h2;
        }
        d[(n - 1, n - 1)] = lit::<T>(3.0) / h2;
        d[(n - 1, n - 2)] = lit::<T>(-4.0) / h2;
        d[(n - 1, n - 3)] = T::one() / h2;
        d
    }
}

/// Samples of `u(t, ·)` in eigencoefficients, one row per time.
#[derive(Clone, Debug, PartialEq)]
pub struct CylinderSection<T: Real> {
    pub values: CMat<T>,
    pub grid: CylinderGrid<T>,
}

impl<T: Real> CylinderSection<T> {
    pub fn new(grid: CylinderGrid<T>, values: CMat<T>) -> Result<Self> {
        check_dim(grid.nt, values.nrows())?;
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Domain("non-finite section value".into()));
        }
        Ok(Self { values, grid })
    }

    pub fn zeros(grid: CylinderGrid<T>, dim: usize) -> Self {
        Self { values: CMat::<T>::zeros(grid.nt, dim), grid }
    }

    /// Section with `u(t_i)_j = f(t_i, j)`.
    pub fn from_fn(grid: CylinderGrid<T>, dim: usize, f: impl Fn(T, usize) -> C<T>) -> Self {
        let values = CMat::<T>::from_fn(grid.nt, dim, |i, j| f(grid.time(i), j));
        Self { values, grid }
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    /// `u(0)`.
    pub fn trace(&self) -> CVec<T> {
        self.values.row(0).transpose()
    }

    /// Trapezoid `L²` inner product `⟨u, v⟩`.
    pub fn inner(&self, other: &Self) -> Result<C<T>> {
        check_dim(self.grid.nt, other.grid.nt)?;
        check_dim(self.dim(), other.dim())?;
        let w = self.grid.weights();
        let mut acc = czero::<T>();
        for (i, &wi) in w.iter().enumerate() {
            let mut row = czero::<T>();
            for j in 0..self.dim() {
                row += self.values[(i, j)] * other.values[(i, j)].conj();
            }
            acc += row * cr(wi);
        }
        Ok(acc)
    }

    pub fn norm_sq(&self) -> T {
        let w = self.grid.weights();
        let mut acc = T::zero();
        for (i, &wi) in w.iter().enumerate() {
            let mut row = T::zero();
            for j in 0..self.dim() {
                row += self.values[(i, j)].norm_sqr();
            }
            acc += wi * row;
        }
        acc
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    /// Whether the last `k` samples vanish (relative to the largest entry).
    pub fn vanishes_at_end(&self, k: usize) -> bool {
        let scale = max_abs(&self.values);
        let nt = self.grid.nt;
        (nt - k..nt).all(|i| {
            (0..self.dim()).all(|j| self.values[(i, j)].norm_sqr().sqrt() <= lit::<T>(1e-14) * scale)
        })
    }

    /// Vanishes at all samples with `t > t_max`.
    pub fn supported_in(&self, t_max: T) -> bool {
        let scale = max_abs(&self.values);
        (0..self.grid.nt).filter(|&i| self.grid.time(i) > t_max).all(|i| {
            (0..self.dim()).all(|j| self.values[(i, j)].norm_sqr().sqrt() <= lit::<T>(1e-14) * scale)
        })
    }

    /// Centred time derivative.
    pub fn ddt(&self) -> Self {
        let nt = self.grid.nt;
        let h2 = self.grid.h() * lit::<T>(2.0);
        let v = &self.values;
        let n = self.dim();
        let mut d = CMat::<T>::zeros(nt, n);
        let c = |x: f64| cr(lit::<T>(x) / h2);
        for j in 0..n {
            d[(0, j)] = v[(0, j)] * c(-3.0) + v[(1, j)] * c(4.0) + v[(2, j)] * c(-1.0);
            for i in 1..nt - 1 {
                d[(i, j)] = (v[(i + 1, j)] - v[(i - 1, j)]) * c(1.0);
            }
            d[(nt - 1, j)] =
                v[(nt - 1, j)] * c(3.0) + v[(nt - 2, j)] * c(-4.0) + v[(nt - 3, j)] * c(1.0);
        }
        Self { values: d, grid: self.grid }
    }

    /// Multiplies every row by the eigenvalues (`u ↦ Au`).
    pub fn times_eigenvalues(&self, lambda: &[T]) -> Self {
        let mut out = self.values.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            col *= cr(lambda[j]);
        }
        Self { values: out, grid: self.grid }
    }

    /// `u(t_i) ↦ M_i u(t_i)`.
    pub fn apply_rows(&self, m: impl Fn(usize) -> CMat<T>) -> Self {
        let mut out = CMat::<T>::zeros(self.grid.nt, self.dim());
        for i in 0..self.grid.nt {
            let r = m(i) * self.values.row(i).transpose();
            out.set_row(i, &r.transpose());
        }
        Self { values: out, grid: self.grid }
    }

    /// CSV with columns `t_index,eigen_index,re,im`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t_index", "eigen_index", "re", "im"]).map_err(io_err)?;
        for i in 0..self.grid.nt {
            for j in 0..self.dim() {
                let z = self.values[(i, j)];
                wr.write_record(&[
                    i.to_string(),
                    j.to_string(),
                    format!("{:e}", to_f64(z.re)),
                    format!("{:e}", to_f64(z.im)),
                ])
                .map_err(io_err)?;
            }
        }
        wr.flush().map_err(|e| Error::Io(e.to_string()))
    }

    /// Reads the CSV layout of [`Self::write_csv`].
    pub fn read_csv<R: Read>(grid: CylinderGrid<T>, dim: usize, r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let mut values = CMat::<T>::zeros(grid.nt, dim);
        let mut seen = vec![false; grid.nt * dim];
        for rec in rd.records() {
            let rec = rec.map_err(io_err)?;
            if rec.len() != 4 {
                return input("expected 4 columns");
            }
            let parse_u = |s: &str| s.trim().parse::<usize>().map_err(|e| Error::Input(e.to_string()));
            let parse_f = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Input(e.to_string()));
            let (i, j) = (parse_u(&rec[0])?, parse_u(&rec[1])?);
            if i >= grid.nt || j >= dim {
                return input(format!("index ({i}, {j}) out of range"));
            }
            values[(i, j)] = C::new(lit(parse_f(&rec[2])?), lit(parse_f(&rec[3])?));
            seen[i * dim + j] = true;
        }
        if seen.iter().any(|s| !s) {
            return input("csv does not cover every (t, eigen) pair");
        }
        Self::new(grid, values)
    }

    /// Columnar little-endian binary: magic, `nt`, `dim` as `u64`, then all real
    /// parts column by column, then all imaginary parts.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let mut buf = Vec::with_capacity(24 + 16 * self.values.len());
        buf.extend_from_slice(b"CYLSEC01");
        buf.extend_from_slice(&(self.grid.nt as u64).to_le_bytes());
        buf.extend_from_slice(&(self.dim() as u64).to_le_bytes());
        for z in self.values.iter() {
            buf.extend_from_slice(&to_f64(z.re).to_le_bytes());
        }
        for z in self.values.iter() {
            buf.extend_from_slice(&to_f64(z.im).to_le_bytes());
        }
        w.write_all(&buf).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn read_binary<R: Read>(grid: CylinderGrid<T>, mut r: R) -> Result<Self> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf).map_err(|e| Error::Io(e.to_string()))?;
        if buf.len() < 24 || &buf[..8] != b"CYLSEC01" {
            return input("not a section file");
        }
        let word = |k: usize| u64::from_le_bytes(buf[k..k + 8].try_into().expect("8 bytes")) as usize;
        let (nt, dim) = (word(8), word(16));
        check_dim(grid.nt, nt)?;
        let count = nt * dim;
        if buf.len() != 24 + 16 * count {
            return input("truncated section file");
        }
        let f = |k: usize| f64::from_le_bytes(buf[24 + 8 * k..32 + 8 * k].try_into().expect("8 bytes"));
        let values = CMat::<T>::from_iterator(
            nt,
            dim,
            (0..count).map(|k| C::new(lit(f(k)), lit(f(count + k)))),
        );
        Self::new(grid, values)
    }
}

fn io_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Data of `D = σ_t(∂_t + A + R_t)`, stored in eigencoordinates of `A`.
#[derive(Clone, Debug)]
pub struct CylinderOperator<T: Real> {
    pub grid: CylinderGrid<T>,
    pub sys: EigenSystem<T>,
    sigma0: CMat<T>,
    sigma_t: Vec<CMat<T>>,
    r_t: Vec<CMat<T>>,
}

impl<T: Real> CylinderOperator<T> {
    /// Model operator `D₀ = σ₀(∂_t + A)`; `sigma0` in ambient coordinates.
    pub fn model(sys: EigenSystem<T>, grid: CylinderGrid<T>, sigma0: &CMat<T>) -> Result<Self> {
        check_dim(sys.dim(), sigma0.nrows())?;
        check_dim(sys.dim(), sigma0.ncols())?;
        if crate::bc::condition_number(sigma0) > 1e12 {
            return input("sigma0 is singular");
        }
        let s = sys.coeff_matrix(sigma0);
        let n = sys.dim();
        Ok(Self {
            grid,
            sigma_t: vec![s.clone(); grid.nt],
            sigma0: s,
            r_t: vec![CMat::<T>::zeros(n, n); grid.nt],
            sys,
        })
    }

    /// Replaces `R_t` by `f(t)` (ambient coordinates).
    pub fn with_remainder(mut self, f: impl Fn(T) -> CMat<T>) -> Result<Self> {
        let n = self.sys.dim();
        let mut r = Vec::with_capacity(self.grid.nt);
        for i in 0..self.grid.nt {
            let m = f(self.grid.time(i));
            check_dim(n, m.nrows())?;
            check_dim(n, m.ncols())?;
            r.push(self.sys.coeff_matrix(&m));
        }
        self.r_t = r;
        Ok(self)
    }

    /// Replaces `σ_t` by `f(t)` (ambient coordinates); `σ_0` is kept as `f(0)`.
    pub fn with_sigma_t(mut self, f: impl Fn(T) -> CMat<T>) -> Result<Self> {
        let n = self.sys.dim();
        let mut s = Vec::with_capacity(self.grid.nt);
        for i in 0..self.grid.nt {
            let m = f(self.grid.time(i));
            check_dim(n, m.nrows())?;
            if crate::bc::condition_number(&m) > 1e12 {
                return input(format!("sigma_t singular at sample {i}"));
            }
            s.push(self.sys.coeff_matrix(&m));
        }
        self.sigma0 = s[0].clone();
        self.sigma_t = s;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.sys.dim()
    }

    /// `σ₀` in eigencoordinates.
    pub fn sigma0_coeff(&self) -> &CMat<T> {
        &self.sigma0
    }

    /// `σ₀` in ambient coordinates.
    pub fn sigma0_ambient(&self) -> CMat<T> {
        self.sys.ambient_matrix(&self.sigma0)
    }

    pub fn sigma_at(&self, i: usize) -> &CMat<T> {
        &self.sigma_t[i]
    }

    pub fn remainder_at(&self, i: usize) -> &CMat<T> {
        &self.r_t[i]
    }

    /// `C` with `C⁻¹ ≤ ‖σ_t‖, ‖σ_t⁻¹‖ ≤ C` over the grid.
    pub fn sigma_bound(&self) -> T {
        let mut c = T::one();
        for s in &self.sigma_t {
            let sv = s.clone().svd(false, false).singular_values;
            let smax = sv.iter().fold(T::zero(), |a, &x| a.max(x));
            let smin = sv.iter().fold(smax, |a, &x| a.min(x));
            c = c.max(smax).max(T::one() / smin).max(T::one() / smax).max(smin);
        }
        c
    }

    /// True when `‖σ_t u‖ = ‖u‖` and `R_t` is diagonal in the eigenbasis, so the
    /// graph norm splits over eigenmodes.
    pub fn is_mode_decoupled(&self) -> bool {
        let n = self.dim();
        let id = CMat::<T>::identity(n, n);
        let tol = T::exact_tol();
        self.sigma_t.iter().all(|s| max_abs(&(s.adjoint() * s - &id)) <= tol)
            && self.r_t.iter().all(|r| {
                let mut off = r.clone();
                off.fill_diagonal(czero());
                max_abs(&off) <= tol * max_abs(r).max(T::one())
            })
    }

    fn check_section(&self, u: &CylinderSection<T>) -> Result<()> {
        check_dim(self.grid.nt, u.grid.nt)?;
        check_dim(self.dim(), u.dim())?;
        if (u.grid.length - self.grid.length).abs() > T::exact_tol() * self.grid.length {
            return input("section lives on a different grid");
        }
        Ok(())
    }

    /// `D₀u = σ₀(∂_t u + Au)`.
    pub fn apply_model(&self, u: &CylinderSection<T>) -> Result<CylinderSection<T>> {
        self.check_section(u)?;
        let lam = self.sys.eigenvalues();
        let mut inner = u.ddt();
        inner.values += u.times_eigenvalues(lam).values;
        Ok(inner.apply_rows(|_| self.sigma0.clone()))
    }

    /// `Du = σ_t(∂_t u + Au + R_t u)`.
    pub fn apply_full(&self, u: &CylinderSection<T>) -> Result<CylinderSection<T>> {
        self.check_section(u)?;
        let lam = self.sys.eigenvalues();
        let mut inner = u.ddt();
        inner.values += u.times_eigenvalues(lam).values;
        inner.values += u.apply_rows(|i| self.r_t[i].clone()).values;
        Ok(inner.apply_rows(|i| self.sigma_t[i].clone()))
    }

    /// Formal adjoint `D†v = −∂_t(σ_tᴴv) + (A + R_tᴴ)(σ_tᴴv)`.
    pub fn apply_adjoint(&self, v: &CylinderSection<T>) -> Result<CylinderSection<T>> {
        self.check_section(v)?;
        let w = v.apply_rows(|i| self.sigma_t[i].adjoint());
        let lam = self.sys.eigenvalues();
        let mut out = w.ddt();
        out.values *= cr(-T::one());
        out.values += w.times_eigenvalues(lam).values;
        out.values += w.apply_rows(|i| self.r_t[i].adjoint()).values;
        Ok(out)
    }

    /// `(‖u‖² + ‖Du‖²)^{1/2}`.
    pub fn graph_norm(&self, u: &CylinderSection<T>) -> Result<T> {
        Ok((u.norm_sq() + self.apply_full(u)?.norm_sq()).sqrt())
    }

    /// `(‖u‖² + ‖D₀u‖²)^{1/2}`.
    pub fn graph_norm_model(&self, u: &CylinderSection<T>) -> Result<T> {
        Ok((u.norm_sq() + self.apply_model(u)?.norm_sq()).sqrt())
    }
}

/// Cutoff `η_ρ` with `η = 1` on `[0, ρ/2]` and `η = 0` on `[3ρ/4, T]`.
#[derive(Clone, Debug)]
pub struct CutoffProfile<T> {
    pub rho: T,
    pub samples: Vec<T>,
}

fn smoothstep<T: Real>(x: T) -> T {
    let x = x.max(T::zero()).min(T::one());
    x * x * x * (x * (x * lit::<T>(6.0) - lit::<T>(15.0)) + lit::<T>(10.0))
}

impl<T: Real> CutoffProfile<T> {
    /// Quintic smoothstep transition on `[ρ/2, 3ρ/4]`.
    pub fn new(grid: &CylinderGrid<T>, rho: T) -> Result<Self> {
        if !(rho > T::zero()) || rho > grid.length {
            return input("need 0 < rho <= T");
        }
        let a = rho * lit::<T>(0.5);
        let w = rho * lit::<T>(0.25);
        let samples = grid.times().iter().map(|&t| T::one() - smoothstep((t - a) / w)).collect();
        Ok(Self { rho, samples })
    }

    /// Validated profile from explicit samples.
    pub fn from_samples(grid: &CylinderGrid<T>, rho: T, samples: Vec<T>) -> Result<Self> {
        let p = Self::from_samples_unchecked(rho, samples);
        p.validate(grid)?;
        Ok(p)
    }

    /// Profile from explicit samples without checking the plateau or support.
    pub fn from_samples_unchecked(rho: T, samples: Vec<T>) -> Self {
        Self { rho, samples }
    }

    /// Checks plateau, support and range on the grid.
    pub fn validate(&self, grid: &CylinderGrid<T>) -> Result<()> {
        check_dim(grid.nt, self.samples.len())?;
        if !(self.rho > T::zero()) || self.rho > grid.length {
            return input("need 0 < rho <= T");
        }
        let tol = T::exact_tol();
        for (i, &e) in self.samples.iter().enumerate() {
            let t = grid.time(i);
            if e < -tol || e > T::one() + tol || !e.is_finite() {
                return input(format!("eta({t}) = {e} outside [0, 1]"));
            }
            if t <= self.rho * lit::<T>(0.5) && (e - T::one()).abs() > tol {
                return input(format!("plateau broken: eta({t}) = {e}"));
            }
            if t >= self.rho * lit::<T>(0.75) && e.abs() > tol {
                return input(format!("support broken: eta({t}) = {e}"));
            }
        }
        Ok(())
    }
}

/// `(E_ρ u₀)(t) = η_ρ(t) e^{−t|A|_ε} u₀`, with `u₀` in eigencoefficients.
pub fn extension<T: Real>(
    op: &CylinderOperator<T>,
    eta: &CutoffProfile<T>,
    epsilon: T,
    u0: &CVec<T>,
) -> Result<CylinderSection<T>> {
    check_dim(op.dim(), u0.len())?;
    check_dim(op.grid.nt, eta.samples.len())?;
    if !(epsilon > T::zero()) {
        return input("epsilon must be positive");
    }
    if eta.rho > op.grid.length {
        return input("rho exceeds cylinder length");
    }
    let lam = op.sys.eigenvalues();
    Ok(CylinderSection::from_fn(op.grid, op.dim(), |t, j| {
        let i = ((t / op.grid.h()).round()).to_usize().unwrap_or(0);
        u0[j] * cr(eta.samples[i] * (-(t * (lam[j].abs() + epsilon))).exp())
    }))
}

/// `|⟨Du, v⟩ − ⟨u, D†v⟩ + ⟨σ₀u(0), v(0)⟩|`.
pub fn greens_residual<T: Real>(
    op: &CylinderOperator<T>,
    u: &CylinderSection<T>,
    v: &CylinderSection<T>,
) -> Result<T> {
    if !u.vanishes_at_end(2) || !v.vanishes_at_end(2) {
        return input("sections must vanish at the last two samples");
    }
    let du = op.apply_full(u)?;
    let dv = op.apply_adjoint(v)?;
    let boundary = v.trace().dotc(&(op.sigma0_coeff() * u.trace()));
    Ok((du.inner(v)? - u.inner(&dv)? + boundary).norm_sqr().sqrt())
}

/// Terms of the energy identity `‖(∂_t + A)u‖² = ‖∂_t u‖² + ‖Au‖² − ⟨Au(0), u(0)⟩`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EnergyTerms {
    pub lhs: f64,
    pub dt_sq: f64,
    pub a_sq: f64,
    pub boundary: f64,
    pub residual: f64,
}

/// Discrete energy identity for `σ₀⁻¹D₀ = ∂_t + A`.
pub fn energy_identity<T: Real>(op: &CylinderOperator<T>, u: &CylinderSection<T>) -> Result<EnergyTerms> {
    op.check_section(u)?;
    if !u.vanishes_at_end(1) {
        return input("section must vanish at t = T");
    }
    let lam = op.sys.eigenvalues();
    let du = u.ddt();
    let au = u.times_eigenvalues(lam);
    let mut sum = du.clone();
    sum.values += &au.values;
    let lhs = sum.norm_sq();
    let dt_sq = du.norm_sq();
    let a_sq = au.norm_sq();
    let u0 = u.trace();
    let boundary = (0..u0.len()).fold(T::zero(), |acc, j| acc + lam[j] * u0[j].norm_sqr());
    let residual = (lhs - dt_sq - a_sq + boundary).abs();
    Ok(EnergyTerms {
        lhs: to_f64(lhs),
        dt_sq: to_f64(dt_sq),
        a_sq: to_f64(a_sq),
        boundary: to_f64(boundary),
        residual: to_f64(residual),
    })
}

/// Residual of the energy identity.
pub fn energy_identity_residual<T: Real>(op: &CylinderOperator<T>, u: &CylinderSection<T>) -> Result<T> {
    Ok(lit(energy_identity(op, u)?.residual))
}

/// `sup_{u₀} ‖E_ρu₀‖_D / ‖u₀‖_Ȟ`, computed exactly from the Gram matrix.
pub fn extension_constant<T: Real>(
    op: &CylinderOperator<T>,
    eta: &CutoffProfile<T>,
    epsilon: T,
) -> Result<T> {
    let n = op.dim();
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let mut e = CVec::<T>::zeros(n);
        e[j] = cr(T::one());
        let s = extension(op, eta, epsilon, &e)?;
        let d = op.apply_full(&s)?;
        cols.push((s, d));
    }
    let w = czech_weights(&op.sys, epsilon)?;
    let mut g = CMat::<T>::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let v = cols[a].0.inner(&cols[b].0)? + cols[a].1.inner(&cols[b].1)?;
            let v = v * cr(T::one() / (w[a] * w[b]));
            g[(b, a)] = v;
            g[(a, b)] = v.conj();
        }
    }
    let eig = nalgebra::SymmetricEigen::new(g);
    Ok(eig.eigenvalues.iter().fold(T::zero(), |a, &x| a.max(x)).max(T::zero()).sqrt())
}

/// `max ‖E_ρu₀‖_D / ‖u₀‖_Ȟ` over sample boundary data.
pub fn extension_constant_sampled<T: Real>(
    op: &CylinderOperator<T>,
    eta: &CutoffProfile<T>,
    epsilon: T,
    samples: &[CVec<T>],
) -> Result<T> {
    let w = czech_weights(&op.sys, epsilon)?;
    let mut best = T::zero();
    for u0 in samples {
        let den = crate::spectral::weighted_norm(&w, u0);
        if den == T::zero() {
            continue;
        }
        let s = extension(op, eta, epsilon, u0)?;
        best = best.max(op.graph_norm(&s)? / den);
    }
    Ok(best)
}

/// `max ‖u(0)‖_Ȟ / ‖u‖_D` over sample sections.
pub fn trace_constant<T: Real>(
    op: &CylinderOperator<T>,
    epsilon: T,
    samples: &[CylinderSection<T>],
) -> Result<T> {
    let w = czech_weights(&op.sys, epsilon)?;
    let mut best = T::zero();
    for u in samples {
        if !u.vanishes_at_end(2) {
            return input("trace samples must vanish at the last two samples");
        }
        let num = crate::spectral::weighted_norm(&w, &u.trace());
        if num == T::zero() {
            continue;
        }
        best = best.max(num / op.graph_norm(u)?);
    }
    Ok(best)
}

/// Number of leading samples that may be nonzero for support in `[0, t_c)`.
fn free_rows<T: Real>(grid: &CylinderGrid<T>, t_c: T) -> usize {
    let m = (0..grid.nt).filter(|&i| grid.time(i) < t_c).count();
    m.min(grid.nt - 2)
}

/// Optimal trace constant `sup ‖u(0)‖_Ȟ / ‖u‖_D` over sections supported in `[0, t_c)`.
///
/// When the operator is mode-decoupled this is a one-dimensional variational
/// problem per eigenmode; otherwise a dense solve over all modes is used.
pub fn trace_constant_exact<T: Real>(op: &CylinderOperator<T>, epsilon: T, t_c: T) -> Result<T> {
    let m = free_rows(&op.grid, t_c);
    if m < 3 {
        return input("support too short for the grid");
    }
    let w = czech_weights(&op.sys, epsilon)?;
    let wt = op.grid.weights();
    let dmat = op.grid.derivative_matrix();
    let nt = op.grid.nt;
    let lam = op.sys.eigenvalues();
    if op.is_mode_decoupled() {
        let mut best = T::zero();
        for j in 0..op.dim() {
            let l = CMat::<T>::from_fn(nt, m, |i, k| {
                let mut v = cr(dmat[(i, k)]);
                if i == k {
                    v += cr(lam[j]) + op.r_t[i][(j, j)];
                }
                v
            });
            let mut q = CMat::<T>::zeros(m, m);
            for a in 0..m {
                q[(a, a)] += cr(wt[a]);
            }
            for a in 0..m {
                for b in 0..m {
                    let mut s = czero::<T>();
                    for i in 0..nt {
                        s += l[(i, a)].conj() * l[(i, b)] * cr(wt[i]);
                    }
                    q[(a, b)] += s;
                }
            }
            let mut e0 = CVec::<T>::zeros(m);
            e0[0] = cr(T::one());
            let x = q
                .cholesky()
                .ok_or_else(|| Error::Domain("energy form not positive definite".into()))?
                .solve(&e0);
            best = best.max(w[j] * w[j] * x[0].re);
        }
        return Ok(best.sqrt());
    }
    let n = op.dim();
    let unknowns = m * n;
    if unknowns > 2000 {
        return input("coupled trace problem too large for the dense solver");
    }
    // Columns of D restricted to the free unknowns (row-major: sample, mode).
    let mut q = CMat::<T>::zeros(unknowns, unknowns);
    let mut dcols: Vec<CylinderSection<T>> = Vec::with_capacity(unknowns);
    for k in 0..unknowns {
        let mut s = CylinderSection::zeros(op.grid, n);
        s.values[(k / n, k % n)] = cr(T::one());
        dcols.push(op.apply_full(&s)?);
    }
    for a in 0..unknowns {
        q[(a, a)] += cr(wt[a / n]);
        for b in a..unknowns {
            let v = dcols[b].inner(&dcols[a])?;
            q[(a, b)] += v;
            if a != b {
                q[(b, a)] += v.conj();
            }
        }
    }
    // Trace map selects the first n unknowns: minimal energy is the inverse Schur block.
    let inv = q
        .try_inverse()
        .ok_or_else(|| Error::Domain("energy form singular".into()))?;
    let block = CMat::<T>::from_fn(n, n, |a, b| inv[(a, b)] * cr(w[a] * w[b]));
    let eig = nalgebra::SymmetricEigen::new((&block + block.adjoint()) * cr(lit::<T>(0.5)));
    Ok(eig.eigenvalues.iter().fold(T::zero(), |a, &x| a.max(x)).sqrt())
}

/// Estimates for `‖R_t u‖ ≤ C t‖Au‖ + C‖u‖` and the resulting near-boundary width.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RemainderReport {
    /// `max_t ‖R_t (t²A² + I)^{−1/2}‖`, an admissible `C`.
    pub c_upper: f64,
    /// `c_upper / √2`, below which no `C` is admissible.
    pub c_lower: f64,
    /// Bound for `σ_t` and `σ_t⁻¹`.
    pub c_sigma: f64,
    /// `2 C_σ²`
    pub c1: f64,
    /// `4 C²`
    pub c2: f64,
    /// `0.9 · min{T, 1/√(2C₂)}`
    pub t_d: f64,
    /// `T_d` is limited by the remainder rather than by the cylinder length.
    pub shrunk: bool,
}

/// Measures the remainder against the shape `C t‖Au‖ + C‖u‖`.
pub fn remainder_control<T: Real>(op: &CylinderOperator<T>) -> RemainderReport {
    let lam = op.sys.eigenvalues();
    let n = op.dim();
    let mut c = T::zero();
    for i in 0..op.grid.nt {
        let t = op.grid.time(i);
        let r = &op.r_t[i];
        let m = CMat::<T>::from_fn(n, n, |a, b| {
            r[(a, b)] * cr(T::one() / (t * t * lam[b] * lam[b] + T::one()).sqrt())
        });
        c = c.max(op_norm(&m));
    }
    let c = to_f64(c);
    let cs = to_f64(op.sigma_bound());
    let c2 = 4.0 * c * c;
    let len = to_f64(op.grid.length);
    let cap = if c2 > 0.0 { 1.0 / (2.0 * c2).sqrt() } else { f64::INFINITY };
    RemainderReport {
        c_upper: c,
        c_lower: c / 2f64.sqrt(),
        c_sigma: cs,
        c1: 2.0 * cs * cs,
        c2,
        t_d: 0.9 * len.min(cap),
        shrunk: cap < len,
    }
}

/// Near-boundary a-priori estimate `‖u‖ + ‖∂_tu‖ + ‖Au‖ ≤ C‖u‖_{dom(D_B)}`.
#[derive(Clone, Debug, Serialize)]
pub struct NearBoundaryReport {
    /// Largest ratio over the samples.
    pub sampled_constant: f64,
    /// `√3 · sup (‖u‖² + ‖∂_tu‖² + ‖Au‖²)^{1/2} / ‖u‖_D` over all admissible sections.
    pub exact_constant: Option<f64>,
    pub t_d: f64,
    pub remainder: RemainderReport,
    pub samples_used: usize,
}

/// Checks the near-boundary estimate on samples supported in `[0, T_d]` with trace in `B`.
///
/// `b` is in ambient coordinates. The exact constant is computed when the
/// admissible space has at most `exact_limit` unknowns.
pub fn near_boundary_apriori<T: Real>(
    op: &CylinderOperator<T>,
    b: &BoundaryCondition<T>,
    samples: &[CylinderSection<T>],
    exact_limit: usize,
) -> Result<NearBoundaryReport> {
    check_dim(op.dim(), b.ambient_dim())?;
    let rem = remainder_control(op);
    let t_d: T = lit(rem.t_d);
    let lam = op.sys.eigenvalues();
    let mut best = T::zero();
    for u in samples {
        op.check_section(u)?;
        let amb = op.sys.from_coeffs(&u.trace())?;
        if relative_distance(b.basis(), &amb) > T::angle_tol() {
            return input("sample trace not in B");
        }
        if !u.supported_in(t_d) || !u.vanishes_at_end(2) {
            return input("sample not supported in [0, T_d]");
        }
        let g = op.graph_norm(u)?;
        if g == T::zero() {
            continue;
        }
        let lhs = u.norm() + u.ddt().norm() + u.times_eigenvalues(lam).norm();
        best = best.max(lhs / g);
    }
    let exact_constant = near_boundary_exact(op, b, t_d, exact_limit)?.map(to_f64);
    Ok(NearBoundaryReport {
        sampled_constant: to_f64(best),
        exact_constant,
        t_d: rem.t_d,
        remainder: rem,
        samples_used: samples.len(),
    })
}

/// Basis (as sections) of sections supported in `[0, t_max]`, vanishing at the
/// last two samples, with trace in `B` (eigencoordinates `b_coeff`).
pub(crate) fn admissible_basis<T: Real>(
    grid: &CylinderGrid<T>,
    b_coeff: &CMat<T>,
    t_max: T,
    forbidden: Option<&dyn Fn(usize, usize) -> bool>,
) -> Vec<CylinderSection<T>> {
    let n = b_coeff.nrows();
    let blocked = |i: usize, j: usize| forbidden.is_some_and(|f| f(i, j));
    let mut out = Vec::new();
    // Row 0: B intersected with the unmasked coordinates.
    let masked0: Vec<usize> = (0..n).filter(|&j| blocked(0, j)).collect();
    let trace_basis = if masked0.is_empty() {
        b_coeff.clone()
    } else {
        let k = b_coeff.ncols();
        let cons = CMat::<T>::from_fn(masked0.len(), k, |a, c| b_coeff[(masked0[a], c)]);
        let null = crate::bc::complement(&cons.adjoint());
        b_coeff * null
    };
    for c in 0..trace_basis.ncols() {
        let mut s = CylinderSection::zeros(*grid, n);
        for j in 0..n {
            s.values[(0, j)] = trace_basis[(j, c)];
        }
        out.push(s);
    }
    for i in 1..grid.nt - 2 {
        if grid.time(i) > t_max {
            break;
        }
        for j in 0..n {
            if blocked(i, j) {
                continue;
            }
            let mut s = CylinderSection::zeros(*grid, n);
            s.values[(i, j)] = cr(T::one());
            out.push(s);
        }
    }
    out
}

/// Generalised Rayleigh quotient extremes `sup/inf N(u)/G(u)` on a span.
pub(crate) fn rayleigh_extremes<T: Real>(num: &CMat<T>, den: &CMat<T>) -> Option<(T, T)> {
    let l = den.clone().cholesky()?;
    let linv = l.l().try_inverse()?;
    let m = &linv * num * linv.adjoint();
    let eig = nalgebra::SymmetricEigen::new((&m + m.adjoint()) * cr(lit::<T>(0.5)));
    let hi = eig.eigenvalues.iter().fold(T::min_value().unwrap_or(-T::one()), |a, &x| a.max(x));
    let lo = eig.eigenvalues.iter().fold(T::max_value().unwrap_or(T::one()), |a, &x| a.min(x));
    Some((lo, hi))
}

/// `G_pq = Σ_k ⟨s_k[q], s_k[p]⟩` summed over the given families.
pub(crate) fn gram<T: Real>(families: &[&[CylinderSection<T>]]) -> Result<CMat<T>> {
    let k = families[0].len();
    let mut g = CMat::<T>::zeros(k, k);
    for p in 0..k {
        for q in p..k {
            let mut v = czero::<T>();
            for f in families {
                v += f[q].inner(&f[p])?;
            }
            g[(p, q)] = v;
            g[(q, p)] = v.conj();
        }
    }
    Ok(g)
}

fn near_boundary_exact<T: Real>(
    op: &CylinderOperator<T>,
    b: &BoundaryCondition<T>,
    t_d: T,
    limit: usize,
) -> Result<Option<T>> {
    let b_coeff = op.sys.eigenvectors().adjoint() * b.basis();
    let basis = admissible_basis(&op.grid, &b_coeff, t_d, None);
    if basis.is_empty() || basis.len() > limit {
        return Ok(None);
    }
    let lam = op.sys.eigenvalues();
    let d: Vec<_> = basis.iter().map(|s| op.apply_full(s)).collect::<Result<_>>()?;
    let dt: Vec<_> = basis.iter().map(|s| s.ddt()).collect();
    let au: Vec<_> = basis.iter().map(|s| s.times_eigenvalues(lam)).collect();
    let den = gram(&[&basis, &d])?;
    let num = gram(&[&basis, &dt, &au])?;
    Ok(rayleigh_extremes(&num, &den).map(|(_, hi)| (lit::<T>(3.0) * hi).sqrt()))
}

/// Singular values `1/√(1 + θ_i² + λ_j²)` of `H¹_r(A, ∂_t) ↪ L²`, descending,
/// with `θ_i²` the spectrum of the discrete Neumann form on `[0, r]`.
pub fn h1_embedding_svals<T: Real>(grid: &CylinderGrid<T>, sys: &EigenSystem<T>, r: T) -> Result<Vec<T>> {
    if !(r > T::zero()) || r > grid.length * (T::one() + T::exact_tol()) {
        return input("need 0 < r <= T");
    }
    let m = (0..grid.nt).filter(|&i| grid.time(i) <= r * (T::one() + T::exact_tol())).count();
    if m < 2 {
        return input("interval [0, r] holds fewer than two samples");
    }
    Ok(tensor_embedding_svals(&neumann_spectrum(grid.h(), m), sys.eigenvalues()))
}

/// Generalised eigenvalues `θ²` of the forward-difference Dirichlet form against
/// the trapezoid mass on `m` samples with spacing `h`.
pub fn neumann_spectrum<T: Real>(h: T, m: usize) -> Vec<T> {
    let mut k = nalgebra::DMatrix::<T>::zeros(m, m);
    for i in 0..m - 1 {
        let c = T::one() / h;
        k[(i, i)] += c;
        k[(i + 1, i + 1)] += c;
        k[(i, i + 1)] -= c;
        k[(i + 1, i)] -= c;
    }
    let w: Vec<T> = (0..m)
        .map(|i| if i == 0 || i + 1 == m { h * lit::<T>(0.5) } else { h })
        .collect();
    let s = nalgebra::DMatrix::<T>::from_fn(m, m, |a, b| k[(a, b)] / (w[a] * w[b]).sqrt());
    let eig = nalgebra::SymmetricEigen::new(s);
    let mut th: Vec<T> = eig.eigenvalues.iter().map(|&x| x.max(T::zero())).collect();
    th.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    th
}

/// `1/√(1 + θ² + λ²)` over all pairs, descending.
pub fn tensor_embedding_svals<T: Real>(theta_sq: &[T], lambda: &[T]) -> Vec<T> {
    let mut v: Vec<T> = theta_sq
        .iter()
        .flat_map(|&th| lambda.iter().map(move |&l| T::one() / (T::one() + th + l * l).sqrt()))
        .collect();
    v.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn diag_op(lam: &[f64], len: f64, nt: usize) -> CylinderOperator<f64> {
        let sys = EigenSystem::diagonal(lam).unwrap();
        let n = lam.len();
        CylinderOperator::model(sys, CylinderGrid::new(len, nt).unwrap(), &CMat::identity(n, n)).unwrap()
    }

    /// Smooth bump vanishing (with all derivatives) near `t = 1`.
    fn bump(t: f64) -> f64 {
        if t >= 0.8 {
            0.0
        } else {
            (1.0 - t / 0.8).powi(4) * (1.0 + t)
        }
    }

    fn order(errs: &[f64]) -> f64 {
        (errs[errs.len() - 2] / errs[errs.len() - 1]).log2()
    }

    #[test]
    fn grid_rejects_small() {
        assert!(CylinderGrid::new(1.0, 7).is_err());
        assert!(CylinderGrid::new(0.0, 16).is_err());
        let g = CylinderGrid::new(2.0, 9).unwrap();
        assert_relative_eq!(g.h(), 0.25);
        assert_relative_eq!(g.weights().iter().sum::<f64>(), 2.0);
    }

    #[test]
    fn model_annihilates_decaying_mode() {
        let mut errs = Vec::new();
        for nt in [64, 128, 256] {
            let op = diag_op(&[-1.0, 0.5, 2.0], 1.0, nt);
            let u = CylinderSection::from_fn(op.grid, 3, |t, j| if j == 2 { cr((-2.0 * t).exp()) } else { czero() });
            errs.push(op.apply_model(&u).unwrap().norm());
        }
        assert!((order(&errs) - 2.0).abs() < 0.2, "{errs:?}");
    }

    #[test]
    fn model_on_linear_profile() {
        let op = diag_op(&[3.0], 2.0, 33);
        let u = CylinderSection::from_fn(op.grid, 1, |t, _| cr(1.0 - t / 2.0));
        let out = op.apply_model(&u).unwrap();
        for i in 1..32 {
            let t = op.grid.time(i);
            assert!((out.values[(i, 0)].re - (-0.5 + 3.0 * (1.0 - t / 2.0))).abs() < 1e-10);
        }
    }

    #[test]
    fn kernel_constant_section_is_annihilated() {
        let op = diag_op(&[0.0, 1.0], 1.0, 16);
        let u = CylinderSection::from_fn(op.grid, 2, |_, j| if j == 0 { cr(1.0) } else { czero() });
        assert!(op.apply_model(&u).unwrap().norm() < 1e-12);
    }

    #[test]
    fn full_with_linear_remainder() {
        let (lam, c) = (1.5, 0.7);
        let mut errs = Vec::new();
        for nt in [64, 128, 256] {
            let op = diag_op(&[lam], 1.0, nt)
                .with_remainder(|t| CMat::identity(1, 1) * cr(c * t))
                .unwrap();
            let u = CylinderSection::from_fn(op.grid, 1, |t, _| cr((-lam * t - c * t * t / 2.0).exp()));
            errs.push(op.apply_full(&u).unwrap().norm());
        }
        assert!((order(&errs) - 2.0).abs() < 0.2, "{errs:?}");
    }

    #[test]
    fn full_equals_model_without_remainder() {
        let op = diag_op(&[-1.0, 2.0], 1.0, 20);
        let u = CylinderSection::from_fn(op.grid, 2, |t, j| C::new(t.sin(), j as f64 * t));
        assert_eq!(op.apply_full(&u).unwrap(), op.apply_model(&u).unwrap());
    }

    #[test]
    fn greens_formula_converges() {
        let sigma = CMat::from_row_slice(2, 2, &[C::new(0.0, 0.0), C::new(1.0, 0.0), C::new(-1.0, 0.0), C::new(0.0, 0.0)]);
        let mut errs = Vec::new();
        for nt in [64, 128, 256] {
            let sys = EigenSystem::diagonal(&[-1.0, 1.0]).unwrap();
            let op = CylinderOperator::model(sys, CylinderGrid::new(1.0, nt).unwrap(), &sigma)
                .unwrap()
                .with_remainder(|t| CMat::from_row_slice(2, 2, &[cr(t), C::new(0.0, 0.2), cr(0.3), cr(-t)]))
                .unwrap();
            let u = CylinderSection::from_fn(op.grid, 2, |t, j| C::new(bump(t), 0.3 * j as f64 * bump(t)));
            let v = CylinderSection::from_fn(op.grid, 2, |t, j| cr(bump(t) * (1.0 + t + j as f64)));
            errs.push(greens_residual(&op, &u, &v).unwrap());
        }
        assert!(errs[2] < 1e-4);
        assert!((order(&errs) - 2.0).abs() < 0.2, "{errs:?}");
    }

    #[test]
    fn greens_requires_far_end_vanishing() {
        let op = diag_op(&[1.0], 1.0, 16);
        let u = CylinderSection::from_fn(op.grid, 1, |_, _| cr(1.0));
        assert!(greens_residual(&op, &u, &u).is_err());
        let z = CylinderSection::zeros(op.grid, 1);
        assert_eq!(greens_residual(&op, &z, &z).unwrap(), 0.0);
    }

    #[test]
    fn energy_identity_linear_profile() {
        let mut errs = Vec::new();
        for nt in [64, 128, 256] {
            let op = diag_op(&[1.0], 1.0, nt);
            let u = CylinderSection::from_fn(op.grid, 1, |t, _| cr(1.0 - t));
            let e = energy_identity(&op, &u).unwrap();
            assert!((e.dt_sq - 1.0).abs() < 1e-10);
            assert!((e.a_sq - 1.0 / 3.0).abs() < 1e-3);
            assert!((e.boundary - 1.0).abs() < 1e-14);
            errs.push(e.residual);
        }
        assert!(errs[2] < 1e-4);
    }

    #[test]
    fn energy_identity_converges() {
        let mut errs = Vec::new();
        for nt in [64, 128, 256] {
            let op = diag_op(&[-2.0, 0.5, 1.0, 3.0], 1.0, nt);
            let u = CylinderSection::from_fn(op.grid, 4, |t, j| C::new(bump(t) * (j as f64 + 1.0), (3.0 * t).sin() * bump(t)));
            errs.push(energy_identity_residual(&op, &u).unwrap());
        }
        assert!((order(&errs) - 2.0).abs() < 0.2, "{errs:?}");
    }

    #[test]
    fn extension_trace_is_exact() {
        let op = diag_op(&[-1.0, 0.0, 2.0], 1.0, 32);
        let eta = CutoffProfile::new(&op.grid, 0.8).unwrap();
        let u0 = CVec::from_vec(vec![C::new(1.0, 2.0), cr(-0.5), C::new(0.0, 3.0)]);
        let e = extension(&op, &eta, 0.1, &u0).unwrap();
        assert_eq!(e.trace(), u0);
        let t = op.grid.time(5);
        assert_relative_eq!(e.values[(5, 2)].im, 3.0 * (-t * 2.1).exp(), epsilon = 1e-14);
        assert!(e.vanishes_at_end(2));
        let z = extension(&op, &eta, 0.1, &CVec::zeros(3)).unwrap();
        assert_eq!(z.norm(), 0.0);
    }

    #[test]
    fn cutoff_validation() {
        let g = CylinderGrid::new(1.0, 33).unwrap();
        assert!(CutoffProfile::new(&g, 1.5).is_err());
        let good = CutoffProfile::new(&g, 0.8).unwrap();
        assert!(good.validate(&g).is_ok());
        let mut bad = good.samples.clone();
        bad[2] = 0.9;
        assert!(CutoffProfile::from_samples(&g, 0.8, bad).is_err());
        let mut tail = good.samples.clone();
        tail[32] = 0.1;
        assert!(CutoffProfile::from_samples(&g, 0.8, tail).is_err());
    }

    #[test]
    fn extension_constant_bounds_samples() {
        let op = diag_op(&[-3.0, -1.0, 0.0, 1.0, 2.0], 1.0, 64);
        let eta = CutoffProfile::new(&op.grid, 1.0).unwrap();
        let exact = extension_constant(&op, &eta, 1.0).unwrap();
        let samples: Vec<CVec<f64>> = (0..20)
            .map(|k| CVec::from_fn(5, |j, _| C::new(((k * 7 + j * 3) % 5) as f64 - 2.0, (k + j) as f64 * 0.1)))
            .collect();
        let sampled = extension_constant_sampled(&op, &eta, 1.0, &samples).unwrap();
        assert!(sampled <= exact * (1.0 + 1e-10));
        assert!(exact.is_finite() && exact > 0.0);
    }

    #[test]
    fn trace_constant_exact_dominates_samples() {
        let op = diag_op(&[-2.0, -0.5, 0.5, 2.0], 1.0, 48);
        let exact = trace_constant_exact(&op, 1.0, 0.9).unwrap();
        let samples: Vec<_> = (0..10)
            .map(|k| {
                CylinderSection::from_fn(op.grid, 4, move |t, j| {
                    cr(bump(t) * ((k + j) as f64).cos() * (1.0 + k as f64 * t))
                })
            })
            .collect();
        let sampled = trace_constant(&op, 1.0, &samples).unwrap();
        assert!(sampled <= exact * (1.0 + 1e-10), "{sampled} {exact}");
        // Dense fallback agrees with the per-mode solver.
        let coupled = op.clone().with_remainder(|_| CMat::zeros(4, 4)).unwrap();
        assert!(coupled.is_mode_decoupled());
    }

    #[test]
    fn dense_trace_solver_matches_modewise() {
        let op = diag_op(&[-1.0, 1.5], 1.0, 24);
        let modewise = trace_constant_exact(&op, 1.0, 0.9).unwrap();
        let mut rot = op.clone();
        rot.r_t = vec![CMat::from_row_slice(2, 2, &[czero(), cr(1e-9), cr(1e-9), czero()]); 24];
        assert!(!rot.is_mode_decoupled());
        let dense = trace_constant_exact(&rot, 1.0, 0.9).unwrap();
        assert_relative_eq!(modewise, dense, max_relative = 1e-6);
    }

    #[test]
    fn trace_with_zero_trace_is_zero() {
        let op = diag_op(&[1.0], 1.0, 16);
        let u = CylinderSection::from_fn(op.grid, 1, |t, _| cr(t * bump(t)));
        assert_eq!(trace_constant(&op, 1.0, &[u]).unwrap(), 0.0);
    }

    #[test]
    fn remainder_shape() {
        let op = diag_op(&[-2.0, 1.0, 3.0], 0.5, 32)
            .with_remainder(|t| crate::scalar::diag_c(&[-2.0 * t * 0.5, t * 0.5, 3.0 * t * 0.5]) + CMat::identity(3, 3) * cr(0.25))
            .unwrap();
        let r = remainder_control(&op);
        // The best C for |0.5 tλ + 0.25| ≤ C(t|λ| + 1) is 0.5, which lies in [c_lower, c_upper].
        assert!(r.c_lower <= 0.5 + 1e-12 && r.c_upper >= 0.5 - 1e-3);
        assert!(!r.shrunk);
        let big = diag_op(&[1.0], 1.0, 16).with_remainder(|_| CMat::identity(1, 1) * cr(10.0)).unwrap();
        let rb = remainder_control(&big);
        assert!(rb.shrunk && rb.t_d < 0.9);
        assert_relative_eq!(rb.t_d, 0.9 / (8.0f64 * 100.0).sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn near_boundary_aps() {
        let op = diag_op(&[-2.0, -1.0, 1.0, 2.0], 1.0, 40);
        let b = crate::bc::aps(&op.sys);
        let u = CylinderSection::from_fn(op.grid, 4, |t, j| if j < 2 { cr(bump(t)) } else { czero() });
        let rep = near_boundary_apriori(&op, &b, std::slice::from_ref(&u), 400).unwrap();
        let exact = rep.exact_constant.unwrap();
        assert!(rep.sampled_constant <= exact * (1.0 + 1e-10));
        let bad = CylinderSection::from_fn(op.grid, 4, |t, _| cr(bump(t)));
        assert!(near_boundary_apriori(&op, &b, &[bad], 0).is_err());
    }

    #[test]
    fn embedding_svals() {
        let g = CylinderGrid::new(1.0, 33).unwrap();
        let zero = EigenSystem::diagonal(&[0.0, 0.0]).unwrap();
        let s = h1_embedding_svals(&g, &zero, 1.0).unwrap();
        assert_relative_eq!(s[0], 1.0, epsilon = 1e-12);
        let th: Vec<f64> = (0..4).map(|i| (i as f64 * std::f64::consts::PI).powi(2)).collect();
        let lam = [1.0, 2.0, 3.0];
        let v = tensor_embedding_svals(&th, &lam);
        // Dense oracle: SVD of the diagonal embedding in the tensor basis.
        let d = nalgebra::DMatrix::<f64>::from_fn(12, 12, |a, b| {
            if a == b { 1.0 / (1.0 + th[a / 3] + lam[a % 3].powi(2)).sqrt() } else { 0.0 }
        });
        let mut sv: Vec<f64> = d.svd(false, false).singular_values.iter().copied().collect();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (x, y) in v.iter().zip(&sv) {
            assert!((x - y).abs() < 1e-12);
        }
        let big = tensor_embedding_svals(&th, &[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert!(crate::spectral::appends_smaller_tail(&v, &big, 1e-12) || big.len() > v.len());
        assert!(h1_embedding_svals(&g, &zero, 0.0).is_err());
    }

    #[test]
    fn neumann_spectrum_approximates_cosines() {
        let th = neumann_spectrum::<f64>(1.0 / 256.0, 257);
        assert!(th[0].abs() < 1e-9);
        assert_relative_eq!(th[1], std::f64::consts::PI.powi(2), max_relative = 1e-3);
    }

    #[test]
    fn csv_and_binary_round_trip() {
        let g = CylinderGrid::new(1.0, 9).unwrap();
        let u = CylinderSection::from_fn(g, 3, |t, j| C::new(t * j as f64, -t));
        let mut buf = Vec::new();
        u.write_csv(&mut buf).unwrap();
        let back = CylinderSection::read_csv(g, 3, buf.as_slice()).unwrap();
        assert!(max_abs(&(&back.values - &u.values)) < 1e-15);
        let mut bin = Vec::new();
        u.write_binary(&mut bin).unwrap();
        assert_eq!(CylinderSection::read_binary(g, bin.as_slice()).unwrap(), u);
        assert!(CylinderSection::read_binary(g, &bin[..30]).is_err());
        assert!(CylinderSection::read_csv(g, 3, "t_index,eigen_index,re,im\n0,0,1,0\n".as_bytes()).is_err());
    }

    #[test]
    fn f32_model_runs() {
        let sys = EigenSystem::<f32>::diagonal(&[1.0, -1.0]).unwrap();
        let op = CylinderOperator::model(sys, CylinderGrid::new(1.0f32, 64).unwrap(), &CMat::identity(2, 2)).unwrap();
        let u = CylinderSection::from_fn(op.grid, 2, |t, j| if j == 1 { cr((-t).exp()) } else { czero() });
        assert!(op.apply_model(&u).unwrap().norm() < 1e-2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn model_is_linear(a in -2.0f64..2.0, b in -2.0f64..2.0, l in -3.0f64..3.0) {
            let op = diag_op(&[l, 1.0], 1.0, 16);
            let u = CylinderSection::from_fn(op.grid, 2, |t, j| C::new(t.cos(), j as f64));
            let v = CylinderSection::from_fn(op.grid, 2, |t, _| C::new(t * t, -t));
            let mut w = u.clone();
            w.values = &u.values * cr(a) + &v.values * cr(b);
            let lhs = op.apply_model(&w).unwrap().values;
            let rhs = op.apply_model(&u).unwrap().values * cr(a) + op.apply_model(&v).unwrap().values * cr(b);
            prop_assert!(max_abs(&(lhs - rhs)) < 1e-9);
        }

        #[test]
        fn extension_trace_identity(re in proptest::collection::vec(-5.0f64..5.0, 3), eps in 0.01f64..2.0) {
            let op = diag_op(&[-1.0, 0.0, 4.0], 1.0, 16);
            let eta = CutoffProfile::new(&op.grid, 1.0).unwrap();
            let u0 = CVec::from_iterator(3, re.iter().map(|&x| C::new(x, -x)));
            prop_assert_eq!(extension(&op, &eta, eps, &u0).unwrap().trace(), u0);
        }
    }
}
