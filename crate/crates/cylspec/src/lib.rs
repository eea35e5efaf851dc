//! Numerical realisation of boundary value problems for first-order elliptic
//! operators on model half-cylinders `[0, T] × ∂M`.
//!
//! The boundary operator `A` is a Hermitian matrix (a spectral truncation). On
//! top of its functional calculus the crate builds the hybrid boundary spaces,
//! boundary conditions and their adjoints, the model cylinder operator with
//! its Green formula and trace estimates, Dirac and Callias instances, and
//! Fredholm diagnostics for two-ended problems.
//!
//! Everything is generic over [`Real`] (`f32` or `f64`); the `*64` aliases
//! below name the double precision instances.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod scalar;
pub mod spectral;
pub mod czech;
pub mod bc;
pub mod cylinder;
pub mod dirac;
pub mod fredholm;
pub mod sample;

pub use error::{Error, Result};
pub use scalar::{CMat, CVec, Real, C};

pub type EigenSystem64 = spectral::EigenSystem<f64>;
pub type EigenSystem32 = spectral::EigenSystem<f32>;
pub type BoundaryCondition64 = bc::BoundaryCondition<f64>;
pub type BoundaryCondition32 = bc::BoundaryCondition<f32>;
pub type CylinderGrid64 = cylinder::CylinderGrid<f64>;
pub type CylinderSection64 = cylinder::CylinderSection<f64>;
pub type CylinderOperator64 = cylinder::CylinderOperator<f64>;
pub type CylinderOperator32 = cylinder::CylinderOperator<f32>;
pub type CMat64 = CMat<f64>;
pub type CVec64 = CVec<f64>;
