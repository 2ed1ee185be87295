//! Numerical library for the locally constrained anisotropic curvature flow
//!
//! ```text
//! ∂X/∂t = (1 − E_k^{1/k}(κ) σ_F) ν_F
//! ```
//!
//! for convex hypersurfaces, which deforms any smooth strictly convex body to
//! a scaled Wulff shape `r̄ W_F`. The crate provides the Wulff geometry of an
//! anisotropy `F`, grids and pulled-back charts on spheres, pointwise
//! curvature in two parametrizations (radial graph and anisotropic support
//! function), mixed volumes, explicit time stepping with diagnostics, and the
//! spectrum of the linearized operator.
//!
//! All numerical code is generic over [`Real`]; the aliases below fix `f64`.

pub mod anisotropy;
pub mod bodies;
pub mod curvature;
pub mod discretization;
pub mod error;
pub mod flow;
pub mod functionals;
pub mod linalg;
pub mod scalar;
pub mod spectral;
pub mod sphere;

pub use anisotropy::{Anisotropy, DerivativeMode, Family, HarmonicTerm, WulffPointFrame};
pub use error::{Result, WulffError};
pub use scalar::Real;

pub type Anisotropy64 = anisotropy::Anisotropy<f64>;
pub type SphereGrid64 = discretization::SphereGrid<f64>;
pub type WulffChart64 = discretization::WulffChart<f64>;
pub type RadialGraphState64 = curvature::RadialGraphState<f64>;
pub type SupportState64 = curvature::SupportState<f64>;
pub type ConvexBody64 = bodies::ConvexBody<f64>;
pub type FlowRecord64 = flow::FlowRecord<f64>;
pub type LinearizedOperator64 = spectral::LinearizedOperator<f64>;

pub type Anisotropy32 = anisotropy::Anisotropy<f32>;
pub type SphereGrid32 = discretization::SphereGrid<f32>;
