//! Spectral-Galerkin toolkit for the extensible viscoelastic beam with fading
//! memory and an elastic foundation, hinged at both ends:
//!
//! ```text
//! u_tt + u_xxxx + ∫₀^∞ μ(s) ∂_xxxx[u(t) − u(t−s)] ds − (β + ‖u_x‖²) u_xx = −k u + f
//! ```
//!
//! The unknown is expanded on the L²-orthonormal eigenbasis `√2 sin(nπx)` of
//! `∂_xxxx`, whose eigenvalues are `λ_n = n⁴π⁴`. A physical amplitude `A` of
//! `sin(nπx)` corresponds to the modal coefficient `c_n = A/√2`.
//!
//! Modules:
//! - [`spectral`], [`kernel`], [`history`]: basis, norms, parameter types.
//! - [`statics`]: closed-form equilibria, resonances and bifurcation sweeps.
//! - [`dynamics`]: time integration with two memory backends and monitors.
//! - [`stability`]: thresholds, coercivity constant, bounds, decay fits.
//! - [`attractor`]: split decomposition and heteroclinic connection graph.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attractor;
pub mod dynamics;
pub mod error;
pub mod fmt;
pub mod history;
pub mod kernel;
pub mod par;
pub mod spectral;
pub mod stability;
pub mod statics;

pub use error::{Error, Result};
pub use kernel::MemoryKernel;
pub use par::Execution;
pub use spectral::{BeamParams, ModalState};
