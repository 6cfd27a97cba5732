//! Numerical laboratory for viscous incompressible flow past a moving rigid
//! body, in the frame attached to the body.
//!
//! The crate provides
//!
//! * prescribed rigid-body motions and their rotation frames ([`motion`]),
//! * periodic-box vector fields with spectral calculus and Helmholtz
//!   projection ([`field`]),
//! * the explicit whole-space evolution operator of the drift-rotation heat
//!   system and its adjoint ([`whole_space`]),
//! * a divergence-repair operator on an annulus ([`bogovskii`]),
//! * a penalized exterior-domain evolution with an exactly transposed
//!   backward solver ([`exterior`]),
//! * a dyadic growth bound checker ([`growth`]),
//! * the nonlinear mild-solution layer with Picard iteration
//!   ([`navier_stokes`]),
//! * experiment orchestration, slope fitting and reporting ([`harness`]).
//!
//! All experiments work on a large periodic box as a proxy for the whole
//! space or an exterior domain; every report carries diagnostics for the
//! truncation this introduces.

pub mod bogovskii;
pub mod error;
pub mod exterior;
pub mod field;
pub mod growth;
pub mod harness;
pub mod motion;
pub mod navier_stokes;
pub mod report;
pub mod util;
pub mod whole_space;

pub use error::{Error, Result};
