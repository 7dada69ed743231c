//! Koopman-eigenfunction linearization toolkit for polynomial control systems.
//!
//! The pipeline: sparse polynomial vector fields ([`polyfield`]), eigenstructure
//! and spectral projections ([`spectral`]), nonresonance and spectral-spread
//! checks ([`conditions`]), reference ODE integration ([`flow`]), construction
//! and verification of conjugacy maps that globally linearize the dynamics
//! ([`linearize`]), Lie-algebra closure and isomorphism certificates
//! ([`liealg`]), certified bilinear reformulations of control-affine systems
//! ([`bilinearize`]), and a data-driven generator fit ([`gedmd`]).

pub mod bilinearize;
pub mod conditions;
pub mod cpoly;
pub mod defaults;
pub mod error;
pub mod flow;
pub mod gedmd;
pub mod liealg;
pub mod linearize;
pub mod polyfield;
pub mod sampling;
pub mod spectral;

pub use error::{Error, Result};
