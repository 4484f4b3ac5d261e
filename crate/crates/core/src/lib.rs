//! Conservative macro-micro dynamical low-rank solver for the 1D1V
//! Vlasov equation with Dougherty (Lenard-Bernstein) collisions.
//!
//! The distribution function is split as `f = N + g`. The macro part `N`
//! carries the charge, current and kinetic energy and is advanced with a
//! conservative finite-difference scheme; the micro part `g` has vanishing
//! collision-invariant moments and is evolved as a rank-`r` factorization
//! `X S V^T` with the projector-splitting integrator.
//!
//! Two velocity discretizations are provided: an asymmetrically weighted
//! Hermite spectral method ([`velocity::hermite`]) and a truncated-domain
//! finite-difference method with a Legendre-weighted macro basis
//! ([`velocity::fd`]).

pub mod benchmarks;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod integrator;
pub mod lowrank;
pub mod orthopoly;
pub mod runner;
pub mod spatial;
pub mod velocity;

pub use config::{Backend, FieldKind, SimConfig};
pub use diagnostics::DiagnosticsRecord;
pub use error::{Error, Result};
pub use integrator::{FieldSolver, MomentField, Order, SimState, Solver};
pub use lowrank::LowRankState;
pub use orthopoly::{BasisFamily, BasisKind, MacroCoefficients};
pub use spatial::{Reconstruction, XGrid};
pub use velocity::VelocitySpace;
