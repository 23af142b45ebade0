//! Numerical laboratory for Hamiltonians of M non-relativistic particles coupled to
//! a field of bosons through interior-boundary conditions.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] holds parameters, the free symbol and the closed-form constants.
//! * [`quad`] provides adaptive, oscillatory and Monte-Carlo integration.
//! * [`testfn`] defines Gaussian test states with analytic transforms.
//! * [`ops`] evaluates the action of the operators on test states.
//! * [`asym`] fits short-distance singular expansions of probe series.
//! * [`sector1`] studies the one-boson fiber energy.
//! * [`boundslab`] evaluates bounding constants and their scaling.
//! * [`runner`] wires everything into reproducible experiments with reports.

pub mod asym;
pub mod boundslab;
pub mod config;
pub mod error;
mod gaussian;
pub mod model;
pub mod ops;
pub mod quad;
pub mod report;
pub mod runner;
pub mod sector1;
pub mod testfn;

pub use error::{Error, Result};
pub use model::ModelParams;
pub use quad::{Estimate, Mapping, Method, QuadSpec};
pub use testfn::{ProductState, RadialTestFunction};
