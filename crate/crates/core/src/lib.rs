//! Asymptotic total charges of metric/initial data given in a chart at
//! infinity: ADM mass, center of mass, Abbott-Deser momentum and the
//! Chrusciel-Herzlich hyperbolic mass, plus numerical verification drivers
//! for the structural facts behind their coordinate invariance (the charge
//! integrand identity, KID equations, the cancellation of slowly decaying
//! terms under a change of chart, and quadratic remainder bounds).
//!
//! The numeric currency throughout is the [`expr::Jet`]: value plus partial
//! derivatives to a fixed order, propagated by truncated Taylor arithmetic.

pub mod backgrounds;
pub mod charge;
pub mod cli;
pub mod diffeo;
pub mod numeric;
pub mod surface;
pub mod verify;
pub mod expr;
pub mod tensorcalc;
