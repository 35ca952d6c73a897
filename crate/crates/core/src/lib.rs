//! Numerical laboratory for the Colombeau algebra of generalized functions on
//! the real line.
//!
//! The crate builds normalized test functions with vanishing moments
//! ([`mollifier`]), embeds distributions and smooth functions as
//! function-valued functionals ([`genfunc`]), and estimates how evaluations
//! scale as the test function is narrowed ([`asymptotics`]). Subjects can be
//! written in a small expression language ([`exprlang`]).

pub mod asymptotics;
pub mod exprlang;
pub mod genfunc;
pub mod jets;
pub mod mollifier;
pub mod quadrature;
