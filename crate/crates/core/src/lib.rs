//! Unitary equivalence of a closed operator to a Carleman integral operator
//! with an infinitely smooth kernel, built from a Lemarié–Meyer wavelet basis.
//!
//! Pipeline: [`operator`] (the truncated model and its auxiliary operators)
//! → [`schmidt`] (Schmidt system of `J` and the operator `B`) → [`wavelet`]
//! (Meyer wavelet and derivatives) → [`assignment`] (which wavelet each basis
//! vector goes to) → [`kernel`] (assembly and evaluation of `K = P + F`) →
//! [`verify`] (numerical checks). [`cli`] wires these to config files.

pub mod assignment;
pub mod cli;
pub mod config;
pub mod error;
pub mod kernel;
pub mod operator;
pub mod quadrature;
pub mod schmidt;
pub mod series;
pub mod verify;
pub mod wavelet;

pub use error::{Error, Result};

pub type C64 = nalgebra::Complex<f64>;
