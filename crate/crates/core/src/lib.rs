//! Assouad spectra: admissibility checks, explicit families, and homogeneous
//! Moran sets realizing a prescribed spectrum.
//!
//! A candidate spectrum `φ: (0,1) → [0,d]` is stored through its transform
//! `β(θ) = (1−θ)φ(θ)`. Every explicit family handled here is exactly piecewise
//! linear in that representation, so suprema, running maxima and the
//! non-monotone construction stay exact.
//!
//! Module map:
//! - [`spectrum`]: representations, evaluation and the function algebra.
//! - [`validation`]: grid-based checks of the admissibility inequalities.
//! - [`families`]: the monotone and non-monotone families and the exceptional examples.
//! - [`growth`]: logarithmic-scale growth functions and their spectrum formula.
//! - [`moran`]: ratio schedules, the level-count estimator and the covering oracle.

pub mod error;
pub mod families;
pub mod growth;
pub mod moran;
pub mod spectrum;
pub mod validation;

mod bisect;

pub use error::{Error, Result};
pub use spectrum::{AmbientDim, BetaFn, SpectrumFn};
