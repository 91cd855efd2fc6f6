//! Optimal-estimation toolkit for one-parameter quantum channels.
//!
//! Given a channel as a parametrized Kraus family θ ↦ {Υ_k(θ)}, this crate
//! computes the Fisher-information bound C(θ) = 4 Σ_k tr(Υ_k'†Υ_k' ρ₀),
//! constructs canonical decompositions relative to a pure input state, tests
//! POVMs against the optimality conditions, evaluates the statistical
//! distance along the output curve, and validates everything with a Monte
//! Carlo maximum-likelihood harness against the Cramér–Rao bound.
//!
//! # Layout
//!
//! - [`linalg`]: dense complex matrices and a Jacobi Hermitian eigensolver.
//! - [`channel`]: [`channel::ParamKrausFamily`], builtin channels, tensor
//!   extensions.
//! - [`canonical`]: canonical frames, smooth tracking in θ, quasi-classical
//!   detection, eigenprojector POVMs.
//! - [`fisher`]: bounds, classical Fisher information, optimality residuals,
//!   distance curves, remix penalties, and the SLD oracle.
//! - [`estimate`]: sampling, maximum-likelihood estimation, Cramér–Rao
//!   comparisons.
//! - [`config`] / [`cli`]: the flat key=value configuration format and the
//!   report-producing commands behind the `chanest` binary.
//!
//! # Example
//!
//! ```
//! use chanest::channel::{depolarizing_canonical, QuantumState};
//! use chanest::fisher::kraus_bound;
//!
//! let family = depolarizing_canonical();
//! let input = QuantumState::basis(2, 0).unwrap();
//! let bound = kraus_bound(&family, 0.5, &input).unwrap();
//! assert!((bound - 2.0).abs() < 1e-12);
//! ```

pub mod canonical;
pub mod channel;
pub mod cli;
pub mod config;
pub mod error;
pub mod estimate;
pub mod fisher;
pub mod linalg;

pub use error::{Error, Result};
