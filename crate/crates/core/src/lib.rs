//! Numerical toolkit for Kolmogorov operators `Δ + ⟨Bx, ∇⟩ − ∂t` with
//! antisymmetric drift and for the associated Ornstein–Uhlenbeck process.
//!
//! * [`group`]: the Lie group law, propagator and fundamental solution.
//! * [`mvf`]: onion level sets and the weighted mean-value integral.
//! * [`onion`]: the two-onion inclusion constant `θ`.
//! * [`harnack`]: harmonic corpora, kernel bounds, the global Harnack and
//!   Liouville checks.
//! * [`ou`]: Gramians, recurrence criteria and exact path sampling.

pub mod error;
pub mod group;
pub mod harnack;
pub mod linalg;
pub mod mvf;
pub mod onion;
pub mod ou;
pub mod par;
pub mod quadrature;
pub mod stats;

pub use error::{Error, Result};
pub use group::{DriftModel, GroupPoint, Propagator};
pub use mvf::{MeanValue, OnionSpec, QuadratureConfig, Scheme, SolutionField};
pub use ou::OUModel;
pub use par::Execution;
