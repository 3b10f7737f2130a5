//! Time-reversibility analysis for stationary diffusion processes.
//!
//! A stationary diffusion `dx = b(x) dt + σ dW` splits into a time-reversible
//! part `b_rev` that climbs the stationary density and a time-irreversible
//! part `b_irr` that flows along its contours. The entropy production rate
//! `e_p` — the relative entropy per unit time between the forward and
//! time-reversed path laws — measures how far the steady state is from
//! detailed balance: it is `∫ b_irrᵀ D⁻ b_irr ρ dx` when `b_irr` stays in the
//! range of the volatility and `+∞` otherwise.
//!
//! The crate provides:
//!
//! - [`linalg`]: rank-aware dense kernels (pseudo-inverse, pseudo-determinant,
//!   matrix exponential, Lyapunov and Van Loan solves) shared by everything else.
//! - [`gaussian`]: possibly-degenerate Gaussians, exact sampling, and their
//!   relative entropy.
//! - [`model`]: linear diffusions with stationarity certificates `(Π, D, Q)`,
//!   underdamped Langevin models, generic constant-volatility SDEs, time
//!   reversal, and the range condition `b_irr(x) ∈ im σ`.
//! - [`exact`]: exact transition kernels and sampling for linear diffusions,
//!   the finite-lag rate `e_p(ε)`, and closed forms.
//! - [`integrate`]: Euler–Maruyama and BBK integrators plus the support
//!   analysis of the Euler–Maruyama chain.
//! - [`estimate`]: model-free binned estimation of `e_p` from trajectories,
//!   including the involution-corrected (generalised) variant and ε-sweeps.
//! - [`config`] / [`experiment`]: JSON model ingestion and the experiment
//!   drivers behind the `epr` binary.
//!
//! Run `cargo run --example quadratic_ep_law` (or any other example) for a
//! guided tour; the acceptance suite lives in `tests/acceptance.rs`.

pub mod config;
pub mod error;
pub mod estimate;
pub mod exact;
pub mod experiment;
pub mod gaussian;
pub mod integrate;
pub mod linalg;
pub mod model;

pub use error::EprError;

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, EprError>;
