//! Pricing laboratory for discretely sampled variance and volatility
//! swaps against their continuous (quadratic-variation) approximations.
//!
//! The library answers three questions about the approximation
//! `E(P^n(T)) ~ E(P(T))` for several stochastic volatility families:
//!
//! 1. Are both expectations finite at all? ([`models::classify_finiteness`])
//! 2. How large can the gap be, uniformly in n? ([`closed_form::theorem3_constant`])
//! 3. How fast does the gap shrink as n grows? ([`experiments::convergence_study`])
//!
//! Modules:
//!
//! * [`models`] - model families, validation, analytic classification.
//! * [`sde_sim`] - deterministic, path-parallel SDE simulation.
//! * [`payoffs`] - per-path payoffs and Monte Carlo estimates.
//! * [`closed_form`] - special functions and analytic oracles.
//! * [`experiments`] - convergence tables, rate fits, tail diagnostics,
//!   and the measure-change rescue experiment.

pub mod closed_form;
pub mod error;
pub mod experiments;
pub mod models;
pub mod payoffs;
pub mod sde_sim;
pub mod util;

pub use error::{Error, Result};
