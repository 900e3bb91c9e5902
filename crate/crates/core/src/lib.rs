//! Laboratory for single-buyer, multi-item buy-many mechanisms.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: item sets, valuations, lotteries, menus and type distributions.
//! * [`io`]: the JSON instance document and deterministic float formatting.
//! * [`buyer`] and [`dominance`]: exact buyer best response under buy-one and
//!   buy-many semantics, policy evaluation and the coupling test on item sets.
//! * [`verify`]: the buy-many constraint and the induced buy-one menu.
//! * [`pricing`], [`lp`]: revenue, item/bundle pricing and the optimal buy-one
//!   mechanism of a finite type distribution.
//! * [`perturb`], [`compress`]: multiplicative perturbations with the
//!   discounted-menu construction, and finite-menu compression.
//! * [`generators`], [`beta`]: explicit instance families and the closed-form
//!   two-item Beta(1,2) menu.
//! * [`oracle`], [`selftest`]: slow reference implementations and the self-check
//!   suite run by the CLI.

pub mod beta;
pub mod buyer;
pub mod compress;
pub mod dominance;
pub mod error;
pub mod generators;
pub mod io;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod perturb;
pub mod pricing;
pub mod selftest;
pub mod simplex;
pub mod verify;

pub use error::{Error, Result};
pub use model::{ItemSet, Lottery, MarginalAllocation, Menu, Semantics, TypeDistribution, Valuation};

/// Absolute tolerance used for every comparison of utilities, prices and
/// probabilities.
pub const TOL: f64 = 1e-9;
