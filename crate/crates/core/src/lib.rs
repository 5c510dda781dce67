//! Nonlinear least-square-error (LSE) precoding for multiuser MIMO downlinks.
//!
//! The crate pairs large-system replica predictions of the precoder
//! distortion with Monte Carlo simulation of the actual precoders:
//!
//! - [`spectra`]: R-transforms of the channel Gramian (iid and path loss).
//! - [`replica_core`]: replica-symmetric fixed points and closed forms.
//! - [`replica_rsb`]: one-step replica-symmetry-breaking fixed points.
//! - [`precoders`]: RZF, projected gradient, coordinate descent and an
//!   exhaustive search for small discrete instances.
//! - [`experiments`]: Monte Carlo harness, tuning, rate bounds, union bound,
//!   OFDM spectrum check and power-decay fits.
//! - [`cli`]: the `lse-lab` command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod experiments;
pub mod numerics;
pub mod precoders;
pub mod replica_core;
pub mod replica_rsb;
pub mod spectra;

pub use error::{Error, Result};
