//! Semiclassical model of a cavity-coupled ancilla readout for a qubit that is
//! coupled to the ancilla through a cross-Kerr (σz σz) term.
//!
//! The pipeline runs from circuit parameters ([`device`]) to state-conditional
//! cavity transmission ([`transmission`]), photon-count statistics at the
//! amplifier input ([`photostats`]) and single-shot fidelity ([`readout`]).
//! [`dynamics`] integrates the semiclassical equations of motion directly and
//! serves as an independent check on the closed forms.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod constants;
pub mod device;
pub mod dynamics;
pub mod error;
pub mod ode;
pub mod output;
pub mod photostats;
pub mod readout;
pub mod transmission;

pub use error::{Error, Result};
