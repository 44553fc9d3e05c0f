//! Density estimation with vanilla GANs built from ReQU networks: network
//! primitives, push-forward densities, divergences, adversarial training,
//! oracle-inequality audits and a minimax lower-bound laboratory.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod divergence;
pub mod error;
pub mod experiments;
pub mod gan_core;
pub mod generator_density;
pub mod minimax_lab;
pub mod oracle_audit;
mod par;
pub mod quadrature;
pub mod requ_net;
pub mod verify;

pub use error::{Error, Result};
