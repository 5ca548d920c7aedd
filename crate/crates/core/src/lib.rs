//! Generative pre-trained PINNs: a reduced network whose hidden neurons are
//! full PINNs pre-trained at greedily chosen parameter values.

// Comparisons written as `!(x > 0.0)` are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adam;
pub mod archive;
pub mod collocation;
pub mod config;
mod error;
pub mod eval;
pub mod filter;
pub mod gpt;
pub mod greedy;
pub mod loss;
pub mod mlp;
pub mod output;
pub mod pde;
pub mod pinn;
pub mod reference;

pub use error::{Error, Result};
