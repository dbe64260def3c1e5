//! Covariant achronal localization of the massive scalar boson.
//!
//! Momentum-space wave packets, causal-kernel and stress-energy currents,
//! flux probabilities through Lipschitz achronal surfaces and the causal
//! logic of Minkowski space, all as numerically checkable objects.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod causal_logic;
pub mod currents;
pub mod error;
pub mod io;
pub mod kernels;
pub mod localization;
pub mod minkowski;
pub mod surfaces;
pub mod wavepacket;
pub mod window;

pub use error::{Error, Result};
