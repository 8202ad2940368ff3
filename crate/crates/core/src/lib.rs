//! ReLU-network approximation of Black-Scholes prices: exact payoff networks,
//! multichannel composition with sampled affine solution maps, and a
//! Monte-Carlo constructor with measured error.

// Negated comparisons are used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod affine;
pub mod builders;
pub mod constructor;
pub mod error;
pub mod linalg;
pub mod model;
pub mod monte_carlo;
pub mod network;
pub mod oracles;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use model::{BlackScholesModel, Correlation};
pub use monte_carlo::MeasureSpec;
pub use network::{Activation, Layer, Network};
pub use oracles::{Payoff, PayoffFamily};
