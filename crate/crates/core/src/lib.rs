//! Integral kernels of `L^N e^{tL}` for the Ornstein-Uhlenbeck operator
//! `L = ½Δ - ⟨x, ∇⟩` on `L²(ℝ^d, dγ)`, together with the exact
//! combinatorics behind their closed form, two independent numerical
//! oracles, and numerical checks of the kernel bounds they satisfy.

pub mod bounds;
pub mod cli;
pub mod combinatorics;
pub mod error;
pub mod hermite;
pub mod kernels;
pub mod operator;
pub mod weyl;

pub use combinatorics::{MultiIndex, StirlingTable};
pub use error::{Error, Result};
pub use hermite::QuadratureRule;
pub use kernels::oracle::OracleControls;
pub use kernels::KernelQuery;
pub use weyl::WeylElement;
