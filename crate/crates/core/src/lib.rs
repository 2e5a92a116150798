//! Invariant-measure estimation for regime-switching, Levy-driven SDEs with
//! super-linearly growing coefficients.
//!
//! Paths are simulated with a tamed-adaptive Euler-Maruyama scheme
//! ([`taem`]), and expectations under the invariant law are estimated with a
//! multilevel Monte Carlo telescoping sum ([`mlmc`]). The [`analysis`] module
//! reproduces the strong-error, variance and cost studies; [`cli`] exposes
//! everything through a configuration-driven command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod config;
pub mod error;
pub mod linalg;
pub mod mlmc;
pub mod model;
pub mod noise;
pub mod taem;

pub use error::{Error, Result};
pub use model::{benchmark_model, Functional, Generator, Lipschitz, ModelMetadata, RegimeModel};
pub use noise::{JumpDriver, SampleStreams, SeedTree};
pub use taem::{LevelLadder, TaemConfig};
