//! Turbo equalization for frequency-selective channels with expectation
//! propagation equalizers.
//!
//! The crate provides the full link: LDPC coding, bit interleaving, symbol
//! mapping, ISI channel, soft-input soft-output equalizers and the turbo loop
//! that ties them together, plus BER and EXIT evaluation helpers.

pub mod channel;
pub mod coding;
pub mod equalizers;
pub mod error;
pub mod evaluation;
pub mod modem;
pub mod numerics;
pub mod turbo;
pub mod validation;

pub use error::{Error, Result};

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/link.md")]
    pub struct Link;
    #[doc = include_str!("../../../book/src/equalizers.md")]
    pub struct Equalizers;
    #[doc = include_str!("../../../book/src/turbo.md")]
    pub struct Turbo;
    #[doc = include_str!("../../../book/src/evaluation.md")]
    pub struct Evaluation;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
