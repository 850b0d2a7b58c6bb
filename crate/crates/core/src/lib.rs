//! Kendall's tau correlation matrices in high dimension: estimators, the
//! Hoeffding decomposition, and the limiting spectral distribution of the
//! Kendall matrix obtained from a subordinated Stieltjes equation.

// `!(x > 0.0)` is how argument checks reject NaN along with the rest.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimators;
pub mod experiments;
pub mod models;
pub mod normal;
pub mod oracles;
pub mod rng;
pub mod sampling;
pub mod spectra;
pub mod stieltjes;

pub use error::{Error, Result};

// Compiles and runs every code block of the guide as a doc-test.
#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme {}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/quickstart.md")]
    mod quickstart {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/hoeffding.md")]
    mod hoeffding {}
    #[doc = include_str!("../../../book/src/limiting_law.md")]
    mod limiting_law {}
    #[doc = include_str!("../../../book/src/oracles.md")]
    mod oracles {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/reproducibility.md")]
    mod reproducibility {}
    #[doc = include_str!("../../../book/src/limitations.md")]
    mod limitations {}
}
