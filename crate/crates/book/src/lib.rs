//! Compiles the guide's code blocks as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/signals.md")]
pub mod signals {}
#[doc = include_str!("../../../book/src/convolution.md")]
pub mod convolution {}
#[doc = include_str!("../../../book/src/nonlinearity.md")]
pub mod nonlinearity {}
#[doc = include_str!("../../../book/src/networks.md")]
pub mod networks {}
#[doc = include_str!("../../../book/src/training.md")]
pub mod training {}
#[doc = include_str!("../../../book/src/fitting.md")]
pub mod fitting {}
#[doc = include_str!("../../../book/src/graphons.md")]
pub mod graphons {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
