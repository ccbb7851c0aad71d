//! Convolutional networks on signals that live in a reproducing kernel Hilbert space.
//!
//! Signals are finite kernel expansions `Σ_v α_v k_v` over a domain that carries
//! an associative operation `∘` with identity. Convolution is defined on kernel
//! sections by `k_v ∗ k_u = k_{v∘u}`, so filters and signals stay finite sums and
//! every operation is exact up to pruning.
//!
//! ```
//! use rkhs_conv::{Center, DomainOp, Kernel, RkhsSignal};
//!
//! let k = Kernel::gaussian1d(1.0)?;
//! let f = RkhsSignal::section(k.clone(), DomainOp::Translation1d, Center::Scalar(1.25), 1.0)?;
//! let g = RkhsSignal::section(k, DomainOp::Translation1d, Center::Scalar(2.5), 1.0)?;
//! let h = f.convolve(&g)?;
//! assert_eq!(h.terms()[0].center, Center::Scalar(3.75));
//! # Ok::<(), rkhs_conv::Error>(())
//! ```

pub mod algnn;
pub mod demo;
pub mod domain;
pub mod error;
pub mod experiment;
pub mod fitting;
pub mod graphon;
pub mod kernels;
pub mod linalg;
pub mod nonlinearity;
pub mod signal;
pub mod training;

pub use algnn::AlgNet;
pub use domain::{Center, CenterKind, DomainOp};
pub use error::{Error, Result};
pub use kernels::Kernel;
pub use signal::{Axis, Grid, GridField, PruneReport, RkhsSignal, Term, Tolerances};
