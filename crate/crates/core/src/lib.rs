//! Zero-inflated symmetric multivariate Laplace (ZIL) privacy toolkit.
//!
//! This crate holds the numerical core and is `no_std` (it needs `alloc`):
//!
//! - [`distributions`]: SL / ZIL samplers, the SL density, truncated normals
//!   and the Laplace helpers.
//! - [`tradeoff`]: trade-off functions of the ZIL mechanism, their
//!   large-dimension limit `beta_c`, `(epsilon, delta)` profiles and budget
//!   calibration.
//! - [`mechanism`]: the ZIL release and the doubly random (DRDP) release.
//! - [`losses`]: loss functions and the DRCL / sDRCL / SL corrected losses.
//! - [`estimation`]: optimizers, the five M-estimators and sandwich inference.
//!
//! Everything random is a pure function of an [`RngStream`] value.
#![cfg_attr(not(test), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod distributions;
mod error;
pub mod estimation;
pub mod losses;
pub mod matrix;
pub mod mechanism;
pub mod quadrature;
mod rng;
pub mod roots;
pub mod special;
pub mod tradeoff;

pub use error::{Error, Result};
pub use distributions::NoiseParams;
pub use matrix::RowMatrix;
pub use rng::{RngStream, GENERATOR};
