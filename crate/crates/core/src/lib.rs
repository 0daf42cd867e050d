//! Vector-valued model spaces over the disc and the two half-planes, finite
//! Blaschke-Potapov products, and the compressed Blaschke multiplier whose
//! norm is governed by the singular values of the inner function at a point.

pub mod basicop;
pub mod debranges;
pub mod domains;
pub mod error;
pub mod inner;
pub mod linalg;
pub mod modelspace;
pub mod parallel;
pub mod rational;
pub mod sweep;
pub mod transfer;

pub use error::{Error, Result};
