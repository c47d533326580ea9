// Coefficient tables are copied at their published precision, and `!(x > 0.0)` is
// used on purpose so that NaN fails validation.
#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod expansions;
pub mod fiducial;
pub mod nef;
pub mod numerics;
pub mod pstar;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
