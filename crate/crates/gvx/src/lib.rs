//! Exact distributions of the sum of squares, the sample variance, the ratio
//! U = √Z / Y and the sample angle for i.i.d. gamma(α) samples.

pub mod accum;
pub mod angle;
pub mod coeffs;
pub mod error;
pub mod exec;
pub mod mp;
pub mod oracle;
pub mod specfun;
pub mod sumsq;
pub mod variance;

pub use error::{Error, Result};
