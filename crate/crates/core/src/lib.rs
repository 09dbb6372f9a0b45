// `!(x > 0.0)` is how NaN gets rejected along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// bit-indexed enumeration loops read better with explicit indices
#![allow(clippy::needless_range_loop)]

pub mod attacks;
pub mod data;
pub mod defense;
pub mod error;
pub mod mechanisms;
pub mod metrics;
pub mod neural;
pub mod oracle;

pub use error::{Error, Result};
