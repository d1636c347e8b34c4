// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod annealers;
pub mod error;
pub mod evt;
pub mod exact;
pub mod harness;
pub mod instances;
pub mod pipeline;
pub mod rng;
