// `!(x > 0.0)` is used on purpose: it rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod datalink;
pub mod engine;
pub mod geometry;
pub mod pat;
pub mod terminal;
