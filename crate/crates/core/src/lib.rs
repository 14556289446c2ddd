// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod estimation;
pub mod gamma;
pub mod json;
pub mod matrix;
pub mod newton;
pub mod scenario;
pub mod series;
pub mod statespace;
