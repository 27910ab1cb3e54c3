#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod adapt;
pub mod hocbf;
pub mod model;
pub mod multiagent;
pub mod optim;
pub mod sim;
