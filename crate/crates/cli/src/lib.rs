//! Support code for the `adaptive-hand` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod server;
