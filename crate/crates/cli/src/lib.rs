//! Sweep engine and report rendering behind the `hdqkd` command.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod report;
pub mod sweep;
