//! File formats, a parallel convergence harness, the randomized invariant
//! suite and the command-line front end for `aduals-core`.

// `!(x <= tol)` is used on purpose so that NaN fails every check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod io;
pub mod ladder;
pub mod selftest;
