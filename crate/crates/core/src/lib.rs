//! Approximate duals and enhanced approximate duals of B-splines on open
//! knot vectors, the quasi-projection kernels they induce, and the
//! convergence experiments built on top of them.
//!
//! Indices throughout the API are 0-based. A knot written `θ_k` in 1-based
//! notation is `knots()[k - 1]` here, and the B-spline `N_{m,k}` is basis
//! function `k - 1`.
//!
//! The crate is `no_std` (with `alloc`) when built without the default
//! `std` feature.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x <= tol)` is used on purpose so that NaN fails every check
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod bspline;
pub mod enhanced;
pub mod experiments;
pub mod gram_dual;
pub mod knots;
pub mod linalg;
pub mod projection;

pub use bspline::{BasisWindow, BsplineError, Spline};
pub use enhanced::{EnhancedDual, EnhancedError, RightInverseMethod};
pub use gram_dual::{ApproxDual, GramDualError};
pub use knots::{CoarseSelection, KnotError, KnotVector};
pub use linalg::{BandedSymMatrix, DenseMatrix, LinalgError, SparseMatrix, Tolerances};
pub use projection::{ProjectionError, Projector, ProjectorKind};
