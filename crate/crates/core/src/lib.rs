//! Piecewise-smooth (Filippov) vector fields, their regularizations and blow-ups,
//! and persistence experiments for non-smooth slow-fast systems.
//!
//! The modules build on each other roughly in this order:
//!
//! - [`expr`]: text expressions for vector-field components;
//! - [`psys`]: piecewise systems, classification of switching-manifold points, sliding fields;
//! - [`regularize`]: transition functions and smooth families;
//! - [`blowup`]: directional blow-up to slow-fast form, critical manifolds, reduced flows;
//! - [`flow`]: adaptive integration with events, Filippov trajectories;
//! - [`equilibria`]: Newton, small eigenproblems, δ-sweeps, periodic orbits, Hausdorff distance;
//! - [`nsff`]: non-smooth slow-fast systems and ε-sweeps;
//! - [`ccomb`]: continuous combinations and c-sliding;
//! - [`cli`]: config format, example registry and the command-line front end.

#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::too_many_arguments,
    clippy::manual_clamp
)]

pub mod blowup;
pub mod ccomb;
pub mod cli;
pub mod equilibria;
mod error;
pub mod expr;
pub mod flow;
mod linalg;
pub mod nsff;
pub mod psys;
pub mod regularize;

pub use error::{Error, Result};
pub use expr::{parse, Bindings, Expr};
pub use psys::{PiecewiseField, PiecewiseSystem, SigmaClass, SigmaKind};
pub use regularize::{PhiKind, SmoothFamily, Transition};
