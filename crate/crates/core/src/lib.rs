//! Distinguished recurrent solutions of monotone dissipative cocycles.
//!
//! A quasi-periodic equation `u' = f(t, u)` (or `u_{n+1} = f(n, u_n)`) is
//! lifted to a cocycle over a rotation on the torus. For monotone, dissipative,
//! uniformly stable cocycles the library approximates the Levinson center by
//! pullback limits, takes the fiber infimum `α`, follows it to the unique limit
//! point `γ` over the starting base point, and checks numerically that the
//! entire trajectory through `γ` inherits the recurrence of the base.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod attractor;
pub mod base_flow;
pub mod bronshtein;
pub mod cloud;
pub mod cocycle;
pub mod error;
pub mod field;
pub mod integrator;
pub mod io;
pub mod order;
pub mod recurrence;
pub mod rng;
pub mod scenario;
pub mod stability;
pub mod trajectory;

pub use base_flow::{base_distance, inclusion_length, BaseFlowSpec, BasePoint, TimeKind};
pub use cocycle::{CocycleSpec, SkewPoint, SystemKind};
pub use error::{Error, Result, Stage};
pub use field::VectorField;
pub use trajectory::Trajectory;
