//! Differentiable planning modules for grid-world navigation.
//!
//! Three planners share one interface: an embedding of the observation into
//! per-cell fields, a depth-K recurrence with shared weights, and policy and
//! value heads read out around the agent.
//!
//! * VIN: learned translation-invariant 3x3 kernels, max over action channels.
//! * VProp: per-cell entry reward, exit cost and propagation factor.
//! * MVProp: per-cell reward and propagation factor; only positive reward
//!   propagates, so obstacles can only be expressed by blocking propagation.
//!
//! Planners are trained with off-policy actor-critic on procedurally
//! generated maps ([`env`]) and checked against exact search references
//! ([`oracle`]).

pub mod env;
pub mod grid;
pub mod harness;
pub mod oracle;
pub mod planners;
pub mod tensor;
pub mod trainer;

pub use grid::{Action, Cell, Grid};
