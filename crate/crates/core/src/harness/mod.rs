//! Run configuration, checkpoints, evaluation campaigns, rendering and the
//! gradient-check suite.

pub mod checkpoint;
mod config;
mod eval;
mod gradcheck;
mod metrics;
mod render;

pub use checkpoint::CheckpointError;
pub use config::{ConfigError, RunConfig};
pub use eval::{
    eval_worlds, evaluate, evaluate_planner, run_episode, EpisodeResult, EvalError, EvalReport,
    GreedyPlanner, Policy, RandomPolicy, ShortestPathPolicy, SizeReport, DEFAULT_EVAL_SEEDS,
};
pub use gradcheck::{gradcheck_suite, CheckSummary, GRADCHECK_STEP, GRADCHECK_TOLERANCE};
pub use metrics::{strip_wall_clock, MetricsWriter};
pub use render::{parse_pgm, policy_ascii, render_value_map, value_pgm, RenderError};
