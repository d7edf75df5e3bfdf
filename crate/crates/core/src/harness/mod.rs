//! Experiment orchestration: configuration files, multi-seed training runs
//! with metrics and learning curves, and evaluation tournaments.

pub mod config;
pub mod eval;
pub mod run;

pub use config::{ConfigError, ExperimentConfig};
pub use eval::{run_eval, write_eval, AgentSpec, EvalError, EvalReport, GameRecord};
pub use run::{episodes_to_threshold, learning_curve, run_training, train_seed, CurveRow, SeedSummary};
