//! Planner-imitation A3C on a deterministic two-player Mini-Pommerman.
//!
//! Module map:
//! - [`env`]: the game engine, board generation, replays
//! - [`features`]: the 28-plane observation encoder
//! - [`opponents`]: static and rule-based scripted agents
//! - [`network`]: convolutional actor-critic with hand-written backprop and Adam
//! - [`loss`]: trajectories, advantages and the actor-critic / imitation losses
//! - [`mcts`]: the UCT demonstrator
//! - [`trainer`]: asynchronous workers around a shared parameter store
//! - [`harness`]: configs, training runs, evaluation tournaments, reports

pub mod env;
pub mod features;
pub mod seeding;
pub mod loss;
pub mod network;
pub mod opponents;
pub mod selftest;
pub mod mcts;
pub mod trainer;
pub mod harness;
