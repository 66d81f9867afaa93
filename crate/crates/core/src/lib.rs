//! Actor-accelerated policy dual averaging for continuous-action MDPs.
//!
//! The crate bundles a small reverse-mode autodiff engine, native
//! environments, on-policy rollout processing, the dual-averaging agent and
//! a PPO baseline, an exact sub-problem solver for tracking diagnostics, and
//! a lab that checks the convergence inequalities on closed-form instances.

pub mod autodiff;
pub mod config;
pub mod envs;
pub mod error;
pub mod pda;
pub mod ppo;
pub mod rollout;
pub mod runner;
pub mod subsolver;
pub mod theorylab;

pub use config::{Algo, RunConfig};
pub use error::{Error, Result};
