//! Deterministic co-simulation of multi-area load-frequency control (LFC)
//! under load-altering attacks.
//!
//! The crate couples a linearized multi-machine grid model with networked
//! controllers (secondary frequency control and under-frequency load
//! shedding), attack agents (static, dynamic, and measurement-based load
//! alteration), and a seeded lossy/delayed communication channel. Everything
//! advances in lockstep logical time, so a scenario with fixed seeds is a
//! reproducible regression test.
//!
//! Module layout:
//! - [`case`]: grid case description, validation, JSON schema, builtin cases
//! - [`grid`]: descriptor and reduced state-space models, integration, stability
//! - [`controllers`]: per-area secondary control driven by networked measurements
//! - [`protection`]: staged under-frequency load shedding and grid-code monitor
//! - [`attacks`]: static and dynamic load-altering attack agents
//! - [`mdlaa`]: measurement-based attack (Hankel predictor + receding-horizon QP)
//! - [`netem`]: seeded latency/jitter/loss channel with a typed frame protocol
//! - [`cosim`]: the orchestrator, scenario catalog, sweeps, and result reports

pub mod attacks;
pub mod case;
pub mod controllers;
pub mod cosim;
pub mod error;
pub mod grid;
pub mod mdlaa;
pub mod netem;
pub mod protection;

pub use error::{Error, Result};
