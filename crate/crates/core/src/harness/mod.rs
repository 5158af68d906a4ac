//! Experiment plumbing used by the command-line driver.

pub mod config;
pub mod data;
pub mod lemmas;
pub mod run;
