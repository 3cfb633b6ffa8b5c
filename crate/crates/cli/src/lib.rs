//! Experiment harness for the two-qubit entanglement indicator: the command
//! implementations behind the `qnnent` binary.

pub mod commands;
pub mod output;
