//! Greedy span-based constituency parsing with a structure/label transition
//! system, LSTM span features and an optimal dynamic oracle.

pub mod cli;
pub mod encoder;
pub mod metrics;
pub mod oracle;
pub mod synth;
pub mod training;
pub mod transition;
pub mod treebank;
