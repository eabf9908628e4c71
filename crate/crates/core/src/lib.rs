//! Benchmark and evaluation toolkit for spiking symbolic-music models.

pub mod metrics;
pub mod midi;
pub mod spike;
pub mod stats;
pub mod study;
pub mod tokenizer;
