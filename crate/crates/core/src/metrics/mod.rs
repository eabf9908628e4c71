//! Objective per-piece metrics, corpus aggregation and report exports.

mod harmony;
mod pitch;
mod report;
mod rhythm;

pub use harmony::{ctnctr, infer_chords, pitch_consonance_score, INTERVAL_SCORE};
pub use pitch::{
    avg_pitch_interval, major_scale, pitch_class_entropy, pitch_count, pitch_entropy, pitch_in_scale_rate,
    pitch_range, polyphony,
};
pub use report::{
    aggregate, aggregate_csv, evaluate_all, evaluate_corpus, nltm_csv, nltm_pgm, parse_aggregate_csv, reports_csv, AggregateRow,
    AggregateTable, LabeledReport, MetricReport, MetricTable, METRIC_NAMES,
};
pub use rhythm::{avg_ioi, empty_beat_rate, groove_consistency, nltm, Nltm};

use thiserror::Error;

use crate::midi::MidiError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("EmptyScore")]
    EmptyScore,
    #[error("InsufficientNotes")]
    InsufficientNotes,
    #[error("InsufficientBars")]
    InsufficientBars,
    #[error("MissingChords")]
    MissingChords,
    #[error("InvalidArgument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Midi(#[from] MidiError),
}

/// Base-2 Shannon entropy of a histogram.
pub fn entropy_bits(hist: &[usize]) -> f64 {
    let total: usize = hist.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    let h: f64 = hist.iter().filter(|&&k| k > 0).map(|&k| {
        let p = k as f64 / t;
        -p * p.log2()
    }).sum();
    h.max(0.0)
}
