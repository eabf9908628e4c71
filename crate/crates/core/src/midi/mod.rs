//! Score model and MIDI ingestion.
//!
//! A [`Score`] keeps note timing in seconds together with the tempo map it
//! was derived from, so beat-relative views ([`QuantizedScore`]) can be
//! rebuilt without going back to ticks.

mod chords;
mod grid;
mod smf;
mod wav;

pub use chords::{parse_chord_sidecar, ChordLabel, ChordQuality};
pub use grid::{quantize, Cell, QNote, QuantizedScore, CellChord, VALID_RESOLUTIONS};
pub use smf::{parse_midi, write_midi};
pub use wav::{pitch_frequency, render_wav, synthesize, wav_duration, WAV_HEADER_LEN};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_BPM: f64 = 120.0;
pub const DEFAULT_TICKS_PER_QUARTER: u16 = 480;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MidiError {
    #[error("MalformedHeader: {0}")]
    MalformedHeader(String),
    #[error("TruncatedTrack: track {track} ends mid-event at byte {offset}")]
    TruncatedTrack { track: usize, offset: usize },
    #[error("UnsupportedFormat: SMF format {0}")]
    UnsupportedFormat(u16),
    #[error("EmptyScore")]
    EmptyScore,
    #[error("InvalidResolution: {0} cells per beat")]
    InvalidResolution(u32),
    #[error("UnsupportedMeter: {0}/{1} does not divide into whole grid cells")]
    UnsupportedMeter(u8, u8),
    #[error("InvalidSampleRate: {0}")]
    InvalidSampleRate(u32),
    #[error("InvalidArgument: {0}")]
    InvalidArgument(String),
    #[error("MalformedChords: line {line}: {reason}")]
    MalformedChords { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Note {
    pub pitch: u8,
    /// Seconds from the start of the score.
    pub onset: f64,
    /// Seconds, strictly positive.
    pub duration: f64,
    pub velocity: u8,
    pub track: usize,
}

impl Note {
    pub fn new(pitch: u8, onset: f64, duration: f64, velocity: u8) -> Self {
        Self { pitch, onset, duration, velocity, track: 0 }
    }

    pub fn end(&self) -> f64 {
        self.onset + self.duration
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TempoEvent {
    /// Seconds.
    pub time: f64,
    pub bpm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub notes: Vec<Note>,
    pub tempo_map: Vec<TempoEvent>,
    pub time_signature: (u8, u8),
    pub ticks_per_quarter: u16,
    pub chord_annotations: Option<Vec<ChordLabel>>,
}

impl Default for Score {
    fn default() -> Self {
        Self {
            notes: Vec::new(),
            tempo_map: vec![TempoEvent { time: 0.0, bpm: DEFAULT_BPM }],
            time_signature: (4, 4),
            ticks_per_quarter: DEFAULT_TICKS_PER_QUARTER,
            chord_annotations: None,
        }
    }
}

impl Score {
    /// Builds a score with a constant tempo, sorting the notes.
    pub fn with_notes(notes: Vec<Note>, bpm: f64) -> Self {
        let mut s = Score {
            notes,
            tempo_map: vec![TempoEvent { time: 0.0, bpm }],
            ..Score::default()
        };
        s.sort_notes();
        s
    }

    pub fn sort_notes(&mut self) {
        self.notes.sort_by(|a, b| {
            a.onset
                .total_cmp(&b.onset)
                .then(a.pitch.cmp(&b.pitch))
                .then(a.track.cmp(&b.track))
        });
    }

    pub fn is_empty(&self) -> bool {
        self.notes.is_empty()
    }

    /// Latest note end, or 0 for an empty score.
    pub fn duration(&self) -> f64 {
        self.notes.iter().map(Note::end).fold(0.0, f64::max)
    }

    /// Number of quarter notes elapsed at `seconds`, integrating the
    /// piecewise-constant tempo map.
    pub fn seconds_to_beats(&self, seconds: f64) -> f64 {
        let mut beats = 0.0;
        for (i, ev) in self.tempo_map.iter().enumerate() {
            let seg_end = self.tempo_map.get(i + 1).map_or(f64::INFINITY, |n| n.time);
            if seconds <= seg_end {
                return beats + (seconds - ev.time) * ev.bpm / 60.0;
            }
            beats += (seg_end - ev.time) * ev.bpm / 60.0;
        }
        beats
    }

    pub fn beats_to_seconds(&self, beats: f64) -> f64 {
        let mut acc = 0.0;
        for (i, ev) in self.tempo_map.iter().enumerate() {
            let seg_beats = self
                .tempo_map
                .get(i + 1)
                .map_or(f64::INFINITY, |n| (n.time - ev.time) * ev.bpm / 60.0);
            if beats <= acc + seg_beats {
                return ev.time + (beats - acc) * 60.0 / ev.bpm;
            }
            acc += seg_beats;
        }
        unreachable!("last tempo segment is unbounded")
    }

    /// Tempo in effect at `seconds`.
    pub fn bpm_at(&self, seconds: f64) -> f64 {
        self.tempo_map
            .iter()
            .take_while(|e| e.time <= seconds)
            .last()
            .map_or(DEFAULT_BPM, |e| e.bpm)
    }

    /// Drops notes starting at or after `max_seconds` and clips the ones
    /// crossing it.
    pub fn trim(&self, max_seconds: f64) -> Result<Score, MidiError> {
        trim(self, max_seconds)
    }

    /// Returns the score with every pitch shifted by `semitones`, or `None`
    /// if a pitch would leave 0..=127.
    pub fn transposed(&self, semitones: i32) -> Option<Score> {
        let mut out = self.clone();
        for n in &mut out.notes {
            let p = n.pitch as i32 + semitones;
            if !(0..=127).contains(&p) {
                return None;
            }
            n.pitch = p as u8;
        }
        if let Some(chords) = &mut out.chord_annotations {
            for c in chords {
                c.root = (c.root as i32 + semitones).rem_euclid(12) as u8;
            }
        }
        Some(out)
    }

    /// Multiplies every time value by `factor` and divides tempi by it.
    pub fn time_scaled(&self, factor: f64) -> Score {
        let mut out = self.clone();
        for n in &mut out.notes {
            n.onset *= factor;
            n.duration *= factor;
        }
        for t in &mut out.tempo_map {
            t.time *= factor;
            t.bpm /= factor;
        }
        if let Some(chords) = &mut out.chord_annotations {
            for c in chords {
                c.onset *= factor;
            }
        }
        out
    }
}

pub fn trim(score: &Score, max_seconds: f64) -> Result<Score, MidiError> {
    if !(max_seconds > 0.0) {
        return Err(MidiError::InvalidArgument(format!(
            "max_seconds must be positive, got {max_seconds}"
        )));
    }
    let mut out = score.clone();
    out.notes = score
        .notes
        .iter()
        .filter(|n| n.onset < max_seconds)
        .map(|n| {
            let mut n = *n;
            if n.end() > max_seconds {
                n.duration = max_seconds - n.onset;
            }
            n
        })
        .collect();
    if let Some(chords) = &mut out.chord_annotations {
        chords.retain(|c| c.onset < max_seconds);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn trim_clips_crossing_note() {
        let s = Score::with_notes(vec![Note::new(60, 29.5, 2.0, 80)], 120.0);
        let t = trim(&s, 30.0).unwrap();
        assert_abs_diff_eq!(t.notes[0].duration, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn trim_is_noop_below_limit() {
        let notes = (0..20).map(|i| Note::new(60 + i, i as f64 * 0.5, 0.5, 90)).collect();
        let s = Score::with_notes(notes, 120.0);
        assert_eq!(trim(&s, 30.0).unwrap(), s);
    }

    #[test]
    fn trim_long_piece() {
        let notes = (0..90).map(|i| Note::new(60, i as f64 * 0.5, 0.7, 90)).collect();
        let s = Score::with_notes(notes, 120.0);
        let t = trim(&s, 30.0).unwrap();
        assert!(t.notes.iter().all(|n| n.end() <= 30.0));
        assert_eq!(t.notes.len(), 60);
        assert_eq!(t.tempo_map, s.tempo_map);
        assert!(trim(&s, 0.0).is_err());
    }

    #[test]
    fn beats_seconds_inverse_with_tempo_change() {
        let s = Score {
            tempo_map: vec![
                TempoEvent { time: 0.0, bpm: 120.0 },
                TempoEvent { time: 2.0, bpm: 60.0 },
            ],
            ..Score::default()
        };
        assert_abs_diff_eq!(s.seconds_to_beats(2.0), 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.seconds_to_beats(3.0), 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.beats_to_seconds(5.0), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.beats_to_seconds(1.0), 0.5, epsilon = 1e-12);
    }
}
