//! Fixed class universes for the attribute fields.

use crate::midi::ChordQuality;

/// Note lengths in quarter-note beats.
pub const DURATION_CLASSES: [f64; 8] = [0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0];
pub const VELOCITY_CLASSES: usize = 8;
pub const TEMPO_CLASSES: usize = 16;
pub const TEMPO_MIN_BPM: f64 = 40.0;
pub const TEMPO_MAX_BPM: f64 = 240.0;
pub const CHORD_CLASSES: usize = 12 * 6;
pub const MAX_BEATS_PER_BAR: usize = 16;
/// Largest bar (16 beats) at the finest grid (16 cells per beat).
pub const MAX_BAR_POSITIONS: usize = MAX_BEATS_PER_BAR * 16;

/// Nearest duration class; ties go to the shorter class.
pub fn duration_class(beats: f64) -> usize {
    let mut best = 0;
    for (i, c) in DURATION_CLASSES.iter().enumerate() {
        if (beats - c).abs() < (beats - DURATION_CLASSES[best]).abs() {
            best = i;
        }
    }
    best
}

pub fn duration_beats(class: usize) -> f64 {
    DURATION_CLASSES[class]
}

/// Eight equal-width bins over velocities 1..=127.
pub fn velocity_class(velocity: u8) -> usize {
    let v = velocity.clamp(1, 127) as usize;
    ((v - 1) * VELOCITY_CLASSES / 127).min(VELOCITY_CLASSES - 1)
}

/// Bin centre, rounded to an integer velocity.
pub fn velocity_value(class: usize) -> u8 {
    let width = 127.0 / VELOCITY_CLASSES as f64;
    (1.0 + (class as f64 + 0.5) * width).round() as u8
}

/// Sixteen log-spaced bins over 40..240 BPM; tempi outside the range fall
/// into the end bins.
pub fn tempo_class(bpm: f64) -> usize {
    let span = (TEMPO_MAX_BPM / TEMPO_MIN_BPM).ln();
    let x = (bpm / TEMPO_MIN_BPM).ln() / span * TEMPO_CLASSES as f64;
    if x.is_nan() || x < 0.0 {
        0
    } else {
        (x.floor() as usize).min(TEMPO_CLASSES - 1)
    }
}

/// Geometric centre of a tempo bin.
pub fn tempo_value(class: usize) -> f64 {
    let ratio = TEMPO_MAX_BPM / TEMPO_MIN_BPM;
    TEMPO_MIN_BPM * ratio.powf((class as f64 + 0.5) / TEMPO_CLASSES as f64)
}

pub fn chord_class(root: u8, quality: ChordQuality) -> usize {
    (root as usize % 12) * ChordQuality::ALL.len() + quality.index()
}

pub fn chord_value(class: usize) -> (u8, ChordQuality) {
    let n = ChordQuality::ALL.len();
    ((class / n) as u8, ChordQuality::ALL[class % n])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn velocity_bin_edges() {
        assert_eq!(velocity_class(127), 7);
        assert_eq!(velocity_class(1), 0);
        for c in 0..VELOCITY_CLASSES {
            assert_eq!(velocity_class(velocity_value(c)), c);
        }
        // Bins cover 1..=127 monotonically.
        let mut prev = 0;
        for v in 1..=127u8 {
            let c = velocity_class(v);
            assert!(c == prev || c == prev + 1);
            prev = c;
        }
        assert_eq!(prev, 7);
    }

    #[test]
    fn nearest_duration_matches_brute_force() {
        assert_eq!(DURATION_CLASSES[duration_class(1.4)], 1.5);
        for i in 0..=500 {
            let beats = i as f64 * 0.01;
            let c = duration_class(beats);
            let d = (beats - DURATION_CLASSES[c]).abs();
            assert!(DURATION_CLASSES.iter().all(|x| (beats - x).abs() >= d - 1e-15));
        }
    }

    #[test]
    fn tempo_bins() {
        assert_eq!(tempo_class(40.0), 0);
        assert_eq!(tempo_class(239.9), 15);
        assert_eq!(tempo_class(500.0), 15);
        assert_eq!(tempo_class(10.0), 0);
        for c in 0..TEMPO_CLASSES {
            assert_eq!(tempo_class(tempo_value(c)), c);
        }
        // 120 bpm sits in bin floor(16 * ln 3 / ln 6) = 9.
        assert_eq!(tempo_class(120.0), 9);
    }

    #[test]
    fn chord_classes_biject() {
        for c in 0..CHORD_CLASSES {
            let (r, q) = chord_value(c);
            assert_eq!(chord_class(r, q), c);
        }
    }
}
