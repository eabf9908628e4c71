use crate::midi::{QuantizedScore, Score};
use crate::tokenizer::{duration_class, DURATION_CLASSES};

use super::{entropy_bits, MetricError};

const N_DUR: usize = DURATION_CLASSES.len();

/// Mean gap between successive distinct onset times, in seconds.
pub fn avg_ioi(score: &Score) -> Result<f64, MetricError> {
    if score.notes.is_empty() {
        return Err(MetricError::EmptyScore);
    }
    let mut onsets: Vec<f64> = score.notes.iter().map(|n| n.onset).collect();
    onsets.sort_by(f64::total_cmp);
    onsets.dedup_by(|a, b| (*a - *b).abs() <= 1e-9);
    if onsets.len() < 2 {
        return Err(MetricError::InsufficientNotes);
    }
    Ok((onsets[onsets.len() - 1] - onsets[0]) / (onsets.len() - 1) as f64)
}

/// Row-normalized transition matrix between duration classes of
/// consecutive melody notes, and the mean entropy of supported rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Nltm {
    pub matrix: [[f64; N_DUR]; N_DUR],
    pub counts: [[usize; N_DUR]; N_DUR],
    pub scalar: f64,
}

pub fn nltm(q: &QuantizedScore) -> Result<Nltm, MetricError> {
    if q.is_empty() {
        return Err(MetricError::EmptyScore);
    }
    let mel = q.melody();
    if mel.len() < 2 {
        return Err(MetricError::InsufficientNotes);
    }
    let mut counts = [[0usize; N_DUR]; N_DUR];
    for w in mel.windows(2) {
        counts[duration_class(w[0].duration_beats)][duration_class(w[1].duration_beats)] += 1;
    }
    let mut matrix = [[0.0; N_DUR]; N_DUR];
    let (mut ent, mut rows) = (0.0, 0usize);
    for (r, row) in counts.iter().enumerate() {
        let total: usize = row.iter().sum();
        if total == 0 {
            continue;
        }
        for (c, &k) in row.iter().enumerate() {
            matrix[r][c] = k as f64 / total as f64;
        }
        ent += entropy_bits(row);
        rows += 1;
    }
    Ok(Nltm { matrix, counts, scalar: ent / rows as f64 })
}

/// Fraction of beats on the bar-padded grid with no note onset.
pub fn empty_beat_rate(q: &QuantizedScore) -> Result<f64, MetricError> {
    if q.is_empty() {
        return Err(MetricError::EmptyScore);
    }
    let beats = q.cells.chunks(q.cells_per_beat());
    let n = beats.len();
    let empty = beats.filter(|b| !b.iter().any(|c| c.has_onset())).count();
    Ok(empty as f64 / n as f64)
}

/// Mean cosine similarity of binary onset vectors of consecutive bars,
/// skipping pairs where either bar has no onset.
pub fn groove_consistency(q: &QuantizedScore) -> Result<f64, MetricError> {
    if q.is_empty() {
        return Err(MetricError::EmptyScore);
    }
    let bars: Vec<Vec<bool>> = q.bars().map(|r| q.cells[r].iter().map(|c| c.has_onset()).collect()).collect();
    let (mut sum, mut pairs) = (0.0, 0usize);
    for w in bars.windows(2) {
        let a = w[0].iter().filter(|&&x| x).count();
        let b = w[1].iter().filter(|&&x| x).count();
        if a == 0 || b == 0 {
            continue;
        }
        let dot = w[0].iter().zip(&w[1]).filter(|(x, y)| **x && **y).count();
        sum += dot as f64 / ((a * b) as f64).sqrt();
        pairs += 1;
    }
    if pairs == 0 {
        return Err(MetricError::InsufficientBars);
    }
    Ok(sum / pairs as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::midi::{quantize, Note};

    fn from_beats(notes: &[(u8, f64, f64)]) -> QuantizedScore {
        // 120 bpm: one beat is half a second.
        let notes = notes.iter().map(|&(p, on, d)| Note::new(p, on * 0.5, d * 0.5, 80)).collect();
        quantize(&Score::with_notes(notes, 120.0), 4).unwrap()
    }

    #[test]
    fn ioi() {
        let s = Score::with_notes(
            vec![Note::new(60, 0.0, 0.5, 80), Note::new(64, 0.0, 0.5, 80), Note::new(62, 0.5, 0.5, 80), Note::new(60, 1.0, 0.5, 80)],
            120.0,
        );
        assert_eq!(avg_ioi(&s).unwrap(), 0.5);
        let single = Score::with_notes(vec![Note::new(60, 0.0, 1.0, 80)], 120.0);
        assert_eq!(avg_ioi(&single), Err(MetricError::InsufficientNotes));
    }

    #[test]
    fn nltm_quarters_and_alternation() {
        let quarters: Vec<_> = (0..8).map(|i| (60, i as f64, 1.0)).collect();
        let m = nltm(&from_beats(&quarters)).unwrap();
        assert_eq!(m.matrix[3][3], 1.0);
        assert_eq!(m.scalar, 0.0);
        let mut alt = Vec::new();
        let mut t = 0.0;
        for i in 0..8 {
            let d = if i % 2 == 0 { 1.0 } else { 0.5 };
            alt.push((60, t, d));
            t += d;
        }
        let m = nltm(&from_beats(&alt)).unwrap();
        assert_eq!(m.matrix[3][1], 1.0);
        assert_eq!(m.matrix[1][3], 1.0);
        assert_eq!(m.scalar, 0.0);
    }

    #[test]
    fn empty_beats() {
        let every: Vec<_> = (0..4).map(|i| (60, i as f64, 1.0)).collect();
        assert_eq!(empty_beat_rate(&from_beats(&every)).unwrap(), 0.0);
        assert_eq!(empty_beat_rate(&from_beats(&[(60, 0.0, 1.0), (60, 2.0, 2.0)])).unwrap(), 0.5);
    }

    #[test]
    fn groove() {
        let same: Vec<_> = (0..8).map(|i| (60, i as f64, 1.0)).collect();
        assert!((groove_consistency(&from_beats(&same)).unwrap() - 1.0).abs() < 1e-12);
        let orth = [(60, 0.0, 1.0), (60, 2.0, 1.0), (60, 5.0, 1.0), (60, 7.0, 1.0)];
        assert_eq!(groove_consistency(&from_beats(&orth)).unwrap(), 0.0);
        assert_eq!(groove_consistency(&from_beats(&[(60, 0.0, 1.0)])), Err(MetricError::InsufficientBars));
    }
}
