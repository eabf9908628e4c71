use crate::midi::{CellChord, ChordQuality, QuantizedScore};

use super::MetricError;

/// Consonance score of the interval class (melody minus chord tone, mod 12).
pub const INTERVAL_SCORE: [i8; 12] = [1, -1, -1, 1, 1, 0, -1, 1, 1, 1, -1, -1];

fn chords(q: &QuantizedScore) -> Result<&[CellChord], MetricError> {
    match &q.chords {
        Some(c) if !c.is_empty() => Ok(c),
        _ => Err(MetricError::MissingChords),
    }
}

fn chord_tones(mask: u16) -> impl Iterator<Item = u8> {
    (0..12u8).filter(move |c| mask >> c & 1 == 1)
}

/// Mean over 16th-note windows of the melody note's consonance against the
/// chord in effect. Grids coarser than 16ths use one window per cell.
pub fn pitch_consonance_score(q: &QuantizedScore) -> Result<f64, MetricError> {
    chords(q)?;
    if q.is_empty() {
        return Err(MetricError::EmptyScore);
    }
    let step = (q.cells_per_beat() / 4).max(1);
    let mel = q.melody();
    let (mut sum, mut n) = (0.0, 0usize);
    let mut idx = 0;
    for start in (0..q.cells.len()).step_by(step) {
        while idx + 1 < mel.len() && mel[idx + 1].onset_cell <= start {
            idx += 1;
        }
        let Some(note) = mel.get(idx).filter(|m| m.onset_cell <= start && start < m.end_cell) else {
            continue;
        };
        let Some(chord) = q.chord_at(start) else {
            continue;
        };
        let pc = note.pitch % 12;
        let (mut s, mut k) = (0i32, 0i32);
        for t in chord_tones(chord.mask()) {
            s += i32::from(INTERVAL_SCORE[((pc + 12 - t) % 12) as usize]);
            k += 1;
        }
        sum += f64::from(s) / f64::from(k);
        n += 1;
    }
    if n == 0 {
        return Err(MetricError::InsufficientNotes);
    }
    Ok(sum / n as f64)
}

/// `(n_c + n_p) / (n_c + n_n)` over melody notes that have a concurrent
/// chord: chord tones, non-chord tones, and non-chord tones resolving by at
/// most two semitones into a following chord tone.
pub fn ctnctr(q: &QuantizedScore) -> Result<f64, MetricError> {
    chords(q)?;
    if q.is_empty() {
        return Err(MetricError::EmptyScore);
    }
    let mel = q.melody();
    let tone: Vec<Option<bool>> =
        mel.iter().map(|m| q.chord_at(m.onset_cell).map(|c| c.mask() >> (m.pitch % 12) & 1 == 1)).collect();
    let (mut nc, mut nn, mut np) = (0usize, 0usize, 0usize);
    for (i, t) in tone.iter().enumerate() {
        match t {
            Some(true) => nc += 1,
            Some(false) => {
                nn += 1;
                if tone.get(i + 1) == Some(&Some(true)) && mel[i].pitch.abs_diff(mel[i + 1].pitch) <= 2 {
                    np += 1;
                }
            }
            None => {}
        }
    }
    if nc + nn == 0 {
        return Err(MetricError::InsufficientNotes);
    }
    Ok((nc + np) as f64 / (nc + nn) as f64)
}

/// Best chord template per window of `window_beats` beats by pitch-class
/// overlap. Ties go to the lowest root, then quality order; empty windows
/// repeat the previous chord.
pub fn infer_chords(q: &QuantizedScore, window_beats: usize) -> Result<Vec<CellChord>, MetricError> {
    if window_beats == 0 {
        return Err(MetricError::InvalidArgument("window must be at least one beat".into()));
    }
    Ok(infer_chords_cells(q, window_beats * q.cells_per_beat()))
}

pub(crate) fn infer_chords_cells(q: &QuantizedScore, width: usize) -> Vec<CellChord> {
    let mut out: Vec<CellChord> = Vec::new();
    for start in (0..q.cells.len()).step_by(width) {
        let end = (start + width).min(q.cells.len());
        let mut pcs = 0u16;
        for c in &q.cells[start..end] {
            for p in c.sounding_pitches() {
                pcs |= 1 << (p % 12);
            }
        }
        if pcs == 0 {
            if let Some(prev) = out.last().copied() {
                out.push(CellChord { cell: start, ..prev });
            }
            continue;
        }
        let mut best = (0u32, 0u8, ChordQuality::Maj);
        for root in 0..12u8 {
            for quality in ChordQuality::ALL {
                let overlap = (pcs & CellChord { cell: 0, root, quality }.mask()).count_ones();
                if overlap > best.0 {
                    best = (overlap, root, quality);
                }
            }
        }
        out.push(CellChord { cell: start, root: best.1, quality: best.2 });
    }
    out
}
