//! Beat-grid view of a score.

use serde::{Deserialize, Serialize};

use super::{ChordQuality, MidiError, Score};

pub const VALID_RESOLUTIONS: [u32; 6] = [1, 2, 4, 8, 12, 16];

/// Pitch sets for one grid cell, stored as 128-bit pitch masks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub sounding: u128,
    pub onsets: u128,
}

impl Cell {
    pub fn sounding_count(&self) -> u32 {
        self.sounding.count_ones()
    }

    pub fn has_onset(&self) -> bool {
        self.onsets != 0
    }

    pub fn highest_onset(&self) -> Option<u8> {
        highest(self.onsets)
    }

    pub fn sounding_pitches(&self) -> impl Iterator<Item = u8> + '_ {
        (0..128u8).filter(move |p| self.sounding >> p & 1 == 1)
    }

    pub fn onset_pitches(&self) -> impl Iterator<Item = u8> + '_ {
        (0..128u8).filter(move |p| self.onsets >> p & 1 == 1)
    }
}

fn highest(mask: u128) -> Option<u8> {
    (mask != 0).then(|| 127 - mask.leading_zeros() as u8)
}

/// A note snapped to the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QNote {
    pub pitch: u8,
    pub velocity: u8,
    pub onset_cell: usize,
    /// Exclusive; always greater than `onset_cell`.
    pub end_cell: usize,
    /// Unquantized length in quarter-note beats.
    pub duration_beats: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellChord {
    pub cell: usize,
    pub root: u8,
    pub quality: ChordQuality,
}

impl CellChord {
    pub fn mask(&self) -> u16 {
        super::chords::chord_mask(self.root, self.quality)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedScore {
    /// Cells per quarter-note beat.
    pub resolution: u32,
    pub time_signature: (u8, u8),
    pub cells_per_bar: usize,
    /// Padded to a whole number of bars.
    pub cells: Vec<Cell>,
    /// Notes ordered by onset cell, then pitch.
    pub notes: Vec<QNote>,
    /// Tempo in effect at the start of each beat of the padded grid.
    pub beat_bpm: Vec<f64>,
    /// Sorted by cell.
    pub chords: Option<Vec<CellChord>>,
}

impl QuantizedScore {
    pub fn cells_per_beat(&self) -> usize {
        self.resolution as usize
    }

    pub fn n_beats(&self) -> usize {
        self.cells.len() / self.cells_per_beat()
    }

    pub fn n_bars(&self) -> usize {
        self.cells.len() / self.cells_per_bar
    }

    /// Cell range of each bar.
    pub fn bars(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        (0..self.n_bars()).map(move |b| b * self.cells_per_bar..(b + 1) * self.cells_per_bar)
    }

    pub fn is_empty(&self) -> bool {
        self.notes.is_empty()
    }

    /// Chord in effect at `cell`, if any.
    pub fn chord_at(&self, cell: usize) -> Option<CellChord> {
        let chords = self.chords.as_ref()?;
        let idx = chords.partition_point(|c| c.cell <= cell);
        (idx > 0).then(|| chords[idx - 1])
    }

    /// Skyline melody: for every cell with an onset, the highest-pitched
    /// note starting there.
    pub fn melody(&self) -> Vec<QNote> {
        let mut out: Vec<QNote> = Vec::new();
        for n in &self.notes {
            match out.last_mut() {
                Some(last) if last.onset_cell == n.onset_cell => {
                    if n.pitch >= last.pitch {
                        *last = *n;
                    }
                }
                _ => out.push(*n),
            }
        }
        out
    }
}

/// Snaps a position (in cells) to the nearest cell, halves going to the
/// later cell.
pub(crate) fn snap(cells: f64) -> usize {
    (cells + 0.5 + 1e-9).floor().max(0.0) as usize
}

pub fn quantize(score: &Score, resolution: u32) -> Result<QuantizedScore, MidiError> {
    if !VALID_RESOLUTIONS.contains(&resolution) {
        return Err(MidiError::InvalidResolution(resolution));
    }
    if score.notes.is_empty() {
        return Err(MidiError::EmptyScore);
    }
    let (num, den) = score.time_signature;
    let bar_units = resolution as usize * num as usize * 4;
    if den == 0 || bar_units % den as usize != 0 {
        return Err(MidiError::UnsupportedMeter(num, den));
    }
    let cells_per_bar = bar_units / den as usize;
    if cells_per_bar == 0 {
        return Err(MidiError::UnsupportedMeter(num, den));
    }
    let res = f64::from(resolution);

    let mut notes: Vec<QNote> = score
        .notes
        .iter()
        .map(|n| {
            let on_beats = score.seconds_to_beats(n.onset);
            let end_beats = score.seconds_to_beats(n.end());
            let onset_cell = snap(on_beats * res);
            QNote {
                pitch: n.pitch,
                velocity: n.velocity,
                onset_cell,
                end_cell: snap(end_beats * res).max(onset_cell + 1),
                duration_beats: end_beats - on_beats,
            }
        })
        .collect();
    notes.sort_by(|a, b| a.onset_cell.cmp(&b.onset_cell).then(a.pitch.cmp(&b.pitch)));

    let content = notes.iter().map(|n| n.end_cell).max().unwrap_or(0);
    let n_cells = content.div_ceil(cells_per_bar).max(1) * cells_per_bar;
    let mut cells = vec![Cell::default(); n_cells];
    for n in &notes {
        let bit = 1u128 << n.pitch;
        cells[n.onset_cell].onsets |= bit;
        for c in &mut cells[n.onset_cell..n.end_cell] {
            c.sounding |= bit;
        }
    }

    let beat_bpm = (0..n_cells / resolution as usize)
        .map(|b| score.bpm_at(score.beats_to_seconds(b as f64) + 1e-9))
        .collect();

    let chords = score.chord_annotations.as_ref().map(|chords| {
        let mut v: Vec<CellChord> = chords
            .iter()
            .map(|c| CellChord {
                cell: snap(score.seconds_to_beats(c.onset) * res),
                root: c.root,
                quality: c.quality,
            })
            .collect();
        v.sort_by_key(|c| c.cell);
        v
    });

    Ok(QuantizedScore {
        resolution,
        time_signature: score.time_signature,
        cells_per_bar,
        cells,
        notes,
        beat_bpm,
        chords,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::midi::Note;

    #[test]
    fn nearest_cell() {
        let s = Score::with_notes(vec![Note::new(60, 0.26, 0.2, 80)], 120.0);
        let q = quantize(&s, 4).unwrap();
        assert_eq!(q.notes[0].onset_cell, 2);
        assert_eq!(q.cells.len(), 16);
    }

    #[test]
    fn simultaneous_onsets_share_cell() {
        let s = Score::with_notes(vec![Note::new(64, 0.5, 0.5, 80), Note::new(60, 0.5, 0.5, 80)], 120.0);
        let q = quantize(&s, 4).unwrap();
        assert_eq!(q.notes[0].onset_cell, q.notes[1].onset_cell);
        let cell = q.cells[4];
        assert_eq!(cell.onset_pitches().collect::<Vec<_>>(), vec![60, 64]);
        assert_eq!(cell.highest_onset(), Some(64));
    }

    #[test]
    fn half_goes_to_later_cell() {
        // 0.0625 s at 120 bpm is exactly half a sixteenth.
        let s = Score::with_notes(vec![Note::new(60, 0.0625, 0.5, 80)], 120.0);
        assert_eq!(quantize(&s, 4).unwrap().notes[0].onset_cell, 1);
    }

    #[test]
    fn errors() {
        let s = Score::with_notes(vec![Note::new(60, 0.0, 0.5, 80)], 120.0);
        assert_eq!(quantize(&s, 3), Err(MidiError::InvalidResolution(3)));
        assert_eq!(quantize(&Score::default(), 4), Err(MidiError::EmptyScore));
        let mut odd = s.clone();
        odd.time_signature = (3, 16);
        assert!(matches!(quantize(&odd, 1), Err(MidiError::UnsupportedMeter(3, 16))));
        assert!(quantize(&odd, 4).is_ok());
    }

    #[test]
    fn sustain_marks_overlapped_cells() {
        let s = Score::with_notes(vec![Note::new(60, 0.0, 0.5, 80)], 120.0);
        let q = quantize(&s, 4).unwrap();
        assert_eq!(q.notes[0].end_cell, 4);
        assert!(q.cells[..4].iter().all(|c| c.sounding_count() == 1));
        assert!(q.cells[4..].iter().all(|c| c.sounding == 0));
    }
}
