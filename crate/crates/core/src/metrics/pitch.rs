use crate::midi::{QuantizedScore, Score};

use super::{entropy_bits, MetricError};

fn pitches(score: &Score) -> Result<impl Iterator<Item = u8> + '_, MetricError> {
    if score.notes.is_empty() {
        return Err(MetricError::EmptyScore);
    }
    Ok(score.notes.iter().map(|n| n.pitch))
}

pub fn pitch_count(score: &Score) -> Result<usize, MetricError> {
    let mut seen = 0u128;
    for p in pitches(score)? {
        seen |= 1 << p;
    }
    Ok(seen.count_ones() as usize)
}

pub fn pitch_range(score: &Score) -> Result<u8, MetricError> {
    let (lo, hi) = pitches(score)?.fold((u8::MAX, 0), |(lo, hi), p| (lo.min(p), hi.max(p)));
    Ok(hi - lo)
}

/// Mean absolute interval between consecutive melody notes.
pub fn avg_pitch_interval(q: &QuantizedScore) -> Result<f64, MetricError> {
    if q.is_empty() {
        return Err(MetricError::EmptyScore);
    }
    let mel = q.melody();
    if mel.len() < 2 {
        return Err(MetricError::InsufficientNotes);
    }
    let sum: u32 = mel.windows(2).map(|w| u32::from(w[0].pitch.abs_diff(w[1].pitch))).sum();
    Ok(f64::from(sum) / (mel.len() - 1) as f64)
}

pub fn pitch_entropy(score: &Score) -> Result<f64, MetricError> {
    let mut hist = [0usize; 128];
    for p in pitches(score)? {
        hist[p as usize] += 1;
    }
    Ok(entropy_bits(&hist))
}

pub fn pitch_class_entropy(score: &Score) -> Result<f64, MetricError> {
    Ok(entropy_bits(&pitch_class_histogram(score)?))
}

pub(crate) fn pitch_class_histogram(score: &Score) -> Result<[usize; 12], MetricError> {
    let mut hist = [0usize; 12];
    for p in pitches(score)? {
        hist[p as usize % 12] += 1;
    }
    Ok(hist)
}

/// Pitch-class mask of the major scale on `root`.
pub fn major_scale(root: u8) -> u16 {
    [0u8, 2, 4, 5, 7, 9, 11].iter().fold(0u16, |m, i| m | 1 << ((root + i) % 12))
}

/// Fraction of notes whose pitch class lies in `scale` (a 12-bit mask).
/// Without a scale, the best of the 12 major scales is used, ties going to
/// the lowest root.
pub fn pitch_in_scale_rate(score: &Score, scale: Option<u16>) -> Result<f64, MetricError> {
    let hist = pitch_class_histogram(score)?;
    let total: usize = hist.iter().sum();
    let in_scale = |mask: u16| (0..12).filter(|c| mask >> c & 1 == 1).map(|c| hist[c]).sum::<usize>();
    let hits = match scale {
        Some(mask) => in_scale(mask),
        None => (0..12).map(|r| in_scale(major_scale(r))).max().unwrap_or(0),
    };
    Ok(hits as f64 / total as f64)
}

/// Mean sounding-pitch count over non-silent cells, and the fraction of
/// those cells with at least two sounding pitches.
pub fn polyphony(q: &QuantizedScore) -> Result<(f64, f64), MetricError> {
    let (mut cells, mut sum, mut poly) = (0usize, 0usize, 0usize);
    for c in &q.cells {
        let k = c.sounding_count() as usize;
        if k > 0 {
            cells += 1;
            sum += k;
            poly += usize::from(k >= 2);
        }
    }
    if cells == 0 {
        return Err(MetricError::EmptyScore);
    }
    Ok((sum as f64 / cells as f64, poly as f64 / cells as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::midi::{quantize, Note};

    fn seq(pitches: &[u8]) -> Score {
        let notes = pitches.iter().enumerate().map(|(i, &p)| Note::new(p, i as f64 * 0.5, 0.5, 80)).collect();
        Score::with_notes(notes, 120.0)
    }

    #[test]
    fn counts_and_ranges() {
        assert_eq!(pitch_count(&seq(&[60; 10])).unwrap(), 1);
        let chromatic: Vec<u8> = (60..72).collect();
        assert_eq!(pitch_count(&seq(&chromatic)).unwrap(), 12);
        assert_eq!(pitch_range(&seq(&[60])).unwrap(), 0);
        assert_eq!(pitch_range(&seq(&[60, 72])).unwrap(), 12);
        assert_eq!(pitch_count(&Score::default()), Err(MetricError::EmptyScore));
    }

    #[test]
    fn intervals() {
        let q = quantize(&seq(&[60, 62, 64, 66, 68, 70]), 4).unwrap();
        assert_eq!(avg_pitch_interval(&q).unwrap(), 2.0);
        let q = quantize(&seq(&[60]), 4).unwrap();
        assert_eq!(avg_pitch_interval(&q), Err(MetricError::InsufficientNotes));
    }

    #[test]
    fn entropies() {
        assert_eq!(pitch_entropy(&seq(&[60; 5])).unwrap(), 0.0);
        assert!((pitch_entropy(&seq(&[60, 61, 62, 63])).unwrap() - 2.0).abs() < 1e-12);
        let chromatic: Vec<u8> = (60..72).collect();
        assert!((pitch_entropy(&seq(&chromatic)).unwrap() - 3.5850).abs() < 1e-4);
        assert!((pitch_class_entropy(&seq(&chromatic)).unwrap() - 12f64.log2()).abs() < 1e-12);
        assert_eq!(pitch_class_entropy(&seq(&[48, 60, 72])).unwrap(), 0.0);
    }

    #[test]
    fn scale_rate() {
        let c_major = seq(&[60, 62, 64, 65, 67, 69, 71]);
        assert_eq!(pitch_in_scale_rate(&c_major, Some(major_scale(0))).unwrap(), 1.0);
        let chromatic: Vec<u8> = (60..72).collect();
        assert!((pitch_in_scale_rate(&seq(&chromatic), None).unwrap() - 7.0 / 12.0).abs() < 1e-12);
        assert!((pitch_in_scale_rate(&seq(&chromatic), Some(major_scale(5))).unwrap() - 7.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn polyphony_textures() {
        let mut notes = Vec::new();
        for i in 0..8 {
            notes.push(Note::new(60, i as f64 * 0.5, 0.5, 80));
            notes.push(Note::new(64, i as f64 * 0.5, 0.5, 80));
        }
        let q = quantize(&Score::with_notes(notes, 120.0), 4).unwrap();
        assert_eq!(polyphony(&q).unwrap(), (2.0, 1.0));
        let q = quantize(&seq(&[60, 62, 64]), 4).unwrap();
        assert_eq!(polyphony(&q).unwrap(), (1.0, 0.0));
    }
}
