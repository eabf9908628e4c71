use std::fmt::Write as _;

use super::{
    chord_class, chord_value, duration_beats, duration_class, tempo_class, tempo_value, velocity_class,
    velocity_value, CompoundToken, Field, TokenType, TokenizerError, Vocab, MAX_BEATS_PER_BAR,
};
use crate::midi::{ChordLabel, Note, QuantizedScore, Score, TempoEvent, DEFAULT_BPM};

/// Encodes a grid score as Metric/Note tokens terminated by EOS.
///
/// A Metric token opens every beat up to the beat of the last onset; notes
/// follow their beat's Metric token in (cell, pitch) order.
pub fn encode(q: &QuantizedScore) -> Result<Vec<CompoundToken>, TokenizerError> {
    let last = q.notes.last().ok_or(TokenizerError::EmptyScore)?;
    let res = q.cells_per_beat();
    let beats_per_bar = q.cells_per_bar.div_ceil(res);
    if beats_per_bar > MAX_BEATS_PER_BAR {
        return Err(TokenizerError::BarTooLong(beats_per_bar));
    }
    let n_beats = last.onset_cell / res + 1;
    let mut out = Vec::with_capacity(q.notes.len() + n_beats + 1);
    let mut notes = q.notes.iter().peekable();
    for beat in 0..n_beats {
        let cell = beat * res;
        let tempo = q.beat_bpm.get(beat).copied().unwrap_or(DEFAULT_BPM);
        let chord = q.chord_at(cell).map(|c| chord_class(c.root, c.quality));
        out.push(CompoundToken::metric(cell % q.cells_per_bar, Some(tempo_class(tempo)), chord));
        while let Some(n) = notes.next_if(|n| n.onset_cell < cell + res) {
            out.push(CompoundToken::note(
                n.onset_cell % q.cells_per_bar,
                n.pitch,
                duration_class(n.duration_beats),
                velocity_class(n.velocity),
            ));
        }
    }
    out.push(CompoundToken::eos());
    Ok(out)
}

/// Rebuilds a score from tokens. Each Metric token advances one beat;
/// Note positions must fall inside the beat opened by the preceding
/// Metric token.
pub fn decode(tokens: &[CompoundToken], vocab: &Vocab) -> Result<Score, TokenizerError> {
    let malformed = |m: String| TokenizerError::MalformedSequence(m);
    for (position, t) in tokens.iter().enumerate() {
        for field in Field::ALL {
            let index = t.get(field);
            if !vocab.contains(field, index) {
                return Err(TokenizerError::UnknownIndex { position, field, index });
            }
        }
    }
    match tokens.first().and_then(CompoundToken::kind) {
        Some(TokenType::Metric) => {}
        _ => return Err(malformed("sequence must start with a Metric token".into())),
    }
    let eos = tokens
        .iter()
        .position(|t| t.kind() == Some(TokenType::Eos))
        .ok_or_else(|| malformed("missing EOS".into()))?;
    if eos != tokens.len() - 1 {
        return Err(malformed(format!("tokens after EOS at {eos}")));
    }

    let res = vocab.resolution.max(1) as usize;
    let mut beat_bpm: Vec<f64> = Vec::new();
    let mut beat_chord: Vec<Option<usize>> = Vec::new();
    let mut bar_starts: Vec<usize> = Vec::new();
    // (onset cell, pitch, duration beats, velocity)
    let mut raw: Vec<(usize, u8, f64, u8)> = Vec::new();
    let mut metric_pos = 0usize;

    for (i, t) in tokens[..eos].iter().enumerate() {
        if !t.is_valid() {
            return Err(malformed(format!("token {i} violates field rules")));
        }
        match t.kind() {
            Some(TokenType::Metric) => {
                if t.bar_beat == 0 {
                    return Err(malformed(format!("Metric token {i} has no position")));
                }
                metric_pos = t.bar_beat as usize - 1;
                let bpm = if t.tempo > 0 {
                    tempo_value(t.tempo as usize - 1)
                } else {
                    beat_bpm.last().copied().unwrap_or(DEFAULT_BPM)
                };
                if metric_pos == 0 {
                    bar_starts.push(beat_bpm.len());
                }
                beat_bpm.push(bpm);
                beat_chord.push((t.chord > 0).then(|| t.chord as usize - 1));
            }
            Some(TokenType::Note) => {
                let pos = t.bar_beat.checked_sub(1).ok_or_else(|| malformed(format!("Note token {i} has no position")))?
                    as usize;
                if pos < metric_pos || pos >= metric_pos + res {
                    return Err(malformed(format!("Note token {i} lies outside its beat")));
                }
                let beat = beat_bpm.len() - 1;
                raw.push((
                    beat * res + pos - metric_pos,
                    (t.pitch - 1) as u8,
                    duration_beats(t.duration as usize - 1),
                    velocity_value(t.velocity as usize - 1),
                ));
            }
            _ => return Err(malformed(format!("unexpected token {i}"))),
        }
    }

    let numerator = match bar_starts.as_slice() {
        [a, b, ..] => b - a,
        _ => 4,
    }
    .clamp(1, MAX_BEATS_PER_BAR);

    let mut tempo_map: Vec<TempoEvent> = Vec::new();
    let mut t = 0.0;
    for bpm in &beat_bpm {
        if tempo_map.last().map_or(true, |e| e.bpm != *bpm) {
            tempo_map.push(TempoEvent { time: t, bpm: *bpm });
        }
        t += 60.0 / bpm;
    }
    let mut score = Score {
        tempo_map,
        time_signature: (numerator as u8, 4),
        ..Score::default()
    };
    score.notes = raw
        .into_iter()
        .map(|(cell, pitch, dur, velocity)| {
            let start_beats = cell as f64 / res as f64;
            let onset = score.beats_to_seconds(start_beats);
            Note::new(pitch, onset, score.beats_to_seconds(start_beats + dur) - onset, velocity)
        })
        .collect();
    score.sort_notes();

    let mut chords: Vec<ChordLabel> = Vec::new();
    let mut prev = None;
    for (beat, c) in beat_chord.iter().enumerate() {
        if let Some(class) = c {
            if prev != Some(*class) {
                let (root, quality) = chord_value(*class);
                chords.push(ChordLabel { onset: score.beats_to_seconds(beat as f64), root, quality });
            }
        }
        prev = *c;
    }
    if !chords.is_empty() {
        score.chord_annotations = Some(chords);
    }
    Ok(score)
}

/// One token per line as seven space-separated indices.
pub fn write_tokens(tokens: &[CompoundToken]) -> String {
    let mut out = String::from("# type tempo chord bar_beat pitch duration velocity\n");
    for t in tokens {
        let a = t.to_array();
        let _ = writeln!(out, "{} {} {} {} {} {} {}", a[0], a[1], a[2], a[3], a[4], a[5], a[6]);
    }
    out
}

pub fn parse_tokens(text: &str) -> Result<Vec<CompoundToken>, TokenizerError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |reason: String| TokenizerError::MalformedDump { line: i + 1, reason };
        let vals = line
            .split_whitespace()
            .map(|v| v.parse::<u16>().map_err(|e| bad(format!("{e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let arr: [u16; 7] = vals
            .try_into()
            .map_err(|v: Vec<u16>| bad(format!("expected 7 fields, got {}", v.len())))?;
        out.push(CompoundToken::from_array(arr));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::midi::{quantize, ChordQuality, Note, Score};
    use crate::tokenizer::build_vocab;

    fn c4_quarter() -> Score {
        Score::with_notes(vec![Note::new(60, 0.0, 0.5, 96)], 120.0)
    }

    #[test]
    fn single_note_tokens() {
        let q = quantize(&c4_quarter(), 4).unwrap();
        let toks = encode(&q).unwrap();
        assert_eq!(
            toks,
            vec![
                CompoundToken::metric(0, Some(tempo_class(120.0)), None),
                CompoundToken::note(0, 60, duration_class(1.0), velocity_class(96)),
                CompoundToken::eos(),
            ]
        );
        let back = decode(&toks, &build_vocab(&[q]).unwrap()).unwrap();
        assert_eq!(back.notes.len(), 1);
        assert_eq!(back.notes[0].pitch, 60);
    }

    #[test]
    fn simultaneous_notes_ascending_pitch() {
        let s = Score::with_notes(vec![Note::new(64, 0.0, 0.5, 80), Note::new(60, 0.0, 0.5, 80)], 120.0);
        let toks = encode(&quantize(&s, 4).unwrap()).unwrap();
        assert_eq!(toks[1].pitch, 61);
        assert_eq!(toks[2].pitch, 65);
    }

    #[test]
    fn decode_errors() {
        let q = quantize(&c4_quarter(), 4).unwrap();
        let vocab = build_vocab(&[q.clone()]).unwrap();
        let toks = encode(&q).unwrap();
        assert!(matches!(decode(&toks[..2], &vocab), Err(TokenizerError::MalformedSequence(_))));
        assert!(matches!(decode(&toks[1..], &vocab), Err(TokenizerError::MalformedSequence(_))));
        let mut unknown = toks.clone();
        unknown[1].pitch = 62;
        assert!(matches!(
            decode(&unknown, &vocab),
            Err(TokenizerError::UnknownIndex { position: 1, field: Field::Pitch, index: 62 })
        ));
        let mut outside = toks;
        outside[1].bar_beat = 9;
        assert!(matches!(decode(&outside, &Vocab::full(4)), Err(TokenizerError::MalformedSequence(_))));
    }

    #[test]
    fn chords_survive_round_trip() {
        let mut s = Score::with_notes(
            (0..8).map(|i| Note::new(60 + i, i as f64 * 0.5, 0.5, 80)).collect(),
            120.0,
        );
        s.chord_annotations = Some(vec![
            ChordLabel { onset: 0.0, root: 0, quality: ChordQuality::Maj },
            ChordLabel { onset: 2.0, root: 7, quality: ChordQuality::Dom7 },
        ]);
        let q = quantize(&s, 4).unwrap();
        let toks = encode(&q).unwrap();
        let back = decode(&toks, &Vocab::full(4)).unwrap();
        assert_eq!(back.chord_annotations.as_ref().unwrap().len(), 2);
        assert_eq!(encode(&quantize(&back, 4).unwrap()).unwrap(), toks);
    }

    #[test]
    fn dump_round_trip() {
        let toks = encode(&quantize(&c4_quarter(), 4).unwrap()).unwrap();
        let text = write_tokens(&toks);
        assert_eq!(parse_tokens(&text).unwrap(), toks);
        assert!(parse_tokens("1 2 3\n").is_err());
    }

    #[test]
    fn rejects_long_bars() {
        let mut s = c4_quarter();
        s.time_signature = (17, 4);
        let q = quantize(&s, 4).unwrap();
        assert_eq!(encode(&q), Err(TokenizerError::BarTooLong(17)));
    }
}
