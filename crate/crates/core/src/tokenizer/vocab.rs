use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{
    chord_value, duration_beats, encode, tempo_value, velocity_value, CompoundToken, Field, TokenType,
    TokenizerError,
};
use crate::midi::QuantizedScore;

pub const VOCAB_VERSION: u32 = 1;

/// Per-field tables of the indices a corpus uses, NONE (index 0) always
/// included. Each table is a bijection between an index and its label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    pub resolution: u32,
    tables: Vec<BTreeSet<u16>>,
}

impl Vocab {
    /// Vocabulary admitting every index of every field.
    pub fn full(resolution: u32) -> Self {
        Self {
            resolution,
            tables: Field::ALL.iter().map(|f| (0..f.size() as u16).collect()).collect(),
        }
    }

    pub fn contains(&self, field: Field, index: u16) -> bool {
        self.tables[field.position()].contains(&index)
    }

    pub fn indices(&self, field: Field) -> impl Iterator<Item = u16> + '_ {
        self.tables[field.position()].iter().copied()
    }

    pub fn table_len(&self, field: Field) -> usize {
        self.tables[field.position()].len()
    }

    /// Universe sizes, which fix model input and output widths.
    pub fn field_sizes(&self) -> [usize; 7] {
        Field::ALL.map(Field::size)
    }

    /// Human-readable value for an index.
    pub fn label(field: Field, index: u16) -> String {
        if index == 0 {
            return "NONE".into();
        }
        let i = index as usize - 1;
        match field {
            Field::Type => match TokenType::from_index(index) {
                Some(TokenType::Metric) => "Metric".into(),
                Some(TokenType::Note) => "Note".into(),
                Some(TokenType::Eos) => "EOS".into(),
                None => "?".into(),
            },
            Field::Tempo => format!("{:.3}bpm", tempo_value(i)),
            Field::Chord => {
                let (root, q) = chord_value(i);
                format!("{root}:{q}")
            }
            Field::BarBeat => format!("cell{i}"),
            Field::Pitch => format!("{i}"),
            Field::Duration => format!("{}beats", duration_beats(i)),
            Field::Velocity => format!("v{}", velocity_value(i)),
        }
    }

    /// Versioned text form: header lines, then `field index label` rows.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# compound-word vocabulary");
        let _ = writeln!(out, "version {VOCAB_VERSION}");
        let _ = writeln!(out, "resolution {}", self.resolution);
        for field in Field::ALL {
            for idx in self.indices(field) {
                let _ = writeln!(out, "{} {} {}", field.name(), idx, Self::label(field, idx));
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, TokenizerError> {
        let mut version = None;
        let mut resolution = None;
        let mut tables: Vec<BTreeSet<u16>> = vec![BTreeSet::new(); 7];
        for (i, line) in text.lines().enumerate() {
            let bad = |reason: String| TokenizerError::MalformedVocab { line: i + 1, reason };
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            match parts.as_slice() {
                ["version", v] => {
                    let v: u32 = v.parse().map_err(|e| bad(format!("{e}")))?;
                    if v != VOCAB_VERSION {
                        return Err(bad(format!("unsupported version {v}")));
                    }
                    version = Some(v);
                }
                ["resolution", r] => resolution = Some(r.parse().map_err(|e| bad(format!("{e}")))?),
                [name, idx, label] => {
                    let field = Field::ALL
                        .into_iter()
                        .find(|f| f.name() == *name)
                        .ok_or_else(|| bad(format!("unknown field {name}")))?;
                    let idx: u16 = idx.parse().map_err(|e| bad(format!("{e}")))?;
                    if idx as usize >= field.size() {
                        return Err(bad(format!("index {idx} out of range for {name}")));
                    }
                    if Self::label(field, idx) != *label {
                        return Err(bad(format!("label {label} does not match index {idx}")));
                    }
                    tables[field.position()].insert(idx);
                }
                _ => return Err(bad(format!("unrecognized line {line:?}"))),
            }
        }
        if version.is_none() {
            return Err(TokenizerError::MalformedVocab { line: 0, reason: "missing version".into() });
        }
        let resolution = resolution
            .ok_or(TokenizerError::MalformedVocab { line: 0, reason: "missing resolution".into() })?;
        for t in &mut tables {
            t.insert(0);
        }
        Ok(Self { resolution, tables })
    }

    fn observe(&mut self, token: &CompoundToken) {
        for field in Field::ALL {
            self.tables[field.position()].insert(token.get(field));
        }
    }
}

/// Collects the classes a corpus uses. All scores must share one grid
/// resolution.
pub fn build_vocab(corpus: &[QuantizedScore]) -> Result<Vocab, TokenizerError> {
    let first = corpus.first().ok_or(TokenizerError::EmptyCorpus)?;
    let mut vocab = Vocab { resolution: first.resolution, tables: vec![BTreeSet::from([0]); 7] };
    for q in corpus {
        if q.resolution != first.resolution {
            return Err(TokenizerError::MixedResolution(first.resolution, q.resolution));
        }
        for t in encode(q)? {
            vocab.observe(&t);
        }
    }
    Ok(vocab)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::midi::{quantize, Note, Score};
    use crate::tokenizer::{duration_class, tempo_class, velocity_class};

    #[test]
    fn single_note_corpus() {
        let s = Score::with_notes(vec![Note::new(60, 0.0, 0.5, 100)], 120.0);
        let v = build_vocab(&[quantize(&s, 4).unwrap()]).unwrap();
        assert_eq!(v.indices(Field::Pitch).collect::<Vec<_>>(), vec![0, 61]);
        assert_eq!(
            v.indices(Field::Duration).collect::<Vec<_>>(),
            vec![0, duration_class(1.0) as u16 + 1]
        );
        assert_eq!(
            v.indices(Field::Velocity).collect::<Vec<_>>(),
            vec![0, velocity_class(100) as u16 + 1]
        );
        assert_eq!(v.indices(Field::Tempo).collect::<Vec<_>>(), vec![0, tempo_class(120.0) as u16 + 1]);
        assert_eq!(v.indices(Field::Chord).collect::<Vec<_>>(), vec![0]);
        assert_eq!(v.indices(Field::Type).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn empty_corpus() {
        assert_eq!(build_vocab(&[]), Err(TokenizerError::EmptyCorpus));
    }

    #[test]
    fn text_round_trip_and_version_check() {
        let s = Score::with_notes(vec![Note::new(60, 0.0, 0.5, 100), Note::new(67, 0.5, 1.0, 40)], 90.0);
        let v = build_vocab(&[quantize(&s, 4).unwrap()]).unwrap();
        let text = v.to_text();
        assert_eq!(Vocab::from_text(&text).unwrap(), v);
        let bumped = text.replace("version 1", "version 2");
        assert!(Vocab::from_text(&bumped).is_err());
        let wrong_label = text.replace("pitch 61 60", "pitch 61 61");
        assert!(Vocab::from_text(&wrong_label).is_err());
    }
}
