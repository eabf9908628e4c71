//! Seven-field compound-word tokens.
//!
//! Every token carries a type plus six attribute fields. Field values are
//! stored as indices into fixed class universes; index 0 is NONE in every
//! field. A [`Vocab`] records which indices a corpus actually uses and is
//! what `decode` validates against.

mod classes;
mod codec;
mod vocab;

pub use classes::*;
pub use codec::{decode, encode, parse_tokens, write_tokens};
pub use vocab::{build_vocab, Vocab};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::midi::MidiError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TokenizerError {
    #[error("EmptyScore")]
    EmptyScore,
    #[error("EmptyCorpus")]
    EmptyCorpus,
    #[error("MalformedSequence: {0}")]
    MalformedSequence(String),
    #[error("UnknownIndex: field {field} index {index} at token {position}")]
    UnknownIndex { position: usize, field: Field, index: u16 },
    #[error("BarTooLong: {0} beats per bar exceeds 16")]
    BarTooLong(usize),
    #[error("MixedResolution: {0} vs {1}")]
    MixedResolution(u32, u32),
    #[error("MalformedVocab: line {line}: {reason}")]
    MalformedVocab { line: usize, reason: String },
    #[error("MalformedDump: line {line}: {reason}")]
    MalformedDump { line: usize, reason: String },
    #[error(transparent)]
    Midi(#[from] MidiError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Field {
    Type,
    Tempo,
    Chord,
    BarBeat,
    Pitch,
    Duration,
    Velocity,
}

impl Field {
    pub const ALL: [Field; 7] = [
        Field::Type,
        Field::Tempo,
        Field::Chord,
        Field::BarBeat,
        Field::Pitch,
        Field::Duration,
        Field::Velocity,
    ];

    /// Number of indices in the field, NONE included.
    pub const fn size(self) -> usize {
        match self {
            Field::Type => 4,
            Field::Tempo => TEMPO_CLASSES + 1,
            Field::Chord => CHORD_CLASSES + 1,
            Field::BarBeat => MAX_BAR_POSITIONS + 1,
            Field::Pitch => 129,
            Field::Duration => DURATION_CLASSES.len() + 1,
            Field::Velocity => VELOCITY_CLASSES + 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Field::Type => "type",
            Field::Tempo => "tempo",
            Field::Chord => "chord",
            Field::BarBeat => "bar_beat",
            Field::Pitch => "pitch",
            Field::Duration => "duration",
            Field::Velocity => "velocity",
        }
    }

    pub fn position(self) -> usize {
        self as usize
    }
}

impl std::fmt::Display for Field {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TokenType {
    Metric,
    Note,
    Eos,
}

impl TokenType {
    pub fn index(self) -> u16 {
        match self {
            TokenType::Metric => 1,
            TokenType::Note => 2,
            TokenType::Eos => 3,
        }
    }

    pub fn from_index(i: u16) -> Option<Self> {
        match i {
            1 => Some(TokenType::Metric),
            2 => Some(TokenType::Note),
            3 => Some(TokenType::Eos),
            _ => None,
        }
    }
}

/// One compound-word token. All fields are indices; 0 means NONE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct CompoundToken {
    pub ttype: u16,
    pub tempo: u16,
    pub chord: u16,
    pub bar_beat: u16,
    pub pitch: u16,
    pub duration: u16,
    pub velocity: u16,
}

impl CompoundToken {
    pub fn eos() -> Self {
        Self { ttype: TokenType::Eos.index(), ..Self::default() }
    }

    pub fn metric(bar_pos: usize, tempo_class: Option<usize>, chord_class: Option<usize>) -> Self {
        Self {
            ttype: TokenType::Metric.index(),
            tempo: some_index(tempo_class),
            chord: some_index(chord_class),
            bar_beat: bar_pos as u16 + 1,
            ..Self::default()
        }
    }

    pub fn note(bar_pos: usize, pitch: u8, duration_class: usize, velocity_class: usize) -> Self {
        Self {
            ttype: TokenType::Note.index(),
            bar_beat: bar_pos as u16 + 1,
            pitch: u16::from(pitch) + 1,
            duration: duration_class as u16 + 1,
            velocity: velocity_class as u16 + 1,
            ..Self::default()
        }
    }

    pub fn kind(&self) -> Option<TokenType> {
        TokenType::from_index(self.ttype)
    }

    pub fn to_array(self) -> [u16; 7] {
        [self.ttype, self.tempo, self.chord, self.bar_beat, self.pitch, self.duration, self.velocity]
    }

    pub fn from_array(a: [u16; 7]) -> Self {
        Self {
            ttype: a[0],
            tempo: a[1],
            chord: a[2],
            bar_beat: a[3],
            pitch: a[4],
            duration: a[5],
            velocity: a[6],
        }
    }

    pub fn get(&self, field: Field) -> u16 {
        self.to_array()[field.position()]
    }

    /// Type/field consistency: Note tokens carry pitch, duration and
    /// velocity but no tempo or chord; Metric tokens carry no pitch.
    pub fn is_valid(&self) -> bool {
        let in_range = Field::ALL.iter().all(|f| (self.get(*f) as usize) < f.size());
        in_range
            && match self.kind() {
                Some(TokenType::Note) => {
                    self.pitch != 0
                        && self.duration != 0
                        && self.velocity != 0
                        && self.tempo == 0
                        && self.chord == 0
                }
                Some(TokenType::Metric) => self.pitch == 0,
                Some(TokenType::Eos) => true,
                None => false,
            }
    }
}

fn some_index(class: Option<usize>) -> u16 {
    class.map_or(0, |c| c as u16 + 1)
}
