//! Listening-study engine: evaluation-set curation, questionnaires,
//! quota-driven assignment with leases, and an append-only event log.

mod curate;
mod engine;
mod simulate;
mod store;

pub use curate::{curate, synthetic_catalog, CatalogItem, CurationConfig, CuratedPiece};
pub use engine::{
    Assignment, Event, EventKind, ParticipantState, Piece, QuotaPlan, Rating, StudyConfig, StudyState,
    EVENT_VERSION, EXPORT_HEADER,
};
pub use simulate::{simulate, SimulationConfig, SimulationReport};
pub use store::{StudyStore, EVENTS_FILE, SNAPSHOT_FILE, STUDY_FILE};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Models whose output appears in the study.
pub const MODELS: [&str; 5] = ["S-Transformer", "S-LSTM", "S-RNN", "S-GAN", "S-CNN"];
pub const DATASETS: [&str; 5] = ["JSB", "POP909", "Lakh", "EMOPIA", "XMIDI"];
/// Source label of human-composed pieces.
pub const HUMAN_SOURCE: &str = "Reference";
/// Longest excerpt presented to listeners, in seconds.
pub const MAX_EXCERPT_SECONDS: f64 = 30.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StudyError {
    #[error("InsufficientCatalog: {dataset}/{model} offers {available}, needs {required}")]
    InsufficientCatalog { dataset: String, model: String, available: usize, required: usize },
    #[error("UnknownParticipant: {0}")]
    UnknownParticipant(String),
    #[error("UnknownPiece: {0}")]
    UnknownPiece(String),
    #[error("UnissuedAssignment: {participant} was never assigned {piece}")]
    UnissuedAssignment { participant: String, piece: String },
    #[error("DuplicateResponse: {participant} already rated {piece}")]
    DuplicateResponse { participant: String, piece: String },
    #[error("InvalidResponse: {0}")]
    InvalidResponse(String),
    #[error("DuplicateParticipant: {0}")]
    DuplicateParticipant(String),
    #[error("Corrupt: {0}")]
    Corrupt(String),
    #[error("Io: {0}")]
    Io(String),
    #[error(transparent)]
    Midi(#[from] crate::midi::MidiError),
}

impl From<std::io::Error> for StudyError {
    fn from(e: std::io::Error) -> Self {
        StudyError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ListenerGroup {
    Normal,
    Amateur,
    Expert,
}

impl ListenerGroup {
    pub const ALL: [ListenerGroup; 3] = [ListenerGroup::Normal, ListenerGroup::Amateur, ListenerGroup::Expert];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn code(self) -> &'static str {
        match self {
            ListenerGroup::Normal => "N",
            ListenerGroup::Amateur => "A",
            ListenerGroup::Expert => "E",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "n" | "normal" => Some(ListenerGroup::Normal),
            "a" | "amateur" | "intermediate" => Some(ListenerGroup::Amateur),
            "e" | "expert" => Some(ListenerGroup::Expert),
            _ => None,
        }
    }
}

impl std::fmt::Display for ListenerGroup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ListenerGroup::Normal => "Normal",
            ListenerGroup::Amateur => "Amateur",
            ListenerGroup::Expert => "Expert",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuestionKind {
    Likert,
    Composer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Question {
    pub id: u8,
    pub text: &'static str,
    pub kind: QuestionKind,
    /// Groups that answer this item: Normal, Amateur, Expert.
    pub groups: [bool; 3],
}

const ALL3: [bool; 3] = [true, true, true];

pub const QUESTIONS: [Question; 14] = [
    Question { id: 1, text: "The music sounds pleasant.", kind: QuestionKind::Likert, groups: ALL3 },
    Question { id: 2, text: "The music sounds natural and fluent.", kind: QuestionKind::Likert, groups: ALL3 },
    Question { id: 3, text: "The music conveys some emotion.", kind: QuestionKind::Likert, groups: ALL3 },
    Question { id: 4, text: "The rhythm is consistent.", kind: QuestionKind::Likert, groups: ALL3 },
    Question {
        id: 5,
        text: "The music has a clear structure or repeated segments.",
        kind: QuestionKind::Likert,
        groups: [false, true, true],
    },
    Question { id: 6, text: "The music shows a recognizable style.", kind: QuestionKind::Likert, groups: [false, true, true] },
    Question { id: 7, text: "The music exhibits tonal coherence.", kind: QuestionKind::Likert, groups: [false, false, true] },
    Question { id: 8, text: "The harmonic progression is natural.", kind: QuestionKind::Likert, groups: [false, false, true] },
    Question { id: 9, text: "The melody exhibits melodic motivation.", kind: QuestionKind::Likert, groups: [false, false, true] },
    Question { id: 10, text: "The music sounds novel or original.", kind: QuestionKind::Likert, groups: ALL3 },
    Question { id: 11, text: "The music left a strong impression.", kind: QuestionKind::Likert, groups: ALL3 },
    Question { id: 12, text: "The music reminded me of personal experiences.", kind: QuestionKind::Likert, groups: ALL3 },
    Question { id: 13, text: "I like the music.", kind: QuestionKind::Likert, groups: ALL3 },
    Question { id: 14, text: "Who composed it (Human / AI / Uncertain)", kind: QuestionKind::Composer, groups: ALL3 },
];

/// Composer question as shown to listeners; the source vocabulary never
/// appears on the wire.
pub const COMPOSER_PROMPT: &str = "Who composed it?";
/// Wire values of the composer answer: human, machine, undecided.
pub const COMPOSER_OPTIONS: [&str; 3] = ["person", "machine", "uncertain"];

pub fn questionnaire_for(group: ListenerGroup) -> Vec<&'static Question> {
    QUESTIONS.iter().filter(|q| q.groups[group.index()]).collect()
}

/// Likert item ids for a group, ascending.
pub fn likert_items(group: ListenerGroup) -> Vec<u8> {
    questionnaire_for(group).iter().filter(|q| q.kind == QuestionKind::Likert).map(|q| q.id).collect()
}

pub fn question_text(id: u8) -> Option<&'static str> {
    QUESTIONS.iter().find(|q| q.id == id).map(|q| q.text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn item_counts_per_group() {
        assert_eq!(questionnaire_for(ListenerGroup::Normal).len(), 9);
        assert_eq!(questionnaire_for(ListenerGroup::Amateur).len(), 11);
        assert_eq!(questionnaire_for(ListenerGroup::Expert).len(), 14);
        let expert = questionnaire_for(ListenerGroup::Expert);
        assert!(expert.iter().any(|q| q.id == 7 && q.text == "The music exhibits tonal coherence."));
        let amateur = likert_items(ListenerGroup::Amateur);
        assert!(amateur.contains(&5) && amateur.contains(&6));
        assert!(!amateur.iter().any(|id| (7..=9).contains(id)));
        assert_eq!(likert_items(ListenerGroup::Normal), vec![1, 2, 3, 4, 10, 11, 12, 13]);
    }
}
