//! On-disk study: `study.json` (config and pieces), the append-only
//! `events.jsonl` log and a periodic `snapshot.json`. State = fold(log).

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::engine::{Assignment, Event, Piece, Rating, StudyConfig, StudyState};
use super::{ListenerGroup, StudyError};
use crate::stats::TuringAnswer;

pub const STUDY_FILE: &str = "study.json";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const SNAPSHOT_FILE: &str = "snapshot.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StudyFile {
    version: u32,
    config: StudyConfig,
    pieces: Vec<Piece>,
}

#[derive(Debug)]
pub struct StudyStore {
    dir: PathBuf,
    state: StudyState,
    log: File,
    since_snapshot: u64,
    sync: bool,
    auto_snapshot: bool,
}

fn read_study(dir: &Path) -> Result<StudyState, StudyError> {
    let text = fs::read_to_string(dir.join(STUDY_FILE))?;
    let f: StudyFile = serde_json::from_str(&text).map_err(|e| StudyError::Corrupt(format!("{STUDY_FILE}: {e}")))?;
    if f.version != 1 {
        return Err(StudyError::Corrupt(format!("{STUDY_FILE}: unsupported version {}", f.version)));
    }
    StudyState::new(f.config, f.pieces)
}

/// Reads the log, applying events newer than `state.seq`. A torn final
/// line (no newline, unparsable) is an unacknowledged write and is cut off.
fn replay_log(dir: &Path, state: &mut StudyState, repair: bool) -> Result<(), StudyError> {
    let path = dir.join(EVENTS_FILE);
    let file = match File::open(&path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(e.into()),
    };
    let mut reader = BufReader::new(file);
    let mut offset = 0u64;
    let mut line = String::new();
    let mut lineno = 0;
    loop {
        line.clear();
        let n = reader.read_line(&mut line)?;
        if n == 0 {
            break;
        }
        lineno += 1;
        let complete = line.ends_with('\n');
        if !line.trim().is_empty() {
            match serde_json::from_str::<Event>(line.trim_end()) {
                Ok(ev) => {
                    if ev.seq > state.seq {
                        state.apply(&ev)?;
                    }
                }
                Err(_) if !complete => {
                    if repair {
                        OpenOptions::new().write(true).open(&path)?.set_len(offset)?;
                    }
                    break;
                }
                Err(e) => return Err(StudyError::Corrupt(format!("{EVENTS_FILE} line {lineno}: {e}"))),
            }
        }
        offset += n as u64;
    }
    Ok(())
}

impl StudyStore {
    /// Creates a new study directory. Fails if a study already exists there.
    pub fn create(dir: &Path, config: StudyConfig, pieces: Vec<Piece>) -> Result<Self, StudyError> {
        fs::create_dir_all(dir)?;
        if dir.join(STUDY_FILE).exists() {
            return Err(StudyError::Io(format!("{} already holds a study", dir.display())));
        }
        StudyState::new(config.clone(), pieces.clone())?;
        let text = serde_json::to_string_pretty(&StudyFile { version: 1, config, pieces }).expect("study serializes");
        fs::write(dir.join(STUDY_FILE), text)?;
        File::create(dir.join(EVENTS_FILE))?;
        Self::open(dir)
    }

    /// Loads the latest snapshot, then replays newer log events.
    pub fn open(dir: &Path) -> Result<Self, StudyError> {
        let mut state = read_study(dir)?;
        let snap = dir.join(SNAPSHOT_FILE);
        if snap.exists() {
            let text = fs::read_to_string(&snap)?;
            let mut s: StudyState =
                serde_json::from_str(&text).map_err(|e| StudyError::Corrupt(format!("{SNAPSHOT_FILE}: {e}")))?;
            if s.config != state.config || s.pieces != state.pieces {
                return Err(StudyError::Corrupt(format!("{SNAPSHOT_FILE} does not match {STUDY_FILE}")));
            }
            s.rebuild_indices()?;
            state = s;
        }
        replay_log(dir, &mut state, true)?;
        let log = OpenOptions::new().create(true).append(true).open(dir.join(EVENTS_FILE))?;
        Ok(Self { dir: dir.to_path_buf(), state, log, since_snapshot: 0, sync: true, auto_snapshot: true })
    }

    /// State rebuilt from the study file and the full log, ignoring snapshots.
    pub fn replay(dir: &Path) -> Result<StudyState, StudyError> {
        let mut state = read_study(dir)?;
        replay_log(dir, &mut state, false)?;
        Ok(state)
    }

    /// Whether each append is flushed to stable storage before returning.
    pub fn set_sync(&mut self, sync: bool) {
        self.sync = sync;
    }

    /// When off, the owner calls [`StudyStore::snapshot`] itself once
    /// [`StudyStore::snapshot_due`] reports true.
    pub fn set_auto_snapshot(&mut self, on: bool) {
        self.auto_snapshot = on;
    }

    pub fn snapshot_due(&self) -> bool {
        self.since_snapshot >= self.state.config.snapshot_every.max(1)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn state(&self) -> &StudyState {
        &self.state
    }

    fn persist(&mut self, events: &[Event]) -> Result<(), StudyError> {
        if events.is_empty() {
            return Ok(());
        }
        let mut buf = Vec::new();
        for ev in events {
            serde_json::to_writer(&mut buf, ev).expect("event serializes");
            buf.push(b'\n');
        }
        let written = self.log.write_all(&buf).and_then(|_| if self.sync { self.log.sync_data() } else { Ok(()) });
        if let Err(e) = written {
            // Memory ran ahead of disk; fall back to what the disk holds.
            let reopened = Self::open(&self.dir)?;
            *self = reopened;
            return Err(e.into());
        }
        self.since_snapshot += events.len() as u64;
        if self.auto_snapshot && self.snapshot_due() {
            self.snapshot()?;
        }
        Ok(())
    }

    /// Writes the full state atomically (temp file, then rename).
    pub fn snapshot(&mut self) -> Result<(), StudyError> {
        let tmp = self.dir.join(format!("{SNAPSHOT_FILE}.tmp"));
        let mut w = BufWriter::new(File::create(&tmp)?);
        serde_json::to_writer(&mut w, &self.state).expect("state serializes");
        let f = w.into_inner().map_err(|e| e.into_error())?;
        f.sync_all()?;
        fs::rename(&tmp, self.dir.join(SNAPSHOT_FILE))?;
        self.since_snapshot = 0;
        Ok(())
    }

    pub fn register(&mut self, participant: &str, group: ListenerGroup, credential: Option<String>, now: u64) -> Result<(), StudyError> {
        let events = self.state.register(participant, group, credential, now)?;
        self.persist(&events)
    }

    pub fn next_assignment(&mut self, participant: &str, now: u64) -> Result<Assignment, StudyError> {
        let (a, events) = self.state.next_assignment(participant, now)?;
        self.persist(&events)?;
        Ok(a)
    }

    pub fn record_response(
        &mut self,
        participant: &str,
        piece: &str,
        ratings: &[Rating],
        composer: TuringAnswer,
        now: u64,
    ) -> Result<(), StudyError> {
        let events = self.state.record_response(participant, piece, ratings, composer, now)?;
        self.persist(&events)
    }

    /// Size of the event log in bytes.
    pub fn log_len(&mut self) -> Result<u64, StudyError> {
        Ok(self.log.seek(SeekFrom::End(0))?)
    }
}
