use std::collections::{BTreeSet, HashMap};
use std::fmt::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{likert_items, ListenerGroup, StudyError, HUMAN_SOURCE};
use crate::stats::TuringAnswer;

pub const EVENT_VERSION: u32 = 1;

pub const EXPORT_HEADER: &str = "participant_id,group,piece_id,dataset,source,question_id,value,turing_answer,timestamp";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    /// Opaque id; carries no source information.
    pub id: String,
    pub dataset: String,
    pub source: String,
    pub origin: String,
    /// Seconds, after trimming.
    pub duration: f64,
}

impl Piece {
    pub fn human_composed(&self) -> bool {
        self.source == HUMAN_SOURCE
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuotaPlan {
    pub min_total: usize,
    /// Normal, Amateur, Expert.
    pub min_group: [usize; 3],
}

impl Default for QuotaPlan {
    fn default() -> Self {
        Self { min_total: 24, min_group: [16, 4, 4] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub quotas: QuotaPlan,
    pub lease_ms: u64,
    /// Cohort size per group the workload caps are planned for.
    pub expected_group_sizes: [usize; 3],
    /// Overrides the derived per-participant caps.
    pub workload_cap: Option<[usize; 3]>,
    pub seed: u64,
    /// Events between snapshots.
    pub snapshot_every: u64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            quotas: QuotaPlan::default(),
            lease_ms: 30 * 60 * 1000,
            expected_group_sizes: [48, 15, 13],
            workload_cap: None,
            seed: 0,
            snapshot_every: 1000,
        }
    }
}

impl StudyConfig {
    /// `ceil(pieces · group minimum / expected group size)` per group.
    pub fn caps(&self, n_pieces: usize) -> [usize; 3] {
        self.workload_cap.unwrap_or_else(|| {
            let mut caps = [0; 3];
            for g in 0..3 {
                let slots = n_pieces * self.quotas.min_group[g];
                caps[g] = slots.div_ceil(self.expected_group_sizes[g].max(1));
            }
            caps
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rating {
    pub question: u8,
    pub value: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventKind {
    Registered { participant: String, group: ListenerGroup, credential: Option<String> },
    Assigned { participant: String, piece: String, lease_until: u64 },
    Leased { participant: String, piece: String, lease_until: u64 },
    Responded { participant: String, piece: String, ratings: Vec<Rating>, composer: TuringAnswer },
    Expired { participant: String, piece: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub v: u32,
    pub seq: u64,
    /// Milliseconds on the study clock.
    pub t: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantState {
    pub id: String,
    pub group: ListenerGroup,
    /// Hash of the session credential, if any.
    pub credential: Option<String>,
    /// Piece indices in response order.
    pub completed: Vec<usize>,
    /// Active assignment and its lease expiry.
    pub current: Option<(usize, u64)>,
    /// Pieces assigned earlier whose lease lapsed without a response.
    pub lapsed: BTreeSet<usize>,
    pub last_dataset: Option<String>,
    #[serde(skip)]
    rated: Vec<bool>,
    #[serde(skip)]
    rank: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub participant: String,
    pub piece: String,
    pub ratings: Vec<Rating>,
    pub composer: TuringAnswer,
    pub t: u64,
}

/// What a participant should do next.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Assignment {
    Piece { piece: String, completed: usize, cap: usize },
    Done { completed: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyState {
    pub config: StudyConfig,
    pub pieces: Vec<Piece>,
    pub participants: Vec<ParticipantState>,
    /// Responses per piece and group.
    pub counts: Vec<[usize; 3]>,
    /// Active leases per piece and group.
    pub leased: Vec<[usize; 3]>,
    pub responses: Vec<ResponseRecord>,
    /// Sequence number of the last applied event.
    pub seq: u64,
    #[serde(skip)]
    piece_index: HashMap<String, usize>,
    #[serde(skip)]
    participant_index: HashMap<String, usize>,
    #[serde(skip)]
    credential_index: HashMap<String, usize>,
}

fn corrupt(msg: impl Into<String>) -> StudyError {
    StudyError::Corrupt(msg.into())
}

impl StudyState {
    pub fn new(config: StudyConfig, pieces: Vec<Piece>) -> Result<Self, StudyError> {
        let n = pieces.len();
        let mut s = Self {
            config,
            pieces,
            participants: Vec::new(),
            counts: vec![[0; 3]; n],
            leased: vec![[0; 3]; n],
            responses: Vec::new(),
            seq: 0,
            piece_index: HashMap::new(),
            participant_index: HashMap::new(),
            credential_index: HashMap::new(),
        };
        s.rebuild_indices()?;
        Ok(s)
    }

    /// Restores the derived lookup tables after deserialization.
    pub fn rebuild_indices(&mut self) -> Result<(), StudyError> {
        self.piece_index.clear();
        for (i, p) in self.pieces.iter().enumerate() {
            if self.piece_index.insert(p.id.clone(), i).is_some() {
                return Err(corrupt(format!("duplicate piece id {}", p.id)));
            }
        }
        self.participant_index.clear();
        self.credential_index.clear();
        let n = self.pieces.len();
        for i in 0..self.participants.len() {
            let rank = self.rank_for(i);
            let p = &mut self.participants[i];
            p.rated = vec![false; n];
            for &c in &p.completed {
                *p.rated.get_mut(c).ok_or_else(|| corrupt("completed piece out of range"))? = true;
            }
            p.rank = rank;
            self.participant_index.insert(p.id.clone(), i);
            if let Some(c) = &p.credential {
                self.credential_index.insert(c.clone(), i);
            }
        }
        Ok(())
    }

    /// Per-participant presentation order: a seeded permutation of pieces.
    fn rank_for(&self, participant: usize) -> Vec<u32> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(participant as u64 + 1);
        let mut order: Vec<u32> = (0..self.pieces.len() as u32).collect();
        order.shuffle(&mut rng);
        let mut rank = vec![0; order.len()];
        for (r, &p) in order.iter().enumerate() {
            rank[p as usize] = r as u32;
        }
        rank
    }

    pub fn piece(&self, id: &str) -> Option<&Piece> {
        self.piece_index.get(id).map(|&i| &self.pieces[i])
    }

    pub fn participant(&self, id: &str) -> Option<&ParticipantState> {
        self.participant_index.get(id).map(|&i| &self.participants[i])
    }

    pub fn participant_by_credential(&self, credential: &str) -> Option<&ParticipantState> {
        self.credential_index.get(credential).map(|&i| &self.participants[i])
    }

    pub fn caps(&self) -> [usize; 3] {
        self.config.caps(self.pieces.len())
    }

    fn group_deficit(&self, piece: usize, g: usize) -> usize {
        self.config.quotas.min_group[g].saturating_sub(self.counts[piece][g] + self.leased[piece][g])
    }

    fn total_deficit(&self, piece: usize) -> usize {
        let have: usize = self.counts[piece].iter().chain(&self.leased[piece]).sum();
        self.config.quotas.min_total.saturating_sub(have)
    }

    /// Every piece meets every minimum.
    pub fn satisfied(&self) -> bool {
        let q = &self.config.quotas;
        self.counts.iter().all(|c| c.iter().sum::<usize>() >= q.min_total && (0..3).all(|g| c[g] >= q.min_group[g]))
    }

    // ----- event application -------------------------------------------------

    /// Applies one event. Replaying a log from the initial state through
    /// this function reproduces the live state exactly.
    pub fn apply(&mut self, ev: &Event) -> Result<(), StudyError> {
        if ev.v != EVENT_VERSION {
            return Err(corrupt(format!("unsupported event version {}", ev.v)));
        }
        if ev.seq != self.seq + 1 {
            return Err(corrupt(format!("event seq {} after {}", ev.seq, self.seq)));
        }
        match &ev.kind {
            EventKind::Registered { participant, group, credential } => {
                if self.participant_index.contains_key(participant) {
                    return Err(corrupt(format!("participant {participant} registered twice")));
                }
                let idx = self.participants.len();
                self.participants.push(ParticipantState {
                    id: participant.clone(),
                    group: *group,
                    credential: credential.clone(),
                    completed: Vec::new(),
                    current: None,
                    lapsed: BTreeSet::new(),
                    last_dataset: None,
                    rated: vec![false; self.pieces.len()],
                    rank: self.rank_for(idx),
                });
                self.participant_index.insert(participant.clone(), idx);
                if let Some(c) = credential {
                    self.credential_index.insert(c.clone(), idx);
                }
            }
            EventKind::Assigned { participant, piece, lease_until } => {
                let (pi, k) = self.lookup(participant, piece)?;
                let g = self.participants[pi].group.index();
                if self.participants[pi].current.is_some() {
                    return Err(corrupt(format!("{participant} assigned while holding a lease")));
                }
                self.leased[k][g] += 1;
                let dataset = self.pieces[k].dataset.clone();
                let p = &mut self.participants[pi];
                p.current = Some((k, *lease_until));
                p.last_dataset = Some(dataset);
            }
            EventKind::Leased { participant, piece, lease_until } => {
                let (pi, k) = self.lookup(participant, piece)?;
                match &mut self.participants[pi].current {
                    Some((c, until)) if *c == k => *until = *lease_until,
                    _ => return Err(corrupt(format!("lease renewal without assignment for {participant}"))),
                }
            }
            EventKind::Expired { participant, piece } => {
                let (pi, k) = self.lookup(participant, piece)?;
                let g = self.participants[pi].group.index();
                if self.participants[pi].current.map(|c| c.0) != Some(k) {
                    return Err(corrupt(format!("expiry without lease for {participant}")));
                }
                self.leased[k][g] -= 1;
                let p = &mut self.participants[pi];
                p.current = None;
                p.lapsed.insert(k);
            }
            EventKind::Responded { participant, piece, ratings, composer } => {
                let (pi, k) = self.lookup(participant, piece)?;
                let g = self.participants[pi].group.index();
                if self.participants[pi].rated[k] {
                    return Err(corrupt(format!("{participant} responded twice to {piece}")));
                }
                if self.participants[pi].current.map(|c| c.0) == Some(k) {
                    self.leased[k][g] -= 1;
                    self.participants[pi].current = None;
                }
                self.counts[k][g] += 1;
                let p = &mut self.participants[pi];
                p.lapsed.remove(&k);
                p.rated[k] = true;
                p.completed.push(k);
                self.responses.push(ResponseRecord {
                    participant: participant.clone(),
                    piece: piece.clone(),
                    ratings: ratings.clone(),
                    composer: *composer,
                    t: ev.t,
                });
            }
        }
        self.seq = ev.seq;
        Ok(())
    }

    fn lookup(&self, participant: &str, piece: &str) -> Result<(usize, usize), StudyError> {
        let pi = *self.participant_index.get(participant).ok_or_else(|| corrupt(format!("unknown participant {participant}")))?;
        let k = *self.piece_index.get(piece).ok_or_else(|| corrupt(format!("unknown piece {piece}")))?;
        Ok((pi, k))
    }

    fn emit(&mut self, now: u64, kind: EventKind, out: &mut Vec<Event>) -> Result<(), StudyError> {
        let ev = Event { v: EVENT_VERSION, seq: self.seq + 1, t: now, kind };
        self.apply(&ev)?;
        out.push(ev);
        Ok(())
    }

    // ----- commands -------------------------------------------------------------

    pub fn register(
        &mut self,
        participant: &str,
        group: ListenerGroup,
        credential: Option<String>,
        now: u64,
    ) -> Result<Vec<Event>, StudyError> {
        if self.participant_index.contains_key(participant) {
            return Err(StudyError::DuplicateParticipant(participant.to_string()));
        }
        let mut out = Vec::new();
        let kind = EventKind::Registered { participant: participant.to_string(), group, credential };
        self.emit(now, kind, &mut out)?;
        Ok(out)
    }

    /// Releases every lease that has run out by `now`.
    pub fn expire_leases(&mut self, now: u64) -> Result<Vec<Event>, StudyError> {
        let mut out = Vec::new();
        let stale: Vec<(String, String)> = self
            .participants
            .iter()
            .filter_map(|p| p.current.filter(|c| c.1 <= now).map(|c| (p.id.clone(), self.pieces[c.0].id.clone())))
            .collect();
        for (participant, piece) in stale {
            self.emit(now, EventKind::Expired { participant, piece }, &mut out)?;
        }
        Ok(out)
    }

    /// May `pi` take piece `k` beyond its workload cap? Only when no other
    /// under-cap member of a fully enrolled group could fill the deficit.
    fn overflow_allowed(&self, pi: usize, k: usize, cap: usize) -> bool {
        let group = self.participants[pi].group;
        let g = group.index();
        let members = self.participants.iter().filter(|p| p.group == group).count();
        if members < self.config.expected_group_sizes[g] {
            return false;
        }
        self.participants.iter().enumerate().all(|(qi, q)| {
            qi == pi || q.group != group || q.rated[k] || q.current.is_some_and(|c| c.0 == k) || q.completed.len() >= cap
        })
    }

    /// Returns the participant's active assignment (renewing its lease) or
    /// issues a new one by quota priority: largest deficit in the
    /// participant's group, then largest total deficit, then a dataset
    /// different from the previous piece, then the participant's seeded
    /// presentation order.
    pub fn next_assignment(&mut self, participant: &str, now: u64) -> Result<(Assignment, Vec<Event>), StudyError> {
        let pi = *self
            .participant_index
            .get(participant)
            .ok_or_else(|| StudyError::UnknownParticipant(participant.to_string()))?;
        let mut out = self.expire_leases(now)?;
        let until = now + self.config.lease_ms;
        let g = self.participants[pi].group.index();
        let cap = self.caps()[g];
        let completed = self.participants[pi].completed.len();
        if let Some((k, _)) = self.participants[pi].current {
            let kind = EventKind::Leased { participant: participant.to_string(), piece: self.pieces[k].id.clone(), lease_until: until };
            self.emit(now, kind, &mut out)?;
            return Ok((Assignment::Piece { piece: self.pieces[k].id.clone(), completed, cap }, out));
        }
        let p = &self.participants[pi];
        let at_cap = completed >= cap;
        let mut best: Option<(usize, (std::cmp::Reverse<usize>, std::cmp::Reverse<usize>, bool, u32))> = None;
        for k in 0..self.pieces.len() {
            if p.rated[k] {
                continue;
            }
            let d = self.group_deficit(k, g);
            if d == 0 {
                continue;
            }
            let key = (
                std::cmp::Reverse(d),
                std::cmp::Reverse(self.total_deficit(k)),
                p.last_dataset.as_deref() == Some(self.pieces[k].dataset.as_str()),
                p.rank[k],
            );
            if best.as_ref().map_or(true, |b| key < b.1) && (!at_cap || self.overflow_allowed(pi, k, cap)) {
                best = Some((k, key));
            }
        }
        let Some((k, _)) = best else {
            return Ok((Assignment::Done { completed }, out));
        };
        let piece = self.pieces[k].id.clone();
        let kind = EventKind::Assigned { participant: participant.to_string(), piece: piece.clone(), lease_until: until };
        self.emit(now, kind, &mut out)?;
        Ok((Assignment::Piece { piece, completed, cap }, out))
    }

    /// Position in the participant's session without changing any state.
    pub fn resume(&self, participant: &str) -> Result<Option<String>, StudyError> {
        let p = self.participant(participant).ok_or_else(|| StudyError::UnknownParticipant(participant.to_string()))?;
        Ok(p.current.map(|c| self.pieces[c.0].id.clone()))
    }

    pub fn record_response(
        &mut self,
        participant: &str,
        piece: &str,
        ratings: &[Rating],
        composer: TuringAnswer,
        now: u64,
    ) -> Result<Vec<Event>, StudyError> {
        let pi = *self
            .participant_index
            .get(participant)
            .ok_or_else(|| StudyError::UnknownParticipant(participant.to_string()))?;
        let k = *self.piece_index.get(piece).ok_or_else(|| StudyError::UnknownPiece(piece.to_string()))?;
        let p = &self.participants[pi];
        if p.rated[k] {
            return Err(StudyError::DuplicateResponse { participant: participant.to_string(), piece: piece.to_string() });
        }
        if p.current.map(|c| c.0) != Some(k) && !p.lapsed.contains(&k) {
            return Err(StudyError::UnissuedAssignment { participant: participant.to_string(), piece: piece.to_string() });
        }
        let mut sorted = ratings.to_vec();
        sorted.sort_by_key(|r| r.question);
        let expected = likert_items(p.group);
        let got: Vec<u8> = sorted.iter().map(|r| r.question).collect();
        if got != expected {
            return Err(StudyError::InvalidResponse(format!("expected items {expected:?}, got {got:?}")));
        }
        if let Some(r) = sorted.iter().find(|r| !(1..=5).contains(&r.value)) {
            return Err(StudyError::InvalidResponse(format!("Q{} value {} outside 1..=5", r.question, r.value)));
        }
        let mut out = Vec::new();
        let kind = EventKind::Responded {
            participant: participant.to_string(),
            piece: piece.to_string(),
            ratings: sorted,
            composer,
        };
        self.emit(now, kind, &mut out)?;
        Ok(out)
    }

    // ----- reporting ------------------------------------------------------------

    /// One row per (participant, piece, question) with unblinded sources;
    /// the composer question carries the answer instead of a value.
    pub fn export_csv(&self) -> String {
        let mut out = String::from(EXPORT_HEADER);
        out.push('\n');
        for r in &self.responses {
            let p = self.participant(&r.participant).expect("response from known participant");
            let piece = self.piece(&r.piece).expect("response to known piece");
            let prefix = format!("{},{},{},{},{}", r.participant, p.group, piece.id, piece.dataset, piece.source);
            for rating in &r.ratings {
                let _ = writeln!(out, "{prefix},Q{},{},,{}", rating.question, rating.value, r.t);
            }
            let answer = match r.composer {
                TuringAnswer::Human => "Human",
                TuringAnswer::Ai => "AI",
                TuringAnswer::Uncertain => "Uncertain",
            };
            let _ = writeln!(out, "{prefix},Q14,,{answer},{}", r.t);
        }
        out
    }

    /// Responses and leases per piece and group, as JSON for admin tooling.
    pub fn progress_json(&self) -> serde_json::Value {
        let q = &self.config.quotas;
        let pieces: Vec<serde_json::Value> = self
            .pieces
            .iter()
            .enumerate()
            .map(|(i, p)| {
                serde_json::json!({
                    "piece_id": p.id,
                    "dataset": p.dataset,
                    "source": p.source,
                    "counts": { "normal": self.counts[i][0], "amateur": self.counts[i][1], "expert": self.counts[i][2] },
                    "leased": { "normal": self.leased[i][0], "amateur": self.leased[i][1], "expert": self.leased[i][2] },
                    "total": self.counts[i].iter().sum::<usize>(),
                })
            })
            .collect();
        let mut groups = serde_json::Map::new();
        for g in ListenerGroup::ALL {
            let members = self.participants.iter().filter(|p| p.group == g).count();
            groups.insert(g.to_string().to_lowercase(), serde_json::json!({ "participants": members, "cap": self.caps()[g.index()] }));
        }
        let caps = self.caps();
        let participants: Vec<serde_json::Value> = self
            .participants
            .iter()
            .map(|p| serde_json::json!({ "id": p.id, "group": p.group, "completed": p.completed.len(), "cap": caps[p.group.index()] }))
            .collect();
        let done = self.counts.iter().filter(|c| c.iter().sum::<usize>() >= q.min_total && (0..3).all(|g| c[g] >= q.min_group[g])).count();
        serde_json::json!({
            "completion": if self.pieces.is_empty() { 1.0 } else { done as f64 / self.pieces.len() as f64 },
            "participants": participants,
            "quotas": { "min_total": q.min_total, "min_normal": q.min_group[0], "min_amateur": q.min_group[1], "min_expert": q.min_group[2] },
            "satisfied": self.satisfied(),
            "responses": self.responses.len(),
            "groups": groups,
            "pieces": pieces,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pieces(n: usize) -> Vec<Piece> {
        (0..n)
            .map(|i| Piece {
                id: format!("p{i:03}"),
                dataset: ["JSB", "POP909"][i % 2].into(),
                source: if i % 3 == 0 { HUMAN_SOURCE.into() } else { "S-RNN".into() },
                origin: format!("o{i}"),
                duration: 10.0,
            })
            .collect()
    }

    fn normal_ratings() -> Vec<Rating> {
        likert_items(ListenerGroup::Normal).into_iter().map(|q| Rating { question: q, value: 3 }).collect()
    }

    #[test]
    fn submit_then_resume_moves_on() {
        let mut s = StudyState::new(StudyConfig::default(), pieces(6)).unwrap();
        s.register("u1", ListenerGroup::Normal, None, 0).unwrap();
        let (a, _) = s.next_assignment("u1", 1).unwrap();
        let Assignment::Piece { piece, .. } = a else { panic!() };
        assert_eq!(s.resume("u1").unwrap(), Some(piece.clone()));
        let (again, _) = s.next_assignment("u1", 2).unwrap();
        assert!(matches!(&again, Assignment::Piece { piece: p, .. } if *p == piece));
        s.record_response("u1", &piece, &normal_ratings(), TuringAnswer::Ai, 3).unwrap();
        let (next, _) = s.next_assignment("u1", 4).unwrap();
        assert!(matches!(&next, Assignment::Piece { piece: p, .. } if *p != piece));
    }

    #[test]
    fn duplicate_and_unissued_are_rejected() {
        let mut s = StudyState::new(StudyConfig::default(), pieces(4)).unwrap();
        s.register("u1", ListenerGroup::Normal, None, 0).unwrap();
        let (Assignment::Piece { piece, .. }, _) = s.next_assignment("u1", 0).unwrap() else { panic!() };
        let other = if piece == "p000" { "p001" } else { "p000" };
        assert!(matches!(
            s.record_response("u1", other, &normal_ratings(), TuringAnswer::Ai, 1),
            Err(StudyError::UnissuedAssignment { .. })
        ));
        s.record_response("u1", &piece, &normal_ratings(), TuringAnswer::Ai, 1).unwrap();
        let counts = s.counts.clone();
        assert!(matches!(
            s.record_response("u1", &piece, &normal_ratings(), TuringAnswer::Ai, 2),
            Err(StudyError::DuplicateResponse { .. })
        ));
        assert_eq!(s.counts, counts);
        assert!(matches!(s.next_assignment("ghost", 0), Err(StudyError::UnknownParticipant(_))));
        let bad: Vec<Rating> = normal_ratings().into_iter().skip(1).collect();
        let (Assignment::Piece { piece, .. }, _) = s.next_assignment("u1", 3).unwrap() else { panic!() };
        assert!(matches!(s.record_response("u1", &piece, &bad, TuringAnswer::Ai, 4), Err(StudyError::InvalidResponse(_))));
    }

    #[test]
    fn full_normal_quota_blocks_only_normal_listeners() {
        let cfg = StudyConfig { quotas: QuotaPlan { min_total: 2, min_group: [1, 1, 0] }, ..StudyConfig::default() };
        let mut s = StudyState::new(cfg, pieces(1)).unwrap();
        s.register("n1", ListenerGroup::Normal, None, 0).unwrap();
        s.register("n2", ListenerGroup::Normal, None, 0).unwrap();
        s.register("a1", ListenerGroup::Amateur, None, 0).unwrap();
        let (Assignment::Piece { piece, .. }, _) = s.next_assignment("n1", 0).unwrap() else { panic!() };
        s.record_response("n1", &piece, &normal_ratings(), TuringAnswer::Human, 1).unwrap();
        assert!(matches!(s.next_assignment("n2", 2).unwrap().0, Assignment::Done { .. }));
        assert!(matches!(s.next_assignment("a1", 2).unwrap().0, Assignment::Piece { .. }));
    }

    #[test]
    fn expired_lease_returns_slot() {
        let cfg = StudyConfig { quotas: QuotaPlan { min_total: 1, min_group: [1, 0, 0] }, lease_ms: 10, ..StudyConfig::default() };
        let mut s = StudyState::new(cfg, pieces(1)).unwrap();
        s.register("n1", ListenerGroup::Normal, None, 0).unwrap();
        s.register("n2", ListenerGroup::Normal, None, 0).unwrap();
        assert!(matches!(s.next_assignment("n1", 0).unwrap().0, Assignment::Piece { .. }));
        assert!(matches!(s.next_assignment("n2", 5).unwrap().0, Assignment::Done { .. }));
        assert!(matches!(s.next_assignment("n2", 11).unwrap().0, Assignment::Piece { .. }));
        assert_eq!(s.leased[0][0], 1);
        // The lapsed listener may still submit; the rating is kept.
        s.record_response("n1", "p000", &normal_ratings(), TuringAnswer::Ai, 12).unwrap();
        assert_eq!(s.counts[0][0], 1);
    }

    #[test]
    fn caps_follow_cohort() {
        assert_eq!(StudyConfig::default().caps(810), [270, 216, 250]);
    }

    #[test]
    fn export_rows() {
        let s = StudyState::new(StudyConfig::default(), pieces(2)).unwrap();
        assert_eq!(s.export_csv(), format!("{EXPORT_HEADER}\n"));
    }
}
