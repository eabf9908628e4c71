//! Synthetic cohort driving a study to completion.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use super::engine::{Assignment, Rating};
use super::{likert_items, ListenerGroup, StudyError, StudyStore};
use crate::stats::TuringAnswer;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    /// Participants per group: Normal, Amateur, Expert.
    pub cohort: [usize; 3],
    pub seed: u64,
    pub start_ms: u64,
    /// Clock advance per logged event.
    pub ms_per_event: u64,
    /// Stop (as if the process died) after this many responses in this call.
    pub stop_after: Option<usize>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self { cohort: [48, 15, 13], seed: 0, start_ms: 1_700_000_000_000, ms_per_event: 1000, stop_after: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    /// Responses accepted during this call.
    pub accepted: usize,
    pub total_responses: usize,
    pub finished: bool,
    pub satisfied: bool,
    /// Mean pieces rated per participant, per group.
    pub mean_workload: [f64; 3],
    /// Smallest per-piece count per group and in total.
    pub min_counts: [usize; 3],
    pub min_total: usize,
}

pub fn participant_id(group: ListenerGroup, i: usize) -> String {
    format!("sim-{}-{:03}", group.code(), i + 1)
}

/// Deterministic synthetic answer: depends only on the seed, participant
/// and piece, so a resumed run answers exactly as an uninterrupted one.
fn synthetic_answer(seed: u64, participant: &str, piece: &str, human: bool, group: ListenerGroup) -> (Vec<Rating>, TuringAnswer) {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for b in participant.bytes().chain([0]).chain(piece.bytes()) {
        h = (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(h);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let base: f64 = if human { 3.6 } else { 2.4 };
    let ratings = likert_items(group)
        .into_iter()
        .map(|q| Rating { question: q, value: (base + noise.sample(&mut rng)).round().clamp(1.0, 5.0) as u8 })
        .collect();
    let u: f64 = rng.gen();
    let composer = match (human, u) {
        (_, u) if u < 0.1 => TuringAnswer::Uncertain,
        (true, u) if u < 0.72 => TuringAnswer::Human,
        (true, _) => TuringAnswer::Ai,
        (false, u) if u < 0.8 => TuringAnswer::Ai,
        (false, _) => TuringAnswer::Human,
    };
    (ratings, composer)
}

/// Registers the cohort (skipping members already registered) and runs
/// listeners round-robin until nobody receives an assignment.
pub fn simulate(store: &mut StudyStore, cfg: &SimulationConfig) -> Result<SimulationReport, StudyError> {
    let clock = |store: &StudyStore| cfg.start_ms + store.state().seq * cfg.ms_per_event;
    let mut ids = Vec::new();
    for g in ListenerGroup::ALL {
        for i in 0..cfg.cohort[g.index()] {
            let id = participant_id(g, i);
            if store.state().participant(&id).is_none() {
                let now = clock(store);
                store.register(&id, g, None, now)?;
            }
            ids.push((id, g));
        }
    }
    let mut accepted = 0;
    let mut finished = false;
    'outer: loop {
        let mut progressed = false;
        for (id, g) in &ids {
            let now = clock(store);
            let Assignment::Piece { piece, .. } = store.next_assignment(id, now)? else {
                continue;
            };
            let human = store.state().piece(&piece).map(|p| p.human_composed()).unwrap_or(false);
            let (ratings, composer) = synthetic_answer(cfg.seed, id, &piece, human, *g);
            let now = clock(store);
            store.record_response(id, &piece, &ratings, composer, now)?;
            accepted += 1;
            progressed = true;
            if cfg.stop_after.is_some_and(|n| accepted >= n) {
                break 'outer;
            }
        }
        if !progressed {
            finished = true;
            break;
        }
    }

    let s = store.state();
    let mut mean_workload = [0.0; 3];
    for g in ListenerGroup::ALL {
        let members: Vec<_> = s.participants.iter().filter(|p| p.group == g).collect();
        if !members.is_empty() {
            mean_workload[g.index()] = members.iter().map(|p| p.completed.len()).sum::<usize>() as f64 / members.len() as f64;
        }
    }
    let mut min_counts = [usize::MAX; 3];
    let mut min_total = usize::MAX;
    for c in &s.counts {
        for g in 0..3 {
            min_counts[g] = min_counts[g].min(c[g]);
        }
        min_total = min_total.min(c.iter().sum());
    }
    Ok(SimulationReport {
        accepted,
        total_responses: s.responses.len(),
        finished,
        satisfied: s.satisfied(),
        mean_workload,
        min_counts,
        min_total,
    })
}
