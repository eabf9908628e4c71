use spikebench_core::study::{simulate, Piece, SimulationConfig, StudyConfig, StudyStore, DATASETS, HUMAN_SOURCE, MODELS};

fn pieces() -> Vec<Piece> {
    let mut out = Vec::new();
    for d in DATASETS {
        for m in MODELS {
            for i in 0..30 {
                out.push((d, m.to_string(), i));
            }
        }
        for i in 0..12 {
            out.push((d, HUMAN_SOURCE.to_string(), i));
        }
    }
    out.into_iter()
        .enumerate()
        .map(|(k, (d, s, i))| Piece { id: format!("p{:04}", k + 1), dataset: d.into(), source: s.clone(), origin: format!("{d}/{s}/{i}"), duration: 30.0 })
        .collect()
}

#[test]
fn full_cohort_meets_every_quota() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = StudyStore::create(dir.path(), StudyConfig::default(), pieces()).unwrap();
    store.set_sync(false);
    let t = std::time::Instant::now();
    let report = simulate(&mut store, &SimulationConfig::default()).unwrap();
    println!("{report:?} in {:?}", t.elapsed());
    assert!(report.satisfied);
    assert_eq!(report.min_counts, [16, 4, 4]);
    assert!(report.min_total >= 24);
    assert!((report.mean_workload[0] - 270.0).abs() < 1e-9);
}

#[test]
fn replay_of_log_equals_live_state() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = StudyStore::create(dir.path(), StudyConfig::default(), pieces()).unwrap();
    store.set_sync(false);
    simulate(&mut store, &SimulationConfig { cohort: [20, 6, 5], ..SimulationConfig::default() }).unwrap();
    let live = serde_json::to_string(store.state()).unwrap();
    drop(store);
    let replayed = StudyStore::replay(dir.path()).unwrap();
    assert_eq!(serde_json::to_string(&replayed).unwrap(), live);
    let reopened = StudyStore::open(dir.path()).unwrap();
    assert_eq!(serde_json::to_string(reopened.state()).unwrap(), live);
}

#[test]
fn crashes_lose_no_acknowledged_response_and_resume_completes() {
    use std::io::Write;
    let dir = tempfile::tempdir().unwrap();
    let cfg = StudyConfig { snapshot_every: 777, ..StudyConfig::default() };
    let mut store = StudyStore::create(dir.path(), cfg, pieces()).unwrap();
    store.set_sync(false);
    let mut acknowledged = 0;
    for crash in 0..5 {
        let sim = SimulationConfig { stop_after: Some(3001 + 17 * crash), ..SimulationConfig::default() };
        let r = simulate(&mut store, &sim).unwrap();
        acknowledged += r.accepted;
        assert_eq!(r.total_responses, acknowledged);
        drop(store);
        // Torn write of an event that was never acknowledged.
        let mut f = std::fs::OpenOptions::new().append(true).open(dir.path().join(spikebench_core::study::EVENTS_FILE)).unwrap();
        f.write_all(b"{\"v\":1,\"seq\":").unwrap();
        drop(f);
        store = StudyStore::open(dir.path()).unwrap();
        store.set_sync(false);
        assert_eq!(store.state().responses.len(), acknowledged);
    }
    let r = simulate(&mut store, &SimulationConfig::default()).unwrap();
    assert!(r.finished && r.satisfied);
    assert_eq!(r.total_responses, 19440);
    let s = store.state();
    let mut seen = std::collections::HashSet::new();
    assert!(s.responses.iter().all(|r| seen.insert((r.participant.clone(), r.piece.clone()))));
    assert_eq!(serde_json::to_string(&StudyStore::replay(dir.path()).unwrap()).unwrap(), serde_json::to_string(s).unwrap());
}
