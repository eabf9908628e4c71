use serde_json::Value;
use spikebench_core::midi::{write_midi, Note, Score};
use spikebench_demo::{lif_trace_json, midi_metrics_json, ptukey_curve_json};

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

#[test]
fn lif_trace_first_spike() {
    let v = parse(lif_trace_json(2.0, 0.6, 1.0, 5).unwrap());
    assert_eq!(v["first_spike"], 2);
    assert_eq!(v["v"][0], 0.5);
    assert_eq!(v["spikes"].as_array().unwrap().len(), 5);
    assert!(lif_trace_json(2.0, 0.0, 1.0, 5).unwrap_err().contains("v_th"));
    assert!(lif_trace_json(2.0, 0.6, 1.0, 0).is_err());
}

#[test]
fn metrics_of_a_file() {
    let notes = (0..12).map(|i| Note::new(60 + i, f64::from(i) * 0.5, 0.5, 80)).collect();
    let bytes = write_midi(&Score::with_notes(notes, 120.0));
    let v = parse(midi_metrics_json(&bytes).unwrap());
    assert_eq!(v["notes"], 12);
    assert!((v["metrics"]["pce"].as_f64().unwrap() - 12f64.log2()).abs() < 1e-12);
    assert_eq!(v["nltm"].as_array().unwrap().len(), 8);
    assert!(midi_metrics_json(b"not a midi file").is_err());
}

#[test]
fn ptukey_curve_is_monotone() {
    let v = parse(ptukey_curve_json(3, 20.0, 6.0, 61).unwrap());
    let p: Vec<f64> = v["p"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(p.len(), 61);
    assert_eq!(p[0], 0.0);
    assert!(p.windows(2).all(|w| w[0] <= w[1]));
    assert!(p[60] > 0.99);
    assert!(ptukey_curve_json(1, 20.0, 6.0, 10).is_err());
}
