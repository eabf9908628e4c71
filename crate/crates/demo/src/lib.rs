//! WebAssembly entry points for the static demo page. Every function
//! returns a JSON string so the page needs no glue beyond `JSON.parse`.

use serde_json::json;
use spikebench_core::metrics::{evaluate_all, METRIC_NAMES};
use spikebench_core::midi::parse_midi;
use spikebench_core::spike::{lif_step, LifParams, LifState};
use spikebench_core::stats::ptukey;
use wasm_bindgen::prelude::*;

/// Upper bound on simulated steps and curve points.
pub const MAX_POINTS: usize = 10_000;

fn too_many(what: &str, n: usize) -> String {
    format!("{what} must be between 1 and {MAX_POINTS}, got {n}")
}

/// Membrane potential and spikes of one LIF neuron under constant input.
/// Returns `{"v": [...], "spikes": [...], "first_spike": step | null}`;
/// steps count from 1.
pub fn lif_trace_json(tau_m: f64, v_th: f64, input: f64, steps: usize) -> Result<String, String> {
    if steps == 0 || steps > MAX_POINTS {
        return Err(too_many("steps", steps));
    }
    let p = LifParams::new(tau_m, v_th, 0.0, 1.0).map_err(|e| e.to_string())?;
    let mut state = LifState::new(1, &p);
    let (mut v, mut spikes) = (Vec::with_capacity(steps), Vec::with_capacity(steps));
    for _ in 0..steps {
        let pre = p.integrate(state.v[0], input);
        let (next, s) = lif_step(&state, &[input], &p).map_err(|e| e.to_string())?;
        v.push(pre);
        spikes.push(s[0]);
        state = next;
    }
    let first = spikes.iter().position(|&s| s == 1).map(|i| i + 1);
    Ok(json!({ "v": v, "spikes": spikes, "first_spike": first, "v_th": v_th }).to_string())
}

/// Every objective metric of a MIDI file, plus the note-length transition
/// matrix. Missing metrics are `null`.
pub fn midi_metrics_json(bytes: &[u8]) -> Result<String, String> {
    let score = parse_midi(bytes).map_err(|e| e.to_string())?;
    let report = evaluate_all(&score);
    let metrics: serde_json::Map<String, serde_json::Value> =
        METRIC_NAMES.iter().zip(report.values()).map(|(n, v)| (n.to_string(), json!(v))).collect();
    Ok(json!({
        "notes": score.notes.len(),
        "seconds": score.duration(),
        "metrics": metrics,
        "nltm": report.nltm,
        "chords_inferred": report.chords_inferred,
    })
    .to_string())
}

/// `P(Q ≤ q)` on `points` evenly spaced values of `q` in `[0, q_max]`.
pub fn ptukey_curve_json(k: usize, df: f64, q_max: f64, points: usize) -> Result<String, String> {
    if points < 2 || points > MAX_POINTS {
        return Err(too_many("points", points));
    }
    if k < 2 || !(df > 0.0) || !(q_max > 0.0) || !q_max.is_finite() {
        return Err(format!("need k >= 2, df > 0 and q_max > 0; got k={k}, df={df}, q_max={q_max}"));
    }
    let q: Vec<f64> = (0..points).map(|i| q_max * i as f64 / (points - 1) as f64).collect();
    let p: Vec<f64> = q.iter().map(|&x| ptukey(x, k, df)).collect();
    Ok(json!({ "q": q, "p": p }).to_string())
}

#[wasm_bindgen]
pub fn lif_trace(tau_m: f64, v_th: f64, input: f64, steps: usize) -> Result<String, JsError> {
    lif_trace_json(tau_m, v_th, input, steps).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn midi_metrics(bytes: &[u8]) -> Result<String, JsError> {
    midi_metrics_json(bytes).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn ptukey_curve(k: usize, df: f64, q_max: f64, points: usize) -> Result<String, JsError> {
    ptukey_curve_json(k, df, q_max, points).map_err(|e| JsError::new(&e))
}
