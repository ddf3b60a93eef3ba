//! wasm-bindgen exports for the static demo page in `www/`.
//!
//! Every export returns a JSON string so the page needs no generated
//! bindings beyond plain strings and numbers.

use coop_relay::binary_model::{classify, Event, NetworkState, StateElement};
use coop_relay::perf_eval::{policy_event_probabilities, BernoulliAssignment};
use coop_relay::policy_synth::{
    decision_rows, derive_policy, minimize, KnowledgeSubset, NamedPolicy, Target, Viewpoint,
};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Bits and label of state `index` (0..=255).
#[wasm_bindgen]
pub fn classify_state(index: u32) -> Result<String, JsValue> {
    let index =
        u8::try_from(index).map_err(|_| JsValue::from_str("state index must be in 0..=255"))?;
    let state = NetworkState::from_index(index);
    let label = classify(state);
    let bits: Vec<Value> = StateElement::ALL
        .iter()
        .map(|&e| json!({ "element": e.name(), "value": state.get(e) }))
        .collect();
    Ok(json!({
        "index": index,
        "bits": bits,
        "label": label.as_str(),
        "assist": label.in_a(),
        "backoff": label.in_b(),
        "collision": label.in_c(),
    })
    .to_string())
}

/// Decision table and minimized expressions for a knowledge subset
/// (`full`, `hops:N`, `custom:...`) and viewpoint (`cons` or `greed`).
#[wasm_bindgen]
pub fn synthesize(knowledge: &str, view: &str) -> Result<String, JsValue> {
    let err = |e: coop_relay::policy_synth::SynthError| JsValue::from_str(&e.to_string());
    let knowledge: KnowledgeSubset = knowledge.parse().map_err(err)?;
    let view: Viewpoint = view.parse().map_err(err)?;
    let policy = derive_policy(knowledge, view);
    let rows: Vec<Value> = decision_rows(&policy)
        .into_iter()
        .map(|(assignment, decision)| {
            let bits: Vec<u8> = assignment.iter().map(|(_, v)| *v as u8).collect();
            json!({ "bits": bits, "decision": decision.to_string() })
        })
        .collect();
    let elements: Vec<&str> = knowledge.elements().iter().map(|e| e.name()).collect();
    Ok(json!({
        "knowledge": knowledge.to_string(),
        "view": view.to_string(),
        "elements": elements,
        "rows": rows,
        "tx": minimize(&policy, Target::TxSet).to_string(),
        "rx": minimize(&policy, Target::RxSet).to_string(),
    })
    .to_string())
}

/// A/B/C probability of every named policy on `points` evenly spaced values
/// of p in [0, 1], with the exact polynomials.
#[wasm_bindgen]
pub fn perf_curves(points: u32) -> Result<String, JsValue> {
    let points = points.clamp(2, 1001);
    let ps: Vec<f64> = (0..points)
        .map(|k| k as f64 / (points - 1) as f64)
        .collect();
    let scenario = BernoulliAssignment::flow_separation_scenario();
    let mut policies = Vec::new();
    for named in NamedPolicy::ALL {
        let polys = policy_event_probabilities(&named.policy(), &scenario)
            .map_err(|e| JsValue::from_str(&e.to_string()))?;
        let curves: serde_json::Map<String, Value> = Event::ALL
            .iter()
            .zip(&polys)
            .map(|(event, poly)| {
                let values: Vec<f64> = ps.iter().map(|&p| poly.eval_f64(p)).collect();
                (
                    event.letter().to_string(),
                    json!({ "poly": poly.to_string(), "values": values }),
                )
            })
            .collect();
        policies.push(json!({ "id": named.id(), "name": named.to_string(), "events": curves }));
    }
    Ok(json!({ "p": ps, "policies": policies }).to_string())
}
