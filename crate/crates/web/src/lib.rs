//! Browser bindings for three small demos: FinTracer tag propagation round by
//! round, Bloom-filter similarity of two names, and a histogram of Laplace
//! noise. Build with `wasm-pack build crates/web --target web` and serve
//! `crates/web/www`.

use serde_json::json;
use wasm_bindgen::prelude::*;

use finpriv::dp::{laplace_release, DpParams};
use finpriv::fintracer::{self, Scenario};
use finpriv::he::GroupParams;
use finpriv::pprl::{qgrams, BloomFilter, HmacHasher};

/// The bundled four-bank scenario, for the page's default text.
#[wasm_bindgen(js_name = fintracerFixture)]
pub fn fintracer_fixture() -> String {
    fintracer::NDIS_FIXTURE.to_string()
}

/// Tags after each of `0..=scenario.iterations` rounds, as JSON
/// `[{ "round": k, "tags": [{ "institution", "account", "value" }] }]`.
pub fn trace_rounds(scenario_json: &str, seed: u64) -> Result<String, String> {
    let scenario = Scenario::from_json(scenario_json).map_err(|e| e.to_string())?;
    if scenario.iterations > 8 {
        return Err("the demo runs at most 8 rounds".into());
    }
    let group = GroupParams::reference();
    let mut rounds = Vec::new();
    for k in 0..=scenario.iterations {
        let mut s = scenario.clone();
        s.iterations = k;
        let (result, _) = fintracer::run(&s, &group, seed).map_err(|e| e.to_string())?;
        rounds.push(json!({ "round": k, "tags": result.tags }));
    }
    Ok(serde_json::Value::Array(rounds).to_string())
}

#[wasm_bindgen(js_name = traceRounds)]
pub fn trace_rounds_js(scenario_json: &str, seed: u64) -> Result<String, JsError> {
    trace_rounds(scenario_json, seed).map_err(|e| JsError::new(&e))
}

/// Bigram Dice of the two names in plaintext and through keyed Bloom filters,
/// plus each filter's set bit positions, as JSON.
pub fn name_similarity(a: &str, b: &str, key_hex: &str, length: usize, hashes: u32) -> Result<String, String> {
    let key = hex::decode(key_hex.trim()).map_err(|e| format!("key: {e}"))?;
    let hasher = HmacHasher::new(&key);
    let ga = qgrams(&a.to_lowercase(), 2).map_err(|e| e.to_string())?;
    let gb = qgrams(&b.to_lowercase(), 2).map_err(|e| e.to_string())?;
    let fa = BloomFilter::encode(&ga, length, hashes, &hasher).map_err(|e| e.to_string())?;
    let fb = BloomFilter::encode(&gb, length, hashes, &hasher).map_err(|e| e.to_string())?;
    Ok(json!({
        "plaintext_dice": ga.dice(&gb),
        "bloom_dice": fa.dice(&fb).map_err(|e| e.to_string())?,
        "bits_a": fa.set_positions(),
        "bits_b": fb.set_positions(),
        "length": length,
    })
    .to_string())
}

#[wasm_bindgen(js_name = nameSimilarity)]
pub fn name_similarity_js(a: &str, b: &str, key_hex: &str, length: usize, hashes: u32) -> Result<String, JsError> {
    name_similarity(a, b, key_hex, length, hashes).map_err(|e| JsError::new(&e))
}

/// Counts of `samples` Laplace draws in `bins` equal bins over `[-range, range]`.
/// Draws outside the range land in the end bins.
pub fn laplace_histogram(
    epsilon: f64,
    sensitivity: f64,
    samples: usize,
    bins: usize,
    range: f64,
    seed: u64,
) -> Result<Vec<f64>, String> {
    if bins == 0 || !(range > 0.0) {
        return Err("need at least one bin and a positive range".into());
    }
    let params = DpParams::new(epsilon, sensitivity).map_err(|e| e.to_string())?;
    let noise = laplace_release(&vec![0.0; samples], params, seed).values;
    let mut counts = vec![0.0; bins];
    let width = 2.0 * range / bins as f64;
    for x in noise {
        let i = ((x + range) / width).floor().clamp(0.0, (bins - 1) as f64) as usize;
        counts[i] += 1.0;
    }
    Ok(counts)
}

#[wasm_bindgen(js_name = laplaceHistogram)]
pub fn laplace_histogram_js(
    epsilon: f64,
    sensitivity: f64,
    samples: usize,
    bins: usize,
    range: f64,
    seed: u64,
) -> Result<Vec<f64>, JsError> {
    laplace_histogram(epsilon, sensitivity, samples, bins, range, seed).map_err(|e| JsError::new(&e))
}
