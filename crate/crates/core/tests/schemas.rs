use std::collections::BTreeSet;

use finpriv::fedlearn::{PartyFile, RunConfig, TrainConfig};
use finpriv::fintracer::ndis_scenario;
use finpriv::harness::{run_protocol, ProtocolInput};
use finpriv::schemas;
use serde_json::Value;

fn properties(schema: &Value) -> BTreeSet<String> {
    schema["properties"].as_object().unwrap().keys().cloned().collect()
}

fn keys(v: &Value) -> BTreeSet<String> {
    v.as_object().unwrap().keys().cloned().collect()
}

#[test]
fn schema_ids_match_the_code() {
    for (id, text) in schemas::all() {
        let v: Value = serde_json::from_str(text).unwrap();
        assert_eq!(v["$id"], id);
    }
}

#[test]
fn scenario_fields_are_all_declared() {
    let schema: Value = serde_json::from_str(schemas::FINTRACER_SCENARIO_V1).unwrap();
    let scenario: Value = serde_json::from_str(&ndis_scenario().to_json()).unwrap();
    assert!(keys(&scenario).is_subset(&properties(&schema)));
    for req in schema["required"].as_array().unwrap() {
        assert!(scenario.get(req.as_str().unwrap()).is_some());
    }
}

#[test]
fn config_fields_are_all_declared() {
    let schema: Value = serde_json::from_str(schemas::FEDLR_CONFIG_V1).unwrap();
    let cfg = RunConfig {
        schema: Some("finpriv/fedlr-config/v1".into()),
        parties: vec![PartyFile {
            id: "a".into(),
            features: "a.csv".into(),
        }],
        labels: "y.csv".into(),
        training: TrainConfig::new(0.1),
    };
    let v = serde_json::to_value(&cfg).unwrap();
    assert_eq!(keys(&v), properties(&schema));
    assert_eq!(keys(&v["training"]), properties(&schema["properties"]["training"]));
    assert_eq!(
        keys(&v["training"]["fixed_point"]),
        properties(&schema["properties"]["training"]["properties"]["fixed_point"])
    );
}

#[test]
fn transcript_lines_match_their_schema() {
    let schema: Value = serde_json::from_str(schemas::TRANSCRIPT_V1).unwrap();
    let (header_schema, message_schema) = (&schema["oneOf"][0], &schema["oneOf"][1]);
    let (_, t) = run_protocol(&ProtocolInput::FinTracer(ndis_scenario()), 1).unwrap();
    let text = t.to_jsonl();
    let mut lines = text.lines().map(|l| serde_json::from_str::<Value>(l).unwrap());
    assert_eq!(keys(&lines.next().unwrap()), properties(header_schema));
    for m in lines {
        assert_eq!(keys(&m), properties(message_schema));
    }
}
