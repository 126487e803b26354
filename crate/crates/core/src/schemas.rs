//! Published JSON schemas for the file formats the CLI reads and writes.

pub const FINTRACER_SCENARIO_V1: &str = include_str!("../schemas/fintracer-scenario.v1.json");
pub const FEDLR_CONFIG_V1: &str = include_str!("../schemas/fedlr-config.v1.json");
pub const TRANSCRIPT_V1: &str = include_str!("../schemas/transcript.v1.json");

/// `(schema id, schema text)` for every published schema.
pub fn all() -> [(&'static str, &'static str); 3] {
    [
        (crate::fintracer::SCENARIO_SCHEMA, FINTRACER_SCENARIO_V1),
        (crate::fedlearn::FEDLR_CONFIG_SCHEMA, FEDLR_CONFIG_V1),
        ("finpriv/transcript/v1", TRANSCRIPT_V1),
    ]
}
