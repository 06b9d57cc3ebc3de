//! Data files shipped inside the crate, embedded at compile time.
//!
//! Reports produced by downstream tooling quote the checksums of the prompt
//! templates so a result can always be traced back to the exact prompt bytes
//! that produced it.

use sha2::{Digest, Sha256};
use std::collections::BTreeMap;

/// Country metadata table: `iso2,name,continent,un_region,income_group`.
pub const COUNTRY_METADATA_CSV: &str = include_str!("../assets/country_metadata_v1.csv");

/// The 50 US states plus the District of Columbia, one per line.
pub const US_STATES: &str = include_str!("../assets/us_states.txt");

/// Constituent names of the United Kingdom, one per line.
pub const UK_CONSTITUENTS: &str = include_str!("../assets/uk_constituents.txt");

/// Continent names and vague multi-country regions, one per line.
pub const VAGUE_REGIONS: &str = include_str!("../assets/vague_regions.txt");

/// The 1,000 most common English words; suppresses single-token place
/// matches on everyday vocabulary.
pub const STOPWORDS_EN_1000: &str = include_str!("../assets/stopwords_en_1000.txt");

/// Prompt template: map a caption directly to a country name.
pub const PROMPT_ZERO_SHOT: &str = include_str!("../assets/prompts/zero_shot.txt");

/// Prompt template: extract the primary location mention from a caption.
pub const PROMPT_EXTRACT: &str = include_str!("../assets/prompts/extract.txt");

/// Prompt template: pick a country given retrieved candidate places.
pub const PROMPT_PREDICT: &str = include_str!("../assets/prompts/predict.txt");

/// Prompt template: map a caption to a country with in-context examples.
pub const PROMPT_ICL: &str = include_str!("../assets/prompts/icl.txt");

/// Entity-tagged caption templates (JSONL, `{"template", "entity"}`), each
/// containing exactly one `{LOC}` placeholder.
pub const CAPTION_TEMPLATES_JSONL: &str = include_str!("../assets/caption_templates.jsonl");

/// Hex-encoded SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Checksums of the four prompt templates, keyed by template id.
pub fn prompt_checksums() -> BTreeMap<&'static str, String> {
    BTreeMap::from([
        ("zero_shot", sha256_hex(PROMPT_ZERO_SHOT.as_bytes())),
        ("extract", sha256_hex(PROMPT_EXTRACT.as_bytes())),
        ("predict", sha256_hex(PROMPT_PREDICT.as_bytes())),
        ("icl", sha256_hex(PROMPT_ICL.as_bytes())),
    ])
}
