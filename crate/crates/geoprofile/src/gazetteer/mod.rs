//! GeoNames-style gazetteer: loading, indexing, and ranked retrieval.
//!
//! The gazetteer is the ground truth that turns location mentions into
//! places. Entries come from tab-separated GeoNames records; every name
//! variant (primary, ASCII, alternates) is indexed under its normalized
//! form. Retrieval ranks exact matches ahead of fuzzy ones and is fully
//! deterministic, so two builds over the same bytes always answer queries
//! identically.

mod cache;
mod country;
mod normalize;

pub use cache::{read_index_cache, write_index_cache, INDEX_CACHE_MAGIC, INDEX_CACHE_VERSION};
pub use country::{
    CanonicalCountry, Canonicalized, Continent, CountryTable, CountryTableError, IncomeGroup,
    NoCountryReason, UN_REGIONS,
};
pub use normalize::{levenshtein_bounded, normalize_name};
pub(crate) use normalize::normalize_name_spans;

#[cfg(test)]
pub(crate) use tests::fixture as test_fixture;

use crate::assets::sha256_hex;
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::io::BufRead;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GazetteerError {
    #[error("gazetteer i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("gazetteer source contained no valid rows")]
    EmptyGazetteer,
    #[error("index cache: {0}")]
    CacheFormat(String),
}

/// One gazetteer record. Populations are non-negative; `country_code` is a
/// two-letter uppercase ISO code (rows without one never make it in).
#[derive(Debug, Clone, PartialEq)]
pub struct GazetteerEntry {
    pub id: u64,
    pub name: String,
    pub ascii_name: String,
    pub alternate_names: Vec<String>,
    pub latitude: f64,
    pub longitude: f64,
    /// GeoNames feature class: 'P' populated place, 'A' administrative
    /// division, others (H, S, T, ...) rank below both.
    pub feature_class: char,
    pub feature_code: String,
    pub country_code: String,
    pub admin1: String,
    pub population: u64,
}

/// Counts from one load: rows kept, rows dropped as malformed or lacking a
/// country code, and rows filtered out by the population threshold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub loaded: usize,
    pub skipped: usize,
    pub filtered: usize,
}

/// A retrieval hit: the entry plus the edit distance of its best-matching
/// name variant (0 for exact matches).
#[derive(Debug, Clone, Copy)]
pub struct Candidate<'a> {
    pub entry: &'a GazetteerEntry,
    pub distance: usize,
}

/// In-memory gazetteer with a normalized-name index.
#[derive(Debug)]
pub struct GazetteerIndex {
    entries: Vec<GazetteerEntry>,
    /// normalized name variant → indices into `entries`
    name_index: HashMap<String, Vec<u32>>,
    source_sha256: String,
    min_population: u64,
    report: LoadReport,
}

/// Fraction of the mention length allowed as edit distance in fuzzy lookup.
const FUZZY_DISTANCE_FRACTION: f64 = 0.25;

/// GeoNames rows carry 19 tab-separated fields; we require the first 15
/// (through population).
const MIN_FIELDS: usize = 15;

/// Parse one tab-separated row. `None` means the row is malformed or has no
/// country code and must be skipped.
fn parse_row(line: &str) -> Option<GazetteerEntry> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() < MIN_FIELDS {
        return None;
    }
    let id: u64 = fields[0].trim().parse().ok()?;
    let name = fields[1].trim();
    if normalize_name(name).is_empty() {
        return None;
    }
    let ascii_name = fields[2].trim();
    let alternate_names: Vec<String> = fields[3]
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect();
    let latitude: f64 = fields[4].trim().parse().ok()?;
    let longitude: f64 = fields[5].trim().parse().ok()?;
    let feature_class = fields[6].trim().chars().next().unwrap_or('\0');
    let feature_code = fields[7].trim().to_string();
    let country_code = fields[8].trim().to_ascii_uppercase();
    if country_code.is_empty() {
        return None;
    }
    if country_code.len() != 2 || !country_code.bytes().all(|b| b.is_ascii_uppercase()) {
        return None;
    }
    let admin1 = fields[10].trim().to_string();
    let pop_field = fields[14].trim();
    let population: u64 = if pop_field.is_empty() { 0 } else { pop_field.parse().ok()? };
    Some(GazetteerEntry {
        id,
        name: name.to_string(),
        ascii_name: if ascii_name.is_empty() { name.to_string() } else { ascii_name.to_string() },
        alternate_names,
        latitude,
        longitude,
        feature_class,
        feature_code,
        country_code,
        admin1,
        population,
    })
}

/// Load a gazetteer from tab-separated GeoNames records.
///
/// Malformed rows and rows without a country code are counted and skipped;
/// rows below `min_population` are counted and filtered. The raw bytes are
/// checksummed during the read so an index cache can later tell whether its
/// source changed. A source that yields zero usable rows is an error.
pub fn load_gazetteer<R: BufRead>(
    mut reader: R,
    min_population: u64,
) -> Result<GazetteerIndex, GazetteerError> {
    let mut hasher = Sha256::new();
    let mut entries = Vec::new();
    let mut report = LoadReport::default();
    let mut line = String::new();
    loop {
        line.clear();
        let n = reader.read_line(&mut line)?;
        if n == 0 {
            break;
        }
        hasher.update(line.as_bytes());
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.is_empty() {
            continue;
        }
        match parse_row(trimmed) {
            Some(e) if e.population >= min_population => {
                entries.push(e);
                report.loaded += 1;
            }
            Some(_) => report.filtered += 1,
            None => report.skipped += 1,
        }
    }
    if entries.is_empty() {
        return Err(GazetteerError::EmptyGazetteer);
    }
    let digest = hasher.finalize();
    let source_sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();
    Ok(GazetteerIndex::from_entries(entries, source_sha256, min_population, report))
}

impl GazetteerIndex {
    /// Build an index over already-parsed entries. Used by the cache reader
    /// and by synthetic test fixtures; `load_gazetteer` is the normal path.
    pub fn from_entries(
        entries: Vec<GazetteerEntry>,
        source_sha256: String,
        min_population: u64,
        report: LoadReport,
    ) -> Self {
        let mut name_index: HashMap<String, Vec<u32>> = HashMap::new();
        for (slot, entry) in entries.iter().enumerate() {
            let mut variants: Vec<String> = Vec::with_capacity(2 + entry.alternate_names.len());
            variants.push(normalize_name(&entry.name));
            variants.push(normalize_name(&entry.ascii_name));
            variants.extend(entry.alternate_names.iter().map(|a| normalize_name(a)));
            variants.retain(|v| !v.is_empty());
            variants.sort();
            variants.dedup();
            for v in variants {
                name_index.entry(v).or_default().push(slot as u32);
            }
        }
        GazetteerIndex { entries, name_index, source_sha256, min_population, report }
    }

    pub fn entries(&self) -> &[GazetteerEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn report(&self) -> LoadReport {
        self.report
    }

    /// Hex SHA-256 of the source bytes this index was built from.
    pub fn source_sha256(&self) -> &str {
        &self.source_sha256
    }

    pub fn min_population(&self) -> u64 {
        self.min_population
    }

    /// All normalized name variants in the index.
    pub fn index_keys(&self) -> impl Iterator<Item = &str> {
        self.name_index.keys().map(String::as_str)
    }

    /// Entries indexed under an exact normalized key.
    pub fn entries_for_key(&self, normalized_key: &str) -> impl Iterator<Item = &GazetteerEntry> {
        self.name_index
            .get(normalized_key)
            .into_iter()
            .flatten()
            .map(|&slot| &self.entries[slot as usize])
    }

    /// The top `k` places matching a mention.
    ///
    /// Exact matches on any normalized name variant come first; remaining
    /// slots are filled by fuzzy matches whose best variant sits within an
    /// edit distance of a quarter of the mention's length, closest first.
    /// Within a distance tier the order is population descending, then
    /// feature class (populated place, administrative division, everything
    /// else), then ascending entry id — no nondeterministic tie survives.
    pub fn retrieve_topk(&self, mention: &str, k: usize) -> Vec<Candidate<'_>> {
        let query = normalize_name(mention);
        if query.is_empty() || k == 0 {
            return Vec::new();
        }

        // Best (smallest) distance seen per entry slot.
        let mut best: HashMap<u32, usize> = HashMap::new();
        let exact = self.name_index.get(&query);
        for slot in exact.into_iter().flatten() {
            best.insert(*slot, 0);
        }

        let max_distance =
            (FUZZY_DISTANCE_FRACTION * query.chars().count() as f64).floor() as usize;
        // Exact hits always outrank fuzzy ones, so the scan is only needed
        // when exact matches alone cannot fill k slots.
        if max_distance >= 1 && best.len() < k {
            for (key, slots) in &self.name_index {
                if *key == query {
                    continue;
                }
                if let Some(d) = levenshtein_bounded(&query, key, max_distance) {
                    for &slot in slots {
                        best.entry(slot).and_modify(|cur| *cur = (*cur).min(d)).or_insert(d);
                    }
                }
            }
        }

        let mut candidates: Vec<Candidate<'_>> = best
            .into_iter()
            .map(|(slot, distance)| Candidate { entry: &self.entries[slot as usize], distance })
            .collect();
        candidates.sort_by(|a, b| {
            a.distance
                .cmp(&b.distance)
                .then(b.entry.population.cmp(&a.entry.population))
                .then(class_priority(a.entry.feature_class).cmp(&class_priority(b.entry.feature_class)))
                .then(a.entry.id.cmp(&b.entry.id))
        });
        candidates.truncate(k);
        candidates
    }
}

/// Ranking priority of a feature class: populated places beat administrative
/// divisions beat everything else.
pub fn class_priority(feature_class: char) -> u8 {
    match feature_class {
        'P' => 0,
        'A' => 1,
        _ => 2,
    }
}

/// Convenience: checksum of arbitrary gazetteer source bytes, as stored in
/// the index and its cache.
pub fn source_checksum(bytes: &[u8]) -> String {
    sha256_hex(bytes)
}
