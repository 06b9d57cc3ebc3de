//! Streaming aggregation of per-caption country predictions into per-entity
//! geographic profiles: underspecification rate, country and regional
//! distributions, top-N concentration, and frequency–indicator /
//! frequency–diversity correlations.
//!
//! Aggregation is a single pass per shard; [`EntityDistribution::merge`]
//! folds shards together (associative, commutative, zero identity), so the
//! same totals come out no matter how the stream was partitioned.

use crate::gazetteer::{CanonicalCountry, CountryTable};
use crate::metrics::{spearman, MetricsError, SpearmanResult};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Read;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("cannot merge distributions for entities {a:?} and {b:?}")]
    EntityMismatch { a: String, b: String },
    #[error("rate undefined: no records outside provider errors")]
    UndefinedRate,
    #[error("no located records to rank")]
    NoLocatedRecords,
    #[error("need at least 3 overlapping countries, got {n}")]
    InsufficientOverlap { n: usize },
    #[error("indicator csv: {0}")]
    BadIndicator(String),
    #[error("indicator i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Correlation(#[from] MetricsError),
}

/// Where each processed record of one entity's stream ended up: a country
/// count, the underspecified bucket, or the provider-error bucket.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityDistribution {
    pub entity: String,
    /// canonical country name → record count
    pub counts: BTreeMap<String, u64>,
    pub underspecified: u64,
    pub provider_errors: u64,
    pub total_processed: u64,
}

impl EntityDistribution {
    pub fn new(entity: impl Into<String>) -> Self {
        EntityDistribution {
            entity: entity.into(),
            counts: BTreeMap::new(),
            underspecified: 0,
            provider_errors: 0,
            total_processed: 0,
        }
    }

    /// Fold one prediction in. A provider error is counted as such even if
    /// a country came back with it — failed lookups never inflate shares.
    pub fn record(&mut self, country: Option<&CanonicalCountry>, provider_error: bool) {
        self.total_processed += 1;
        if provider_error {
            self.provider_errors += 1;
        } else if let Some(c) = country {
            *self.counts.entry(c.name.clone()).or_default() += 1;
        } else {
            self.underspecified += 1;
        }
    }

    /// Records that resolved to a country.
    pub fn located_total(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Check the bookkeeping identity `total = Σcounts + underspecified +
    /// provider_errors`; deserialized inputs should be run through this.
    pub fn validate(&self) -> bool {
        self.located_total() + self.underspecified + self.provider_errors
            == self.total_processed
    }

    /// Pointwise sum with another shard of the same entity.
    pub fn merge(mut self, other: &EntityDistribution) -> Result<Self, ProfileError> {
        if self.entity != other.entity {
            return Err(ProfileError::EntityMismatch {
                a: self.entity,
                b: other.entity.clone(),
            });
        }
        for (name, c) in &other.counts {
            *self.counts.entry(name.clone()).or_default() += c;
        }
        self.underspecified += other.underspecified;
        self.provider_errors += other.provider_errors;
        self.total_processed += other.total_processed;
        Ok(self)
    }
}

/// Single-pass aggregation of an outcome stream for one entity. Each item
/// is (resolved country, provider-error flag).
pub fn aggregate<'a, I>(outcomes: I, entity: &str) -> EntityDistribution
where
    I: IntoIterator<Item = (Option<&'a CanonicalCountry>, bool)>,
{
    let mut d = EntityDistribution::new(entity);
    for (country, provider_error) in outcomes {
        d.record(country, provider_error);
    }
    d
}

/// Share of captions that name no country, among records the provider
/// actually answered: `100 · underspecified / (total − provider_errors)`.
pub fn underspecified_rate(d: &EntityDistribution) -> Result<f64, ProfileError> {
    let denom = d.total_processed - d.provider_errors;
    if denom == 0 {
        return Err(ProfileError::UndefinedRate);
    }
    Ok(100.0 * d.underspecified as f64 / denom as f64)
}

/// The `n` most frequent countries and their combined share of the
/// location-specified mass. Ties break on country name ascending.
pub fn topn_concentration(
    d: &EntityDistribution,
    n: usize,
) -> Result<(Vec<(String, u64)>, f64), ProfileError> {
    let located = d.located_total();
    if located == 0 {
        return Err(ProfileError::NoLocatedRecords);
    }
    let mut ranked: Vec<(String, u64)> =
        d.counts.iter().map(|(k, v)| (k.clone(), *v)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(n);
    let top_sum: u64 = ranked.iter().map(|(_, c)| c).sum();
    Ok((ranked, 100.0 * top_sum as f64 / located as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RollupLevel {
    Continent,
    UnRegion,
    Income,
}

/// Counts regrouped at a coarser geographic level. Countries missing from
/// the metadata table land in `unmapped` and never distort the shares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollup {
    pub level: RollupLevel,
    pub counts: BTreeMap<String, u64>,
    pub unmapped: u64,
    /// Percentage of the mapped mass per key; sums to 100 (±1e-9).
    pub shares: BTreeMap<String, f64>,
}

pub fn rollup(d: &EntityDistribution, level: RollupLevel) -> Rollup {
    rollup_with_table(d, level, CountryTable::builtin())
}

pub fn rollup_with_table(d: &EntityDistribution, level: RollupLevel, table: &CountryTable) -> Rollup {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut unmapped = 0u64;
    for (name, &count) in &d.counts {
        match table.get_by_name(name) {
            Some(c) => {
                let key = match level {
                    RollupLevel::Continent => c.continent.code().to_string(),
                    RollupLevel::UnRegion => c.un_region.clone(),
                    RollupLevel::Income => c.income_group.label().to_string(),
                };
                *counts.entry(key).or_default() += count;
            }
            None => unmapped += count,
        }
    }
    let mapped: u64 = counts.values().sum();
    let shares = counts
        .iter()
        .map(|(k, &v)| (k.clone(), 100.0 * v as f64 / mapped as f64))
        .collect();
    Rollup { level, counts, unmapped, shares }
}

/// Result of correlating country frequencies against an external signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationOutcome {
    pub rho: f64,
    pub p_value: f64,
    /// countries entering the correlation
    pub n: usize,
    /// fraction of the located mass covered by those countries
    pub coverage: f64,
}

/// Parse an indicator file of `country,value` rows. Country names are run
/// through the canonicalizer so "USA" and "United States" collapse to the
/// same key; rows that resolve to no country keep their raw name (they will
/// simply never intersect a distribution).
pub fn read_indicator_csv<R: Read>(reader: R) -> Result<BTreeMap<String, f64>, ProfileError> {
    read_indicator_csv_with_table(reader, CountryTable::builtin())
}

pub fn read_indicator_csv_with_table<R: Read>(
    reader: R,
    table: &CountryTable,
) -> Result<BTreeMap<String, f64>, ProfileError> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut out = BTreeMap::new();
    for record in csv.records() {
        let record = record.map_err(|e| ProfileError::BadIndicator(e.to_string()))?;
        if record.len() != 2 {
            return Err(ProfileError::BadIndicator(format!(
                "expected 2 columns, got {}",
                record.len()
            )));
        }
        let raw = record[0].trim();
        let value: f64 = record[1].trim().parse().map_err(|_| {
            ProfileError::BadIndicator(format!("bad value {:?} for {raw:?}", &record[1]))
        })?;
        if value < 0.0 {
            return Err(ProfileError::BadIndicator(format!(
                "negative value {value} for {raw:?}"
            )));
        }
        let key = match table.canonicalize(raw) {
            crate::gazetteer::Canonicalized::Country(c) => c.name,
            crate::gazetteer::Canonicalized::NoCountry(_) => raw.to_string(),
        };
        out.insert(key, value);
    }
    Ok(out)
}

/// Spearman correlation between per-country frequencies and an indicator,
/// over the countries both sides know.
pub fn correlate_indicator(
    d: &EntityDistribution,
    indicator: &BTreeMap<String, f64>,
) -> Result<CorrelationOutcome, ProfileError> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut covered = 0u64;
    for (name, &count) in &d.counts {
        if let Some(&value) = indicator.get(name) {
            xs.push(count as f64);
            ys.push(value);
            covered += count;
        }
    }
    if xs.len() < 3 {
        return Err(ProfileError::InsufficientOverlap { n: xs.len() });
    }
    let located = d.located_total();
    let SpearmanResult { rho, p_value } = spearman(&xs, &ys)?;
    Ok(CorrelationOutcome {
        rho,
        p_value,
        n: xs.len(),
        coverage: if located == 0 { 0.0 } else { covered as f64 / located as f64 },
    })
}

/// Default minimum per-country record count for diversity correlations;
/// thinner cells produce unstable diversity estimates.
pub const DIVERSITY_MIN_COUNT: u64 = 100;

/// Spearman correlation between country frequencies and per-country
/// diversity scores, restricted to countries with strictly more than
/// `min_count` records and a diversity value.
pub fn frequency_diversity_correlation(
    d: &EntityDistribution,
    diversity: &BTreeMap<String, f64>,
    min_count: u64,
) -> Result<CorrelationOutcome, ProfileError> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut covered = 0u64;
    for (name, &count) in &d.counts {
        if count > min_count {
            if let Some(&score) = diversity.get(name) {
                xs.push(count as f64);
                ys.push(score);
                covered += count;
            }
        }
    }
    if xs.len() < 3 {
        return Err(ProfileError::InsufficientOverlap { n: xs.len() });
    }
    let located = d.located_total();
    let SpearmanResult { rho, p_value } = spearman(&xs, &ys)?;
    Ok(CorrelationOutcome {
        rho,
        p_value,
        n: xs.len(),
        coverage: if located == 0 { 0.0 } else { covered as f64 / located as f64 },
    })
}

/// Everything the profiler knows about one entity, ready for serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityProfile {
    pub distribution: EntityDistribution,
    /// `None` when every record was a provider error.
    pub underspecified_rate: Option<f64>,
    pub top_countries: Vec<(String, u64)>,
    /// `None` when nothing resolved to a country.
    pub top_share: Option<f64>,
    pub continents: Rollup,
    pub un_regions: Rollup,
    pub incomes: Rollup,
}

/// How many countries the concentration summary keeps by default.
pub const TOP_N_DEFAULT: usize = 15;

pub fn build_entity_profile(d: &EntityDistribution, top_n: usize) -> EntityProfile {
    let (top_countries, top_share) = match topn_concentration(d, top_n) {
        Ok((list, share)) => (list, Some(share)),
        Err(_) => (Vec::new(), None),
    };
    EntityProfile {
        underspecified_rate: underspecified_rate(d).ok(),
        top_countries,
        top_share,
        continents: rollup(d, RollupLevel::Continent),
        un_regions: rollup(d, RollupLevel::UnRegion),
        incomes: rollup(d, RollupLevel::Income),
        distribution: d.clone(),
    }
}

/// A correlation with the indicator (or diversity map) it was run against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedCorrelation {
    pub name: String,
    pub outcome: CorrelationOutcome,
}

/// Full profiling output across entities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    pub entities: BTreeMap<String, EntityProfile>,
    pub correlations: Vec<NamedCorrelation>,
}

/// Flatten a distribution to choropleth-ready `iso2,share` CSV rows, shares
/// in percent of the located mass. Countries without metadata (no ISO code
/// to plot) are omitted.
pub fn choropleth_csv(d: &EntityDistribution) -> Result<String, ProfileError> {
    let table = CountryTable::builtin();
    let located = d.located_total();
    if located == 0 {
        return Err(ProfileError::NoLocatedRecords);
    }
    let mut out = String::from("iso2,share\n");
    for (name, &count) in &d.counts {
        if let Some(c) = table.get_by_name(name) {
            out.push_str(&format!("{},{}\n", c.iso2, 100.0 * count as f64 / located as f64));
        }
    }
    Ok(out)
}
