//! Canonical countries and the reply-to-country normalization table.
//!
//! Free-text country replies ("UK", "Texas", "mediterranean", "no") collapse
//! onto a closed set of canonical countries — or onto an explicit
//! no-country outcome. The table behind this is shipped as a versioned CSV
//! asset; every canonical country carries its continent, UN region, and
//! income group so downstream rollups never need a second lookup.

use crate::assets;
use crate::gazetteer::normalize_name;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::OnceLock;
use thiserror::Error;

/// Continent codes used in rollups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Continent {
    /// North America
    NA,
    /// South America
    SA,
    /// Europe
    EU,
    /// Asia
    AS,
    /// Africa
    AF,
    /// Oceania
    OC,
}

impl Continent {
    pub fn code(self) -> &'static str {
        match self {
            Continent::NA => "NA",
            Continent::SA => "SA",
            Continent::EU => "EU",
            Continent::AS => "AS",
            Continent::AF => "AF",
            Continent::OC => "OC",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "NA" => Continent::NA,
            "SA" => Continent::SA,
            "EU" => Continent::EU,
            "AS" => Continent::AS,
            "AF" => Continent::AF,
            "OC" => Continent::OC,
            _ => return None,
        })
    }
}

impl fmt::Display for Continent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// World Bank income group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IncomeGroup {
    Low,
    LowerMiddle,
    UpperMiddle,
    High,
}

impl IncomeGroup {
    pub fn label(self) -> &'static str {
        match self {
            IncomeGroup::Low => "Low",
            IncomeGroup::LowerMiddle => "Lower Middle",
            IncomeGroup::UpperMiddle => "Upper Middle",
            IncomeGroup::High => "High",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "Low" => IncomeGroup::Low,
            "Lower Middle" => IncomeGroup::LowerMiddle,
            "Upper Middle" => IncomeGroup::UpperMiddle,
            "High" => IncomeGroup::High,
            _ => return None,
        })
    }
}

impl fmt::Display for IncomeGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// The UN regional grouping used for region-level rollups, with the three
/// Pacific subregions collapsed into a single Oceania bucket.
pub const UN_REGIONS: [&str; 17] = [
    "Northern Africa",
    "Sub-Saharan Africa",
    "Northern America",
    "Central America",
    "Caribbean",
    "South America",
    "Central Asia",
    "Eastern Asia",
    "South-eastern Asia",
    "Southern Asia",
    "Western Asia",
    "Eastern Europe",
    "Northern Europe",
    "Southern Europe",
    "Western Europe",
    "Australia and New Zealand",
    "Oceania (excluding Australia and New Zealand)",
];

/// A country from the canonical table, with the metadata every rollup needs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalCountry {
    /// Display name, unique within the table (e.g. "United States").
    pub name: String,
    /// ISO 3166-1 alpha-2 code, unique within the table.
    pub iso2: String,
    pub continent: Continent,
    /// One of [`UN_REGIONS`].
    pub un_region: String,
    pub income_group: IncomeGroup,
}

/// Why a reply resolved to no country.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoCountryReason {
    /// The literal sentinel reply "no".
    Sentinel,
    /// A continent name or vague multi-country region.
    VagueRegion,
    /// Anything else the table does not know.
    Unrecognized,
}

/// Outcome of canonicalizing a free-text country reply.
#[derive(Debug, Clone, PartialEq)]
pub enum Canonicalized {
    Country(CanonicalCountry),
    NoCountry(NoCountryReason),
}

#[derive(Debug, Error)]
pub enum CountryTableError {
    #[error("country metadata csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: bad iso2 code {code:?}")]
    BadIso2 { row: usize, code: String },
    #[error("row {row}: unknown continent code {code:?}")]
    BadContinent { row: usize, code: String },
    #[error("row {row}: unknown UN region {region:?}")]
    BadRegion { row: usize, region: String },
    #[error("row {row}: unknown income group {group:?}")]
    BadIncome { row: usize, group: String },
    #[error("row {row}: duplicate {what} {value:?}")]
    Duplicate { row: usize, what: &'static str, value: String },
    #[error("alias {alias:?} targets unknown country {target:?}")]
    BadAlias { alias: String, target: String },
    #[error("unknown country {0:?}")]
    UnknownCountry(String),
}

/// Extra lookup names accepted for canonical countries, beyond the table's
/// own names. All comparisons happen on normalized strings.
const COUNTRY_ALIASES: &[(&str, &str)] = &[
    ("russian federation", "Russia"),
    ("czechia", "Czech Republic"),
    ("cote d'ivoire", "Ivory Coast"),
    ("burma", "Myanmar"),
    ("republic of korea", "South Korea"),
    ("korea republic of", "South Korea"),
    ("democratic people's republic of korea", "North Korea"),
    ("dr congo", "Democratic Republic of the Congo"),
    ("drc", "Democratic Republic of the Congo"),
    ("congo kinshasa", "Democratic Republic of the Congo"),
    ("congo", "Republic of the Congo"),
    ("congo brazzaville", "Republic of the Congo"),
    ("east timor", "Timor-Leste"),
    ("cabo verde", "Cape Verde"),
    ("swaziland", "Eswatini"),
    ("holland", "Netherlands"),
    ("the netherlands", "Netherlands"),
    ("uae", "United Arab Emirates"),
    ("vatican", "Vatican City"),
    ("holy see", "Vatican City"),
    ("macedonia", "North Macedonia"),
    ("turkiye", "Turkey"),
    ("lao people's democratic republic", "Laos"),
    ("lao pdr", "Laos"),
    ("viet nam", "Vietnam"),
    ("syrian arab republic", "Syria"),
    ("islamic republic of iran", "Iran"),
    ("republic of moldova", "Moldova"),
    ("brunei darussalam", "Brunei"),
    ("the bahamas", "Bahamas"),
    ("the gambia", "Gambia"),
    ("slovak republic", "Slovakia"),
    ("kyrgyz republic", "Kyrgyzstan"),
    ("state of palestine", "Palestine"),
    ("federated states of micronesia", "Micronesia"),
];

/// Replies that mean the United States without being US state names.
const US_SYNONYMS: &[&str] = &[
    "united states",
    "united states of america",
    "the united states",
    "the united states of america",
    "usa",
    "us",
    "the us",
    "the usa",
    "america",
    // Dotted abbreviations normalize with spaces: "U.S.A." becomes "u s a".
    "u s",
    "u s a",
    "the u s",
    "the u s a",
];

/// Replies that mean the United Kingdom without being constituent names.
const UK_SYNONYMS: &[&str] =
    &["united kingdom", "the united kingdom", "uk", "the uk", "gb", "u k", "the u k"];

/// The canonical country table plus the reply-normalization rule sets.
#[derive(Debug)]
pub struct CountryTable {
    countries: Vec<CanonicalCountry>,
    by_iso2: HashMap<String, usize>,
    by_norm_name: HashMap<String, usize>,
    us_names: HashSet<String>,
    uk_names: HashSet<String>,
    vague: HashSet<String>,
}

impl CountryTable {
    /// The table built from the assets shipped inside the crate.
    pub fn builtin() -> &'static CountryTable {
        static TABLE: OnceLock<CountryTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            CountryTable::from_parts(
                assets::COUNTRY_METADATA_CSV,
                assets::US_STATES,
                assets::UK_CONSTITUENTS,
                assets::VAGUE_REGIONS,
            )
            .expect("embedded country metadata is valid")
        })
    }

    /// Build a table from CSV metadata plus the three rule lists (one name
    /// per line). The CSV must have the header
    /// `iso2,name,continent,un_region,income_group`.
    pub fn from_parts(
        metadata_csv: &str,
        us_states: &str,
        uk_constituents: &str,
        vague_regions: &str,
    ) -> Result<Self, CountryTableError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(metadata_csv.as_bytes());

        let mut countries = Vec::new();
        let mut by_iso2 = HashMap::new();
        let mut by_norm_name = HashMap::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = i + 2; // 1-based, after the header
            let iso2 = rec.get(0).unwrap_or("").trim().to_string();
            let name = rec.get(1).unwrap_or("").trim().to_string();
            let cont = rec.get(2).unwrap_or("").trim();
            let region = rec.get(3).unwrap_or("").trim().to_string();
            let income = rec.get(4).unwrap_or("").trim();

            if iso2.len() != 2 || !iso2.bytes().all(|b| b.is_ascii_uppercase()) {
                return Err(CountryTableError::BadIso2 { row, code: iso2 });
            }
            let continent = Continent::parse(cont).ok_or_else(|| CountryTableError::BadContinent {
                row,
                code: cont.to_string(),
            })?;
            if !UN_REGIONS.contains(&region.as_str()) {
                return Err(CountryTableError::BadRegion { row, region });
            }
            let income_group =
                IncomeGroup::parse(income).ok_or_else(|| CountryTableError::BadIncome {
                    row,
                    group: income.to_string(),
                })?;

            let idx = countries.len();
            if by_iso2.insert(iso2.clone(), idx).is_some() {
                return Err(CountryTableError::Duplicate { row, what: "iso2", value: iso2 });
            }
            let norm = normalize_name(&name);
            if by_norm_name.insert(norm, idx).is_some() {
                return Err(CountryTableError::Duplicate { row, what: "name", value: name });
            }
            countries.push(CanonicalCountry {
                name,
                iso2,
                continent,
                un_region: region,
                income_group,
            });
        }

        for &(alias, target) in COUNTRY_ALIASES {
            let target_idx = *by_norm_name
                .get(&normalize_name(target))
                .ok_or_else(|| CountryTableError::BadAlias {
                    alias: alias.to_string(),
                    target: target.to_string(),
                })?;
            by_norm_name.entry(normalize_name(alias)).or_insert(target_idx);
        }

        let mut us_names: HashSet<String> =
            US_SYNONYMS.iter().map(|s| normalize_name(s)).collect();
        us_names.extend(non_empty_lines(us_states).map(normalize_name));
        let mut uk_names: HashSet<String> =
            UK_SYNONYMS.iter().map(|s| normalize_name(s)).collect();
        uk_names.extend(non_empty_lines(uk_constituents).map(normalize_name));
        let vague = non_empty_lines(vague_regions).map(normalize_name).collect();

        Ok(CountryTable { countries, by_iso2, by_norm_name, us_names, uk_names, vague })
    }

    /// All countries, in table order.
    pub fn countries(&self) -> &[CanonicalCountry] {
        &self.countries
    }

    pub fn get_by_iso2(&self, iso2: &str) -> Option<&CanonicalCountry> {
        self.by_iso2.get(iso2).map(|&i| &self.countries[i])
    }

    /// Look a country up by (normalized) display name or accepted alias.
    pub fn get_by_name(&self, name: &str) -> Option<&CanonicalCountry> {
        self.by_norm_name
            .get(&normalize_name(name))
            .map(|&i| &self.countries[i])
    }

    /// Continent, UN region, and income group for a canonical country name.
    pub fn country_meta(
        &self,
        name: &str,
    ) -> Result<(Continent, &str, IncomeGroup), CountryTableError> {
        let c = self
            .get_by_name(name)
            .ok_or_else(|| CountryTableError::UnknownCountry(name.to_string()))?;
        Ok((c.continent, c.un_region.as_str(), c.income_group))
    }

    /// Collapse a free-text country reply onto the canonical set.
    ///
    /// Rule order: UK constituents and synonyms, then US synonyms and state
    /// names, then continent names and vague regions, then the literal
    /// sentinel "no", then exact lookup in the table. Anything left is
    /// [`NoCountryReason::Unrecognized`]. Idempotent on its own output:
    /// canonical names resolve to themselves.
    pub fn canonicalize(&self, reply: &str) -> Canonicalized {
        let norm = normalize_name(reply);
        if self.uk_names.contains(&norm) {
            return Canonicalized::Country(
                self.get_by_iso2("GB").expect("table contains GB").clone(),
            );
        }
        if self.us_names.contains(&norm) {
            return Canonicalized::Country(
                self.get_by_iso2("US").expect("table contains US").clone(),
            );
        }
        if self.vague.contains(&norm) {
            return Canonicalized::NoCountry(NoCountryReason::VagueRegion);
        }
        if norm == "no" {
            return Canonicalized::NoCountry(NoCountryReason::Sentinel);
        }
        match self.by_norm_name.get(&norm) {
            Some(&i) => Canonicalized::Country(self.countries[i].clone()),
            None => Canonicalized::NoCountry(NoCountryReason::Unrecognized),
        }
    }
}

fn non_empty_lines(s: &str) -> impl Iterator<Item = &str> {
    s.lines().map(str::trim).filter(|l| !l.is_empty())
}
