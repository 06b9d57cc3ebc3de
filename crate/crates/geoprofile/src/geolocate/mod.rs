//! Caption → country resolution.
//!
//! Four methods share one output shape, [`CountryPrediction`]:
//!
//! * `string_match` — scan the caption for gazetteer names and take the
//!   top-ranked entry for the first mention. Cheap, imprecise, offline.
//! * `zero_shot` — one provider call mapping the caption straight to a
//!   country name.
//! * `erp` — extract–retrieve–predict: a provider call extracts the primary
//!   location mention, the gazetteer retrieves the ten nearest entries, and
//!   a second provider call picks the country with those candidates as
//!   context.
//! * `icl` — like `zero_shot` with a configured block of worked examples in
//!   the prompt.
//!
//! Provider replies are free text and always pass through country
//! canonicalization, so rule-breaking replies ("UK", a US state name)
//! degrade gracefully instead of corrupting downstream distributions. Every
//! caption lands in exactly one terminal state: a country, no-country, or a
//! `provider_error` flag — never a silent miss.

mod matcher;
mod providers;

pub use matcher::{StringMatcher, MAX_MATCH_TOKENS};
pub use providers::{
    CachingProvider, EchoTopCandidateProvider, HttpProvider, ProviderError,
    RecordedTranscriptProvider, TextCompletionProvider,
};

use std::borrow::Cow;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assets;
use crate::gazetteer::{
    normalize_name, Candidate, CanonicalCountry, Canonicalized, CountryTable, GazetteerIndex,
    NoCountryReason,
};

/// Candidate list size for the retrieve step of `erp`.
pub const ERP_CANDIDATES: usize = 10;

/// Flags that can appear on a [`CountryPrediction`]. Kept as plain strings
/// so prediction lines stay greppable and the set can grow without a schema
/// change.
pub mod flags {
    /// The provider path failed (transport, protocol, or translation); the
    /// record is excluded from distribution denominators.
    pub const PROVIDER_ERROR: &str = "provider_error";
    /// The provider replied with something the country table cannot map.
    pub const UNRECOGNIZED: &str = "unrecognized";
    /// The caption was machine-translated before resolution.
    pub const TRANSLATED: &str = "translated";
    /// The caption was empty, so no method was run.
    pub const EMPTY_CAPTION: &str = "empty_caption";
    /// The extracted mention retrieved no gazetteer candidates, so the
    /// predict step was skipped.
    pub const NO_CANDIDATES: &str = "no_candidates";
    /// The top gazetteer entry carries a country code missing from the
    /// country table.
    pub const UNKNOWN_COUNTRY_CODE: &str = "unknown_country_code";
}

/// Resolution method, as recorded on predictions and chosen in run configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    StringMatch,
    ZeroShot,
    Erp,
    Icl,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::StringMatch => "string_match",
            Method::ZeroShot => "zero_shot",
            Method::Erp => "erp",
            Method::Icl => "icl",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "string_match" => Ok(Method::StringMatch),
            "zero_shot" => Ok(Method::ZeroShot),
            "erp" => Ok(Method::Erp),
            "icl" => Ok(Method::Icl),
            other => Err(format!(
                "unknown method {other:?} (expected string_match, zero_shot, erp, or icl)"
            )),
        }
    }
}

/// Where a location mention came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MentionSource {
    StringMatch,
    Provider,
}

/// A location mention inside a caption.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocationMention {
    pub text: String,
    /// Byte offsets into the caption the method actually ran on (the
    /// translated text, if translation was applied). String-match mentions
    /// always slice that caption to `text`; provider mentions carry a span
    /// only when the reply occurs verbatim in the caption.
    pub span: Option<(usize, usize)>,
    pub source: MentionSource,
}

/// A gazetteer candidate as shown to the predict step, kept for audit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievedCandidate {
    pub id: u64,
    pub name: String,
    pub country_code: String,
    /// Edit distance between the normalized mention and the matched key.
    pub distance: usize,
}

impl RetrievedCandidate {
    fn from_candidate(c: &Candidate<'_>) -> Self {
        Self {
            id: c.entry.id,
            name: c.entry.name.clone(),
            country_code: c.entry.country_code.clone(),
            distance: c.distance,
        }
    }
}

/// The outcome of resolving one caption.
#[derive(Debug, Clone, PartialEq)]
pub struct CountryPrediction {
    pub country: Canonicalized,
    pub mention: Option<LocationMention>,
    pub candidates: Vec<RetrievedCandidate>,
    pub method: Method,
    /// Raw provider reply, kept verbatim for audit.
    pub provider_raw: Option<String>,
    pub flags: Vec<String>,
}

impl CountryPrediction {
    fn no_country(method: Method, reason: NoCountryReason, flags: Vec<&str>) -> Self {
        Self {
            country: Canonicalized::NoCountry(reason),
            mention: None,
            candidates: Vec::new(),
            method,
            provider_raw: None,
            flags: flags.into_iter().map(str::to_owned).collect(),
        }
    }

    fn provider_error(method: Method) -> Self {
        Self::no_country(method, NoCountryReason::Unrecognized, vec![flags::PROVIDER_ERROR])
    }

    /// The resolved country, if the caption landed on one.
    pub fn located(&self) -> Option<&CanonicalCountry> {
        match &self.country {
            Canonicalized::Country(c) => Some(c),
            Canonicalized::NoCountry(_) => None,
        }
    }

    /// Whether the provider path failed for this record. Such records are
    /// excluded from distribution denominators rather than counted as
    /// no-country.
    pub fn is_provider_error(&self) -> bool {
        self.flags.iter().any(|f| f == flags::PROVIDER_ERROR)
    }

    /// The per-caption output line.
    pub fn to_line(&self, id: &str) -> PredictionLine {
        PredictionLine {
            id: id.to_string(),
            country: self.located().map(|c| c.name.clone()),
            method: self.method,
            mention: self.mention.as_ref().map(|m| m.text.clone()),
            flags: self.flags.clone(),
        }
    }
}

/// One JSON line per caption: `{id, country|null, method, mention?, flags[]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionLine {
    pub id: String,
    pub country: Option<String>,
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mention: Option<String>,
    #[serde(default)]
    pub flags: Vec<String>,
}

/// An input record: one caption, optionally tied to an entity, an image, and
/// an embedding row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionRecord {
    pub id: String,
    pub caption: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity: Option<String>,
    /// BCP-47 tag; absent means the caption is assumed English.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<String>,
    /// Row index into the run's embedding file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_row: Option<u64>,
}

impl CaptionRecord {
    pub fn new(id: impl Into<String>, caption: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            caption: caption.into(),
            entity: None,
            language: None,
            image_ref: None,
            embedding_row: None,
        }
    }

    /// Parse one JSON line, enforcing the ingestion invariants.
    pub fn from_json_line(line: &str) -> Result<Self, RecordError> {
        let record: Self = serde_json::from_str(line)?;
        record.validate()?;
        Ok(record)
    }

    /// Parse one `id<TAB>entity<TAB>caption` line. An empty entity field
    /// means no entity.
    pub fn from_tsv_line(line: &str) -> Result<Self, RecordError> {
        let mut fields = line.splitn(3, '\t');
        let (Some(id), Some(entity), Some(caption)) =
            (fields.next(), fields.next(), fields.next())
        else {
            return Err(RecordError::TsvShape);
        };
        let record = Self {
            id: id.to_string(),
            caption: caption.trim_end_matches('\r').to_string(),
            entity: (!entity.is_empty()).then(|| entity.to_string()),
            language: None,
            image_ref: None,
            embedding_row: None,
        };
        record.validate()?;
        Ok(record)
    }

    /// Ingestion invariants: the caption is non-empty, and the entity (when
    /// set) occurs in the caption as a contiguous run of whole tokens,
    /// compared after normalization so casing and diacritics don't matter.
    pub fn validate(&self) -> Result<(), RecordError> {
        if self.caption.trim().is_empty() {
            return Err(RecordError::EmptyCaption { id: self.id.clone() });
        }
        if let Some(entity) = &self.entity {
            if !caption_contains_entity(&self.caption, entity) {
                return Err(RecordError::EntityMissing {
                    id: self.id.clone(),
                    entity: entity.clone(),
                });
            }
        }
        Ok(())
    }
}

fn caption_contains_entity(caption: &str, entity: &str) -> bool {
    let entity_norm = normalize_name(entity);
    if entity_norm.is_empty() {
        return false;
    }
    let caption_norm = normalize_name(caption);
    let needle: Vec<&str> = entity_norm.split(' ').collect();
    let haystack: Vec<&str> = caption_norm.split(' ').collect();
    haystack.windows(needle.len()).any(|w| w == needle)
}

/// Why a caption record was rejected at ingestion.
#[derive(Debug, Error)]
pub enum RecordError {
    #[error("caption record is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("tab-separated caption record must be id<TAB>entity<TAB>caption")]
    TsvShape,
    #[error("caption record {id:?} has an empty caption")]
    EmptyCaption { id: String },
    #[error("caption record {id:?}: entity {entity:?} is not a word of the caption")]
    EntityMissing { id: String, entity: String },
}

/// Failures below the per-record level: template misuse, precondition
/// violations, and provider errors bubbling through the free functions.
#[derive(Debug, Error)]
pub enum GeolocateError {
    #[error("prompt slot {0:?} was not supplied")]
    MissingSlot(String),
    #[error("prompt slot {0:?} is empty")]
    EmptySlot(String),
    #[error("slot {0:?} does not appear in the template")]
    UnknownSlot(String),
    #[error("location mention is empty")]
    EmptyMention,
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// The four shipped prompt templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptKind {
    ZeroShot,
    Extract,
    Predict,
    Icl,
}

impl PromptKind {
    pub fn template(self) -> &'static str {
        match self {
            PromptKind::ZeroShot => assets::PROMPT_ZERO_SHOT,
            PromptKind::Extract => assets::PROMPT_EXTRACT,
            PromptKind::Predict => assets::PROMPT_PREDICT,
            PromptKind::Icl => assets::PROMPT_ICL,
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            PromptKind::ZeroShot => "zero_shot",
            PromptKind::Extract => "extract",
            PromptKind::Predict => "predict",
            PromptKind::Icl => "icl",
        }
    }
}

/// Fill a prompt template's `{slot}` placeholders.
///
/// Substitution is byte-exact: the output is the template with each
/// placeholder replaced by its slot value and nothing else touched, so slot
/// values are never rescanned for placeholders. Every placeholder needs a
/// non-empty value, and every supplied slot must exist in the template.
pub fn render_prompt(
    kind: PromptKind,
    slots: &BTreeMap<&str, &str>,
) -> Result<String, GeolocateError> {
    render_template(kind.template(), slots)
}

/// Placeholder sites `(start, end, name)` in template byte order. A
/// placeholder is `{` + a lowercase ASCII/underscore name + `}`; anything
/// else involving braces is literal text.
fn placeholder_sites(template: &str) -> Vec<(usize, usize, &str)> {
    let mut sites = Vec::new();
    let mut i = 0;
    while let Some(rel) = template[i..].find('{') {
        let open = i + rel;
        let Some(rel_close) = template[open + 1..].find(['{', '}']) else {
            break;
        };
        let close = open + 1 + rel_close;
        if template.as_bytes()[close] != b'}' {
            i = close; // found another '{' first; rescan from it
            continue;
        }
        let name = &template[open + 1..close];
        if !name.is_empty() && name.bytes().all(|b| b.is_ascii_lowercase() || b == b'_') {
            sites.push((open, close + 1, name));
        }
        i = close + 1;
    }
    sites
}

fn render_template(
    template: &str,
    slots: &BTreeMap<&str, &str>,
) -> Result<String, GeolocateError> {
    let sites = placeholder_sites(template);
    for name in slots.keys() {
        if !sites.iter().any(|&(_, _, n)| n == *name) {
            return Err(GeolocateError::UnknownSlot((*name).to_string()));
        }
    }
    let mut out = String::with_capacity(template.len());
    let mut cursor = 0;
    for (start, end, name) in sites {
        let value = slots
            .get(name)
            .ok_or_else(|| GeolocateError::MissingSlot(name.to_string()))?;
        if value.is_empty() {
            return Err(GeolocateError::EmptySlot(name.to_string()));
        }
        out.push_str(&template[cursor..start]);
        out.push_str(value);
        cursor = end;
    }
    out.push_str(&template[cursor..]);
    Ok(out)
}

/// Ask the provider for the caption's primary location mention.
///
/// Returns `None` for a blank caption (no call made) and for a trimmed reply
/// of "no" (any casing); otherwise the trimmed reply is the mention.
pub fn extract_via_provider(
    caption: &str,
    provider: &dyn TextCompletionProvider,
) -> Result<Option<String>, GeolocateError> {
    if caption.trim().is_empty() {
        return Ok(None);
    }
    let prompt = render_prompt(PromptKind::Extract, &BTreeMap::from([("text", caption)]))?;
    let reply = provider.complete(&prompt)?;
    let trimmed = reply.trim();
    if trimmed.eq_ignore_ascii_case("no") {
        Ok(None)
    } else {
        Ok(Some(trimmed.to_string()))
    }
}

/// `location -> country` context lines for the predict prompt, in retrieval
/// rank order. Entries whose country code is missing from the table fall
/// back to the bare code rather than losing the candidate.
fn candidate_lines(candidates: &[Candidate<'_>], table: &CountryTable) -> String {
    let lines: Vec<String> = candidates
        .iter()
        .map(|c| {
            let country = table
                .get_by_iso2(&c.entry.country_code)
                .map_or(c.entry.country_code.as_str(), |c| c.name.as_str());
            format!("{} -> {}", c.entry.name, country)
        })
        .collect();
    lines.join("\n")
}

fn mention_in(caption: &str, text: &str, source: MentionSource) -> LocationMention {
    LocationMention {
        text: text.to_string(),
        span: caption.find(text).map(|s| (s, s + text.len())),
        source,
    }
}

/// The retrieve-and-predict half of `erp`: look the mention up in the
/// gazetteer, show the ten nearest entries to the provider, canonicalize its
/// reply.
///
/// A mention that retrieves nothing short-circuits to no-country with a
/// `no_candidates` flag — the predict prompt requires a non-empty example
/// block, and a reply unsupported by any candidate would be pure guesswork.
pub fn predict_country_erp(
    caption: &str,
    mention: &str,
    index: &GazetteerIndex,
    provider: &dyn TextCompletionProvider,
    table: &CountryTable,
) -> Result<CountryPrediction, GeolocateError> {
    if mention.trim().is_empty() {
        return Err(GeolocateError::EmptyMention);
    }
    let retrieved = index.retrieve_topk(mention, ERP_CANDIDATES);
    let mention_record = mention_in(caption, mention, MentionSource::Provider);
    let candidates: Vec<RetrievedCandidate> =
        retrieved.iter().map(RetrievedCandidate::from_candidate).collect();
    if candidates.is_empty() {
        return Ok(CountryPrediction {
            country: Canonicalized::NoCountry(NoCountryReason::Unrecognized),
            mention: Some(mention_record),
            candidates,
            method: Method::Erp,
            provider_raw: None,
            flags: vec![flags::NO_CANDIDATES.to_string()],
        });
    }
    let examples = candidate_lines(&retrieved, table);
    let prompt = render_prompt(
        PromptKind::Predict,
        &BTreeMap::from([("examples", examples.as_str()), ("text", caption)]),
    )?;
    let reply = provider.complete(&prompt)?;
    Ok(reply_prediction(table, Method::Erp, reply, Some(mention_record), candidates))
}

/// Canonicalize a provider reply into a prediction.
fn reply_prediction(
    table: &CountryTable,
    method: Method,
    reply: String,
    mention: Option<LocationMention>,
    candidates: Vec<RetrievedCandidate>,
) -> CountryPrediction {
    let country = table.canonicalize(&reply);
    let mut flag_list = Vec::new();
    if country == Canonicalized::NoCountry(NoCountryReason::Unrecognized) {
        flag_list.push(flags::UNRECOGNIZED.to_string());
    }
    CountryPrediction {
        country,
        mention,
        candidates,
        method,
        provider_raw: Some(reply),
        flags: flag_list,
    }
}

/// Resolve a caption by gazetteer string matching alone: first mention,
/// top-ranked entry, that entry's country. No mentions means a confident
/// no-country, not an error.
pub fn geolocate_string_match(
    caption: &str,
    matcher: &StringMatcher,
    index: &GazetteerIndex,
    table: &CountryTable,
) -> CountryPrediction {
    let mut mentions = matcher.extract(caption);
    if mentions.is_empty() {
        return CountryPrediction::no_country(Method::StringMatch, NoCountryReason::Sentinel, vec![]);
    }
    let mention = mentions.swap_remove(0);
    let retrieved = index.retrieve_topk(&mention.text, 1);
    let candidates: Vec<RetrievedCandidate> =
        retrieved.iter().map(RetrievedCandidate::from_candidate).collect();
    let Some(top) = retrieved.first() else {
        // Unreachable when the mention came from this index's own keys;
        // handled for direct callers passing foreign mentions.
        return CountryPrediction {
            country: Canonicalized::NoCountry(NoCountryReason::Unrecognized),
            mention: Some(mention),
            candidates,
            method: Method::StringMatch,
            provider_raw: None,
            flags: vec![flags::NO_CANDIDATES.to_string()],
        };
    };
    let (country, flag_list) = match table.get_by_iso2(&top.entry.country_code) {
        Some(c) => (Canonicalized::Country(c.clone()), vec![]),
        None => (
            Canonicalized::NoCountry(NoCountryReason::Unrecognized),
            vec![flags::UNKNOWN_COUNTRY_CODE.to_string()],
        ),
    };
    CountryPrediction {
        country,
        mention: Some(mention),
        candidates,
        method: Method::StringMatch,
        provider_raw: None,
        flags: flag_list,
    }
}

/// A method bound to its index, country table, and providers — everything
/// [`Geolocator::geolocate_caption`] needs, validated at construction so the
/// per-caption path cannot hit a configuration error.
pub struct Geolocator<'a> {
    method: Method,
    index: &'a GazetteerIndex,
    table: &'a CountryTable,
    matcher: Option<StringMatcher>,
    provider: Option<&'a dyn TextCompletionProvider>,
    translator: Option<&'a dyn TextCompletionProvider>,
    icl_examples: Option<String>,
}

impl<'a> Geolocator<'a> {
    /// Offline gazetteer matching; builds the caption matcher once.
    pub fn string_match(index: &'a GazetteerIndex, table: &'a CountryTable) -> Self {
        Self {
            method: Method::StringMatch,
            index,
            table,
            matcher: Some(StringMatcher::new(index)),
            provider: None,
            translator: None,
            icl_examples: None,
        }
    }

    pub fn zero_shot(
        index: &'a GazetteerIndex,
        table: &'a CountryTable,
        provider: &'a dyn TextCompletionProvider,
    ) -> Self {
        Self {
            method: Method::ZeroShot,
            index,
            table,
            matcher: None,
            provider: Some(provider),
            translator: None,
            icl_examples: None,
        }
    }

    pub fn erp(
        index: &'a GazetteerIndex,
        table: &'a CountryTable,
        provider: &'a dyn TextCompletionProvider,
    ) -> Self {
        Self {
            method: Method::Erp,
            index,
            table,
            matcher: None,
            provider: Some(provider),
            translator: None,
            icl_examples: None,
        }
    }

    /// In-context variant; the exemplar block fills the prompt's `examples`
    /// slot and so must be non-empty.
    pub fn icl(
        index: &'a GazetteerIndex,
        table: &'a CountryTable,
        provider: &'a dyn TextCompletionProvider,
        exemplars: &str,
    ) -> Result<Self, GeolocateError> {
        if exemplars.trim().is_empty() {
            return Err(GeolocateError::EmptySlot("examples".to_string()));
        }
        Ok(Self {
            method: Method::Icl,
            index,
            table,
            matcher: None,
            provider: Some(provider),
            translator: None,
            icl_examples: Some(exemplars.to_string()),
        })
    }

    /// Route non-English captions through this provider before resolution.
    pub fn with_translator(mut self, translator: &'a dyn TextCompletionProvider) -> Self {
        self.translator = Some(translator);
        self
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// Resolve one caption. Total: every failure mode becomes a prediction
    /// (no-country or `provider_error`), never a panic or a silent skip.
    pub fn geolocate_caption(&self, record: &CaptionRecord) -> CountryPrediction {
        if record.caption.trim().is_empty() {
            return CountryPrediction::no_country(
                self.method,
                NoCountryReason::Sentinel,
                vec![flags::EMPTY_CAPTION],
            );
        }

        let mut extra_flags: Vec<String> = Vec::new();
        let caption: Cow<'_, str> = if self.wants_translation(record) {
            let translator = self.translator.expect("wants_translation checked");
            match translator.complete(&record.caption) {
                Ok(translated) if translated.trim().is_empty() => {
                    return CountryPrediction::no_country(
                        self.method,
                        NoCountryReason::Sentinel,
                        vec![flags::TRANSLATED, flags::EMPTY_CAPTION],
                    );
                }
                Ok(translated) => {
                    extra_flags.push(flags::TRANSLATED.to_string());
                    Cow::Owned(translated)
                }
                Err(_) => return CountryPrediction::provider_error(self.method),
            }
        } else {
            Cow::Borrowed(record.caption.as_str())
        };

        let mut prediction = match self.method {
            Method::StringMatch => {
                let matcher = self.matcher.as_ref().expect("built in constructor");
                geolocate_string_match(&caption, matcher, self.index, self.table)
            }
            Method::ZeroShot => self.prompt_only(PromptKind::ZeroShot, &caption, None),
            Method::Icl => {
                self.prompt_only(PromptKind::Icl, &caption, self.icl_examples.as_deref())
            }
            Method::Erp => self.erp_flow(&caption),
        };
        if !extra_flags.is_empty() {
            extra_flags.append(&mut prediction.flags);
            prediction.flags = extra_flags;
        }
        prediction
    }

    /// Single-call methods: render, complete, canonicalize.
    fn prompt_only(
        &self,
        kind: PromptKind,
        caption: &str,
        examples: Option<&str>,
    ) -> CountryPrediction {
        let provider = self.provider.expect("provider methods carry a provider");
        let mut slots = BTreeMap::from([("text", caption)]);
        if let Some(block) = examples {
            slots.insert("examples", block);
        }
        let reply = render_prompt(kind, &slots).and_then(|p| Ok(provider.complete(&p)?));
        match reply {
            Ok(reply) => reply_prediction(self.table, self.method, reply, None, Vec::new()),
            Err(_) => CountryPrediction::provider_error(self.method),
        }
    }

    fn erp_flow(&self, caption: &str) -> CountryPrediction {
        let provider = self.provider.expect("provider methods carry a provider");
        match extract_via_provider(caption, provider) {
            Err(_) => CountryPrediction::provider_error(Method::Erp),
            Ok(None) => {
                CountryPrediction::no_country(Method::Erp, NoCountryReason::Sentinel, vec![])
            }
            Ok(Some(mention)) => {
                match predict_country_erp(caption, &mention, self.index, provider, self.table) {
                    Ok(prediction) => prediction,
                    Err(_) => {
                        let mut prediction = CountryPrediction::provider_error(Method::Erp);
                        prediction.mention =
                            Some(mention_in(caption, &mention, MentionSource::Provider));
                        prediction
                    }
                }
            }
        }
    }

    fn wants_translation(&self, record: &CaptionRecord) -> bool {
        self.translator.is_some()
            && record.language.as_deref().is_some_and(|tag| !is_english_tag(tag))
    }
}

fn is_english_tag(tag: &str) -> bool {
    let primary = tag.split(['-', '_']).next().unwrap_or("");
    primary.eq_ignore_ascii_case("en")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gazetteer::test_fixture;
    use proptest::prelude::*;

    fn table() -> &'static CountryTable {
        CountryTable::builtin()
    }

    fn slots<'s>(pairs: &[(&'s str, &'s str)]) -> BTreeMap<&'s str, &'s str> {
        pairs.iter().copied().collect()
    }

    /// Proves a code path never reaches the provider.
    struct PanickingProvider;

    impl TextCompletionProvider for PanickingProvider {
        fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
            panic!("provider must not be called, got prompt: {prompt}");
        }
    }

    /// Always fails with a transport error.
    struct FailingProvider;

    impl TextCompletionProvider for FailingProvider {
        fn complete(&self, _prompt: &str) -> Result<String, ProviderError> {
            Err(ProviderError::Transport { message: "wire cut".to_string(), attempts: 3 })
        }
    }

    /// Every prediction is in exactly one terminal state: located, honest
    /// no-country, or provider failure.
    fn assert_terminal(p: &CountryPrediction) {
        if p.is_provider_error() {
            assert!(p.located().is_none(), "provider_error predictions carry no country");
        }
    }

    // ---- prompt rendering ----

    #[test]
    fn render_substitutes_caption_into_extract_template() {
        let caption = "Jade Court Motor Lodge, hotel in Hokitika";
        let prompt = render_prompt(PromptKind::Extract, &slots(&[("text", caption)])).unwrap();
        assert!(prompt.starts_with("You are a geoparsing agent"));
        assert!(prompt.ends_with(&format!("Text: {caption}\n")));
        assert!(!prompt.contains("{text}"));
    }

    #[test]
    fn render_keeps_every_candidate_line() {
        let lines: Vec<String> =
            (0..10).map(|i| format!("Place{i} -> Country{i}")).collect();
        let block = lines.join("\n");
        let prompt =
            render_prompt(PromptKind::Predict, &slots(&[("examples", &block), ("text", "x")]))
                .unwrap();
        for line in &lines {
            assert!(prompt.contains(line.as_str()));
        }
    }

    #[test]
    fn render_rejects_missing_empty_and_unknown_slots() {
        assert!(matches!(
            render_prompt(PromptKind::Predict, &slots(&[("text", "x")])),
            Err(GeolocateError::MissingSlot(name)) if name == "examples"
        ));
        assert!(matches!(
            render_prompt(PromptKind::Icl, &slots(&[("examples", ""), ("text", "x")])),
            Err(GeolocateError::EmptySlot(name)) if name == "examples"
        ));
        assert!(matches!(
            render_prompt(PromptKind::ZeroShot, &slots(&[("text", "x"), ("bogus", "y")])),
            Err(GeolocateError::UnknownSlot(name)) if name == "bogus"
        ));
    }

    #[test]
    fn render_is_byte_exact() {
        for (kind, slot_names) in [
            (PromptKind::ZeroShot, vec!["text"]),
            (PromptKind::Extract, vec!["text"]),
            (PromptKind::Predict, vec!["examples", "text"]),
            (PromptKind::Icl, vec!["examples", "text"]),
        ] {
            let sites = placeholder_sites(kind.template());
            let names: Vec<&str> = sites.iter().map(|&(_, _, n)| n).collect();
            assert_eq!(names, slot_names, "template {:?}", kind.id());

            let values: Vec<(&str, &str)> =
                slot_names.iter().map(|&n| (n, "VALUE {not a slot}")).collect();
            let rendered = render_prompt(kind, &slots(&values)).unwrap();
            let placeholder_len: usize = sites.iter().map(|&(s, e, _)| e - s).sum();
            let value_len = "VALUE {not a slot}".len() * slot_names.len();
            assert_eq!(
                rendered.len(),
                kind.template().len() - placeholder_len + value_len
            );
            assert!(rendered.contains("VALUE {not a slot}"));
        }
    }

    proptest! {
        #[test]
        fn render_length_identity_holds_for_arbitrary_values(
            examples in "\\PC{1,60}",
            text in "\\PC{1,60}",
        ) {
            let template = PromptKind::Predict.template();
            let sites = placeholder_sites(template);
            let rendered = render_prompt(
                PromptKind::Predict,
                &slots(&[("examples", &examples), ("text", &text)]),
            ).unwrap();
            let placeholder_len: usize = sites.iter().map(|&(s, e, _)| e - s).sum();
            prop_assert_eq!(
                rendered.len(),
                template.len() - placeholder_len + examples.len() + text.len()
            );
            prop_assert!(rendered.contains(&examples));
            prop_assert!(rendered.contains(&text));
        }
    }

    // ---- extract step ----

    #[test]
    fn extract_returns_mention_or_none_for_sentinel() {
        let caption = "Jade Court Motor Lodge, hotel in Hokitika";
        let prompt = render_prompt(PromptKind::Extract, &slots(&[("text", caption)])).unwrap();
        let provider = RecordedTranscriptProvider::from_pairs([(prompt.as_str(), "Hokitika")]);
        assert_eq!(extract_via_provider(caption, &provider).unwrap().as_deref(), Some("Hokitika"));

        let caption = "Kitchen and dining space";
        let prompt = render_prompt(PromptKind::Extract, &slots(&[("text", caption)])).unwrap();
        for sentinel in ["no", "NO", " No \n"] {
            let provider = RecordedTranscriptProvider::from_pairs([(prompt.as_str(), sentinel)]);
            assert_eq!(extract_via_provider(caption, &provider).unwrap(), None);
        }
    }

    #[test]
    fn extract_skips_provider_for_blank_captions() {
        assert_eq!(extract_via_provider("", &PanickingProvider).unwrap(), None);
        assert_eq!(extract_via_provider("   ", &PanickingProvider).unwrap(), None);
    }

    #[test]
    fn extract_propagates_provider_failure() {
        assert!(matches!(
            extract_via_provider("some caption", &FailingProvider),
            Err(GeolocateError::Provider(ProviderError::Transport { .. }))
        ));
    }

    // ---- predict step ----

    #[test]
    fn predict_hokitika_against_single_country_candidates() {
        let index = test_fixture();
        let caption = "Jade Court Motor Lodge, hotel in Hokitika";
        let p = predict_country_erp(
            caption,
            "Hokitika",
            &index,
            &EchoTopCandidateProvider,
            table(),
        )
        .unwrap();
        assert_eq!(p.located().unwrap().iso2, "NZ");
        assert_eq!(p.method, Method::Erp);
        assert!(!p.candidates.is_empty());
        assert!(p.candidates.iter().all(|c| c.country_code == "NZ"));
        assert_eq!(p.provider_raw.as_deref(), Some("New Zealand"));
        let mention = p.mention.as_ref().unwrap();
        assert_eq!(mention.source, MentionSource::Provider);
        assert_eq!(mention.span, Some((33, 41)));
        assert_terminal(&p);
    }

    #[test]
    fn predict_renders_candidate_lines_in_rank_order() {
        // Independently rendered prompt: if the candidate-line format or
        // order drifted, the transcript lookup would miss and this test
        // would fail with MissingTranscript.
        let index = test_fixture();
        let caption = "postcard from Cambridge";
        let examples = "Cambridge -> United Kingdom\nCambridge -> United States";
        let prompt = render_prompt(
            PromptKind::Predict,
            &slots(&[("examples", examples), ("text", caption)]),
        )
        .unwrap();
        let provider =
            RecordedTranscriptProvider::from_pairs([(prompt.as_str(), "United Kingdom")]);
        let p = predict_country_erp(caption, "Cambridge", &index, &provider, table()).unwrap();
        assert_eq!(p.located().unwrap().iso2, "GB");
        let codes: Vec<&str> = p.candidates.iter().map(|c| c.country_code.as_str()).collect();
        assert_eq!(codes, ["GB", "US"]);

        // The canonicalizer absorbs the abbreviation the prompt forbids.
        let provider = RecordedTranscriptProvider::from_pairs([(prompt.as_str(), "UK")]);
        let p = predict_country_erp(caption, "Cambridge", &index, &provider, table()).unwrap();
        assert_eq!(p.located().unwrap().iso2, "GB");
    }

    #[test]
    fn predict_flags_unrecognized_replies() {
        let index = test_fixture();
        let caption = "postcard from Cambridge";
        let examples = "Cambridge -> United Kingdom\nCambridge -> United States";
        let prompt = render_prompt(
            PromptKind::Predict,
            &slots(&[("examples", examples), ("text", caption)]),
        )
        .unwrap();
        let provider = RecordedTranscriptProvider::from_pairs([(prompt.as_str(), "Atlantis")]);
        let p = predict_country_erp(caption, "Cambridge", &index, &provider, table()).unwrap();
        assert_eq!(p.located(), None);
        assert_eq!(p.country, Canonicalized::NoCountry(NoCountryReason::Unrecognized));
        assert_eq!(p.flags, vec![flags::UNRECOGNIZED]);
        assert_eq!(p.provider_raw.as_deref(), Some("Atlantis"));
        assert_terminal(&p);
    }

    #[test]
    fn predict_requires_a_mention() {
        let index = test_fixture();
        for mention in ["", "  "] {
            assert!(matches!(
                predict_country_erp("caption", mention, &index, &PanickingProvider, table()),
                Err(GeolocateError::EmptyMention)
            ));
        }
    }

    #[test]
    fn predict_short_circuits_when_nothing_is_retrieved() {
        let index = test_fixture();
        let p = predict_country_erp(
            "photo of Zzyzzx Qwrbl at dusk",
            "Zzyzzx Qwrbl",
            &index,
            &PanickingProvider,
            table(),
        )
        .unwrap();
        assert_eq!(p.located(), None);
        assert_eq!(p.flags, vec![flags::NO_CANDIDATES]);
        assert!(p.candidates.is_empty());
        assert_eq!(p.provider_raw, None);
        assert_terminal(&p);
    }

    // ---- string matching end to end ----

    #[test]
    fn string_match_resolves_famous_fixture_captions() {
        let index = test_fixture();
        let matcher = StringMatcher::new(&index);
        let cases = [
            ("Happy boys at Copacabana Beach", "BR"),
            ("Rules for using the toilet in Sochi", "RU"),
            ("Paris in the spring", "FR"),
        ];
        for (caption, iso2) in cases {
            let p = geolocate_string_match(caption, &matcher, &index, table());
            assert_eq!(p.located().unwrap().iso2, iso2, "caption {caption:?}");
            assert_eq!(p.method, Method::StringMatch);
            assert_eq!(p.candidates.len(), 1);
            let mention = p.mention.as_ref().unwrap();
            let (s, e) = mention.span.unwrap();
            assert_eq!(&caption[s..e], mention.text);
            assert_terminal(&p);
        }
    }

    #[test]
    fn string_match_without_mentions_is_no_country() {
        let index = test_fixture();
        let matcher = StringMatcher::new(&index);
        let p = geolocate_string_match(
            "Exterior house colors with brown roof 04",
            &matcher,
            &index,
            table(),
        );
        assert_eq!(p.country, Canonicalized::NoCountry(NoCountryReason::Sentinel));
        assert_eq!(p.mention, None);
        assert!(p.flags.is_empty());
        assert_terminal(&p);
    }

    // ---- orchestration ----

    #[test]
    fn every_method_maps_blank_captions_to_no_country() {
        let index = test_fixture();
        let panicking = PanickingProvider;
        let geolocators = [
            Geolocator::string_match(&index, table()),
            Geolocator::zero_shot(&index, table(), &panicking),
            Geolocator::erp(&index, table(), &panicking),
            Geolocator::icl(&index, table(), &panicking, "Berlin -> Germany").unwrap(),
        ];
        for geo in &geolocators {
            for caption in ["", "   \t"] {
                let p = geo.geolocate_caption(&CaptionRecord::new("r1", caption));
                assert_eq!(p.located(), None);
                assert!(p.flags.iter().any(|f| f == flags::EMPTY_CAPTION));
                assert!(!p.is_provider_error());
                assert_terminal(&p);
            }
        }
    }

    #[test]
    fn zero_shot_round_trip() {
        let index = test_fixture();
        let caption = "Happy boys at Copacabana Beach";
        let prompt = render_prompt(PromptKind::ZeroShot, &slots(&[("text", caption)])).unwrap();

        let provider = RecordedTranscriptProvider::from_pairs([(prompt.as_str(), "Brazil")]);
        let geo = Geolocator::zero_shot(&index, table(), &provider);
        let p = geo.geolocate_caption(&CaptionRecord::new("r1", caption));
        assert_eq!(p.located().unwrap().iso2, "BR");
        assert_eq!(p.method, Method::ZeroShot);
        assert_eq!(p.mention, None);
        assert_eq!(p.provider_raw.as_deref(), Some("Brazil"));

        let provider = RecordedTranscriptProvider::from_pairs([(prompt.as_str(), "no")]);
        let geo = Geolocator::zero_shot(&index, table(), &provider);
        let p = geo.geolocate_caption(&CaptionRecord::new("r1", caption));
        assert_eq!(p.country, Canonicalized::NoCountry(NoCountryReason::Sentinel));
        assert!(p.flags.is_empty(), "the sentinel is a recognized reply");
    }

    #[test]
    fn icl_uses_the_configured_exemplar_block() {
        let index = test_fixture();
        let caption = "snow over the Kremlin";
        let exemplars = "Eiffel Tower at night -> France\nBondi surfers -> Australia";
        let prompt = render_prompt(
            PromptKind::Icl,
            &slots(&[("examples", exemplars), ("text", caption)]),
        )
        .unwrap();
        let provider = RecordedTranscriptProvider::from_pairs([(prompt.as_str(), "Russia")]);
        let geo = Geolocator::icl(&index, table(), &provider, exemplars).unwrap();
        let p = geo.geolocate_caption(&CaptionRecord::new("r1", caption));
        assert_eq!(p.located().unwrap().iso2, "RU");
        assert_eq!(p.method, Method::Icl);

        assert!(matches!(
            Geolocator::icl(&index, table(), &provider, "  "),
            Err(GeolocateError::EmptySlot(_))
        ));
    }

    #[test]
    fn erp_end_to_end_with_recorded_transcripts() {
        let index = test_fixture();
        let caption = "Car on Rent in Vadodara with Driver";
        let extract_prompt =
            render_prompt(PromptKind::Extract, &slots(&[("text", caption)])).unwrap();
        let predict_prompt = render_prompt(
            PromptKind::Predict,
            &slots(&[("examples", "Vadodara -> India"), ("text", caption)]),
        )
        .unwrap();
        let provider = RecordedTranscriptProvider::from_pairs([
            (extract_prompt.as_str(), "Vadodara"),
            (predict_prompt.as_str(), "India"),
        ]);
        let geo = Geolocator::erp(&index, table(), &provider);
        let p = geo.geolocate_caption(&CaptionRecord::new("r1", caption));
        assert_eq!(p.located().unwrap().iso2, "IN");
        assert_eq!(p.method, Method::Erp);
        // Located erp predictions always carry their mention.
        let mention = p.mention.as_ref().unwrap();
        assert_eq!(mention.text, "Vadodara");
        assert_eq!(mention.span, Some((15, 23)));
        assert_terminal(&p);
    }

    #[test]
    fn erp_extract_sentinel_is_no_country() {
        let index = test_fixture();
        let caption = "Kitchen and dining space";
        let extract_prompt =
            render_prompt(PromptKind::Extract, &slots(&[("text", caption)])).unwrap();
        let provider = RecordedTranscriptProvider::from_pairs([(extract_prompt.as_str(), "NO")]);
        let geo = Geolocator::erp(&index, table(), &provider);
        let p = geo.geolocate_caption(&CaptionRecord::new("r1", caption));
        assert_eq!(p.country, Canonicalized::NoCountry(NoCountryReason::Sentinel));
        assert_eq!(p.mention, None);
        assert!(!p.is_provider_error());
        assert_terminal(&p);
    }

    #[test]
    fn provider_failures_are_flagged_never_silent() {
        let index = test_fixture();
        let caption = "Car on Rent in Vadodara with Driver";

        let geo = Geolocator::zero_shot(&index, table(), &FailingProvider);
        let p = geo.geolocate_caption(&CaptionRecord::new("r1", caption));
        assert!(p.is_provider_error());
        assert_eq!(p.located(), None);
        assert_eq!(p.flags, vec![flags::PROVIDER_ERROR]);
        assert_terminal(&p);

        // Extraction fails: same flag.
        let geo = Geolocator::erp(&index, table(), &FailingProvider);
        let p = geo.geolocate_caption(&CaptionRecord::new("r1", caption));
        assert!(p.is_provider_error());
        assert_terminal(&p);

        // Extraction succeeds but prediction has no recorded reply: the
        // mention survives into the failure record for audit.
        let extract_prompt =
            render_prompt(PromptKind::Extract, &slots(&[("text", caption)])).unwrap();
        let provider =
            RecordedTranscriptProvider::from_pairs([(extract_prompt.as_str(), "Vadodara")]);
        let geo = Geolocator::erp(&index, table(), &provider);
        let p = geo.geolocate_caption(&CaptionRecord::new("r1", caption));
        assert!(p.is_provider_error());
        assert_eq!(p.mention.as_ref().unwrap().text, "Vadodara");
        assert_terminal(&p);
    }

    #[test]
    fn translation_runs_only_for_non_english_records_with_a_translator() {
        let index = test_fixture();
        let translator = RecordedTranscriptProvider::from_pairs([(
            "Ein Haus in Sotschi",
            "A house in Sochi",
        )]);

        let mut record = CaptionRecord::new("r1", "Ein Haus in Sotschi");
        record.language = Some("de".to_string());
        let geo = Geolocator::string_match(&index, table()).with_translator(&translator);
        let p = geo.geolocate_caption(&record);
        assert_eq!(p.located().unwrap().iso2, "RU");
        assert!(p.flags.iter().any(|f| f == flags::TRANSLATED));
        // The mention slices the translated caption.
        assert_eq!(p.mention.as_ref().unwrap().text, "Sochi");

        // English tags (any casing/subtag shape) skip the translator.
        for tag in ["en", "EN", "en-US", "en_GB"] {
            let mut record = CaptionRecord::new("r2", "Paris in the spring");
            record.language = Some(tag.to_string());
            let geo =
                Geolocator::string_match(&index, table()).with_translator(&PanickingProvider);
            assert_eq!(geo.geolocate_caption(&record).located().unwrap().iso2, "FR");
        }

        // No translator configured: the caption passes through untouched.
        let mut record = CaptionRecord::new("r3", "Paris in the spring");
        record.language = Some("fr".to_string());
        let geo = Geolocator::string_match(&index, table());
        let p = geo.geolocate_caption(&record);
        assert_eq!(p.located().unwrap().iso2, "FR");
        assert!(p.flags.is_empty());

        // Translator failure is a provider error.
        let mut record = CaptionRecord::new("r4", "Ein Haus in Sotschi");
        record.language = Some("de".to_string());
        let geo = Geolocator::string_match(&index, table()).with_translator(&FailingProvider);
        let p = geo.geolocate_caption(&record);
        assert!(p.is_provider_error());
        assert_terminal(&p);
    }

    #[test]
    fn erp_with_echo_provider_matches_string_matching() {
        // Oracle equivalence: give erp a perfect extractor (the string
        // matcher's own first mention) and a provider that parrots the
        // top-ranked candidate's country; it must agree with plain string
        // matching on every caption that has a mention.
        let index = test_fixture();
        let matcher = StringMatcher::new(&index);
        let captions = [
            "Thumbnail 4 bed detached house for sale in Southfields, Rochester",
            "Rules for using the toilet in Sochi",
            "Happy boys at Copacabana Beach",
            "Car on Rent in Vadodara with Driver",
            "buffalo grazing in the field",
            "Paris in the spring",
            "Jade Court Motor Lodge, hotel in Hokitika",
            "postcard from Cambridge",
            "flying into mumbai tonight",
        ];
        for caption in captions {
            let sm = geolocate_string_match(caption, &matcher, &index, table());
            let mention = sm.mention.as_ref().expect("all fixture captions have a mention");
            let erp = predict_country_erp(
                caption,
                &mention.text,
                &index,
                &EchoTopCandidateProvider,
                table(),
            )
            .unwrap();
            assert_eq!(
                erp.located(),
                sm.located(),
                "methods disagree on caption {caption:?}"
            );
        }
    }

    #[test]
    fn pipeline_is_bit_reproducible_with_recorded_transcripts() {
        let run = || {
            let index = test_fixture();
            let caption = "Car on Rent in Vadodara with Driver";
            let extract_prompt =
                render_prompt(PromptKind::Extract, &slots(&[("text", caption)])).unwrap();
            let predict_prompt = render_prompt(
                PromptKind::Predict,
                &slots(&[("examples", "Vadodara -> India"), ("text", caption)]),
            )
            .unwrap();
            let provider = RecordedTranscriptProvider::from_pairs([
                (extract_prompt.as_str(), "Vadodara"),
                (predict_prompt.as_str(), "India"),
            ]);
            let geo = Geolocator::erp(&index, table(), &provider);
            let records = [
                CaptionRecord::new("a", caption),
                CaptionRecord::new("b", ""),
                CaptionRecord::new("c", "no places here"),
            ];
            records
                .iter()
                .map(|r| {
                    serde_json::to_string(&geo.geolocate_caption(r).to_line(&r.id)).unwrap()
                })
                .collect::<Vec<_>>()
                .join("\n")
        };
        assert_eq!(run(), run());
    }

    // ---- record parsing and output lines ----

    #[test]
    fn caption_records_parse_from_json_and_tsv() {
        let line = "{\"id\":\"42\",\"caption\":\"a house in Berlin\",\"entity\":\"house\",\
                    \"language\":\"en\",\"image_ref\":\"img/42.jpg\",\"embedding_row\":7}";
        let record = CaptionRecord::from_json_line(line).unwrap();
        assert_eq!(record.id, "42");
        assert_eq!(record.entity.as_deref(), Some("house"));
        assert_eq!(record.embedding_row, Some(7));
        let round_trip = serde_json::to_string(&record).unwrap();
        assert_eq!(CaptionRecord::from_json_line(&round_trip).unwrap(), record);

        let record = CaptionRecord::from_tsv_line("7\tdog\tdog sleeping in Nice\r").unwrap();
        assert_eq!(record.id, "7");
        assert_eq!(record.entity.as_deref(), Some("dog"));
        assert_eq!(record.caption, "dog sleeping in Nice");

        let record = CaptionRecord::from_tsv_line("8\t\tno entity here").unwrap();
        assert_eq!(record.entity, None);

        assert!(matches!(
            CaptionRecord::from_tsv_line("only two\tfields"),
            Err(RecordError::TsvShape)
        ));
        assert!(matches!(
            CaptionRecord::from_json_line("{\"caption\":\"x\"}"),
            Err(RecordError::Json(_))
        ));
    }

    #[test]
    fn ingestion_enforces_caption_and_entity_invariants() {
        assert!(matches!(
            CaptionRecord::from_json_line("{\"id\":\"1\",\"caption\":\"  \"}"),
            Err(RecordError::EmptyCaption { .. })
        ));
        assert!(matches!(
            CaptionRecord::from_tsv_line("2\tcat\tdog sleeping on a rug"),
            Err(RecordError::EntityMissing { .. })
        ));

        // Entity matching is token-wise and normalization-insensitive...
        let record = CaptionRecord {
            entity: Some("São Paulo".to_string()),
            ..CaptionRecord::new("3", "view over SAO PAULO at dusk")
        };
        assert!(record.validate().is_ok());

        // ...but never substring-loose.
        let record = CaptionRecord {
            entity: Some("cat".to_string()),
            ..CaptionRecord::new("4", "catalogue of chairs")
        };
        assert!(matches!(record.validate(), Err(RecordError::EntityMissing { .. })));
    }

    #[test]
    fn prediction_lines_serialize_the_agreed_shape() {
        let index = test_fixture();
        let matcher = StringMatcher::new(&index);
        let located = geolocate_string_match("Paris in the spring", &matcher, &index, table());
        let json = serde_json::to_string(&located.to_line("r9")).unwrap();
        assert_eq!(
            json,
            "{\"id\":\"r9\",\"country\":\"France\",\"method\":\"string_match\",\
             \"mention\":\"Paris\",\"flags\":[]}"
        );

        let missed = geolocate_string_match("nothing here", &matcher, &index, table());
        let json = serde_json::to_string(&missed.to_line("r10")).unwrap();
        assert!(json.contains("\"country\":null"));
        assert!(!json.contains("\"mention\""));

        let line: PredictionLine = serde_json::from_str(&json).unwrap();
        assert_eq!(line.country, None);
        assert_eq!(line.method, Method::StringMatch);
    }

    #[test]
    fn method_names_round_trip() {
        for method in [Method::StringMatch, Method::ZeroShot, Method::Erp, Method::Icl] {
            assert_eq!(method.as_str().parse::<Method>().unwrap(), method);
            let json = serde_json::to_string(&method).unwrap();
            assert_eq!(json, format!("\"{method}\""));
        }
        assert!("gps".parse::<Method>().is_err());
    }
}
