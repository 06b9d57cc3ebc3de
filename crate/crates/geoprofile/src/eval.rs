//! Gold testsets and the method-comparison harness.
//!
//! Two ways to get annotated captions:
//!
//! * load a hand-annotated JSON-lines file (manual or marginalized origin),
//! * synthesize one from the gazetteer: every entry above a population
//!   threshold is substituted into a caption template, and the entry's own
//!   country is the gold label. Synthesis is fully deterministic for a fixed
//!   (templates, index, seed) triple.
//!
//! Scoring treats country resolution as retrieval, not classification:
//!
//! * naming the gold country is a true positive;
//! * naming any other country is a false positive *and* a false negative —
//!   precision penalizes confident errors;
//! * abstaining on a located caption is a false negative only — recall
//!   penalizes timidity, but abstention never pollutes precision;
//! * naming a country when gold has none is a false positive;
//! * correctly abstaining counts nowhere.
//!
//! This makes the trade-off of an always-guess baseline visible (high
//! recall, low precision) without letting an always-abstain method look
//! precise for free: with no positive predictions, precision is reported as
//! undefined rather than 1. Provider failures surface as abstentions here —
//! a method that errors is a method that failed to answer.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gazetteer::{CanonicalCountry, CountryTable, GazetteerIndex};
use crate::geolocate::CountryPrediction;

/// The `{LOC}` marker replaced by a place name during synthesis.
pub const LOCATION_PLACEHOLDER: &str = "{LOC}";

/// Confusion-matrix label for "no country".
pub const NO_COUNTRY_LABEL: &str = "(none)";

/// How an annotated caption entered the testset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaptionOrigin {
    /// Hand-annotated by a person; the only origin where a no-country gold
    /// label is meaningful.
    Manual,
    /// Produced by [`synthesize_geo_testset`]; always carries a location.
    Synthesized,
    /// Drawn from text about under-represented regions; annotations come
    /// with the source, so a location is always present.
    Marginalized,
}

/// One caption with its gold country label (`None` = genuinely no location).
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedCaption {
    pub caption: String,
    pub gold: Option<CanonicalCountry>,
    pub origin: CaptionOrigin,
}

impl AnnotatedCaption {
    /// A caption must be non-blank, and only manual annotation can vouch
    /// that a caption has no location — synthesized and marginalized
    /// captions carry one by construction.
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.caption.trim().is_empty() {
            return Err(EvalError::EmptyCaption);
        }
        if self.gold.is_none() && self.origin != CaptionOrigin::Manual {
            return Err(EvalError::GoldRequired { origin: self.origin });
        }
        Ok(())
    }
}

/// A caption skeleton with exactly one [`LOCATION_PLACEHOLDER`] and a tag
/// naming the entity the caption is about. Curation promises the text has no
/// location mention other than the placeholder; the placeholder count is the
/// part a program can check, so construction enforces it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptionTemplate {
    text: String,
    source_entity: String,
}

impl CaptionTemplate {
    pub fn new(
        text: impl Into<String>,
        source_entity: impl Into<String>,
    ) -> Result<Self, EvalError> {
        let text = text.into();
        let found = text.matches(LOCATION_PLACEHOLDER).count();
        if found != 1 {
            return Err(EvalError::Placeholder { found });
        }
        Ok(Self { text, source_entity: source_entity.into() })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn source_entity(&self) -> &str {
        &self.source_entity
    }

    /// The template with its placeholder filled.
    pub fn fill(&self, location: &str) -> String {
        self.text.replacen(LOCATION_PLACEHOLDER, location, 1)
    }
}

/// The caption templates shipped with the crate (50 entity-tagged skeletons
/// covering the annotation entities).
pub fn shipped_templates() -> Vec<CaptionTemplate> {
    load_templates(crate::assets::CAPTION_TEMPLATES_JSONL.as_bytes())
        .expect("shipped template asset is validated by tests")
}

#[derive(Serialize, Deserialize)]
struct TemplateLine {
    template: String,
    entity: String,
}

/// Load a JSON-lines template file: `{"template": ..., "entity": ...}` per
/// line, blank lines ignored. Errors carry the 1-based line number.
pub fn load_templates<R: BufRead>(reader: R) -> Result<Vec<CaptionTemplate>, EvalError> {
    let mut templates = Vec::new();
    for (number, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: TemplateLine =
            serde_json::from_str(&line).map_err(|e| EvalError::at_line(number + 1, e))?;
        let template = CaptionTemplate::new(parsed.template, parsed.entity)
            .map_err(|e| EvalError::at_line(number + 1, e))?;
        templates.push(template);
    }
    Ok(templates)
}

#[derive(Serialize, Deserialize)]
struct TestsetLine {
    caption: String,
    gold_country: Option<String>,
    origin: CaptionOrigin,
}

/// Load a JSON-lines testset: `{"caption", "gold_country"|null, "origin"}`
/// per line. Gold names must match the country table's display names
/// exactly; errors carry the 1-based line number.
pub fn load_testset<R: BufRead>(
    reader: R,
    table: &CountryTable,
) -> Result<Vec<AnnotatedCaption>, EvalError> {
    let mut testset = Vec::new();
    for (number, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: TestsetLine =
            serde_json::from_str(&line).map_err(|e| EvalError::at_line(number + 1, e))?;
        let gold = match parsed.gold_country {
            Some(name) => Some(
                table
                    .get_by_name(&name)
                    .ok_or(EvalError::UnknownCountry { name })
                    .map_err(|e| EvalError::at_line(number + 1, e))?
                    .clone(),
            ),
            None => None,
        };
        let annotated =
            AnnotatedCaption { caption: parsed.caption, gold, origin: parsed.origin };
        annotated.validate().map_err(|e| EvalError::at_line(number + 1, e))?;
        testset.push(annotated);
    }
    Ok(testset)
}

/// Write a testset in the format [`load_testset`] reads.
pub fn write_testset<W: Write>(
    testset: &[AnnotatedCaption],
    mut writer: W,
) -> Result<(), EvalError> {
    for sample in testset {
        let line = TestsetLine {
            caption: sample.caption.clone(),
            gold_country: sample.gold.as_ref().map(|c| c.name.clone()),
            origin: sample.origin,
        };
        let json = serde_json::to_string(&line).expect("plain strings serialize");
        writeln!(writer, "{json}")?;
    }
    Ok(())
}

/// Build a synthetic gold testset by substituting gazetteer places into
/// caption templates.
///
/// Every index entry with `population >= min_population` *and* a country
/// code the table knows yields one caption (entries with unknown codes
/// cannot be given a gold label, so they do not qualify). Entries are
/// processed in id order; templates are assigned round-robin after a
/// seed-determined shuffle of the template order, so each template is used
/// equally (±1) and the seed only changes which entry gets which template.
pub fn synthesize_geo_testset(
    templates: &[CaptionTemplate],
    index: &GazetteerIndex,
    table: &CountryTable,
    min_population: u64,
    seed: u64,
) -> Result<Vec<AnnotatedCaption>, EvalError> {
    if templates.is_empty() {
        return Err(EvalError::NoTemplates);
    }
    let mut qualifying: Vec<_> = index
        .entries()
        .iter()
        .filter(|e| e.population >= min_population && table.get_by_iso2(&e.country_code).is_some())
        .collect();
    if qualifying.is_empty() {
        return Err(EvalError::NoQualifyingEntries { min_population });
    }
    qualifying.sort_by_key(|e| e.id);

    let mut order: Vec<usize> = (0..templates.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    Ok(qualifying
        .iter()
        .enumerate()
        .map(|(i, entry)| {
            let template = &templates[order[i % order.len()]];
            let gold = table.get_by_iso2(&entry.country_code).expect("filtered above").clone();
            AnnotatedCaption {
                caption: template.fill(&entry.name),
                gold: Some(gold),
                origin: CaptionOrigin::Synthesized,
            }
        })
        .collect())
}

/// Micro-averaging pools true/false positives over all samples; macro
/// averages per-country precision and recall, weighting rare countries
/// equally with common ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Averaging {
    Micro,
    Macro,
}

/// Scores plus the evidence behind them. The counts and the confusion
/// matrix are always the raw pooled tallies; only `precision`/`recall`
/// depend on the averaging mode. `None` means undefined (zero denominator),
/// reported as such rather than coerced to 0 or 1.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodScore {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// `(gold label, predicted label) -> count`, with [`NO_COUNTRY_LABEL`]
    /// standing in for "no country" on either side.
    pub confusion: BTreeMap<(String, String), usize>,
}

/// Score one resolution method over a testset, micro-averaged.
pub fn evaluate_method(
    method: impl FnMut(&str) -> CountryPrediction,
    testset: &[AnnotatedCaption],
) -> MethodScore {
    evaluate_method_with(method, testset, Averaging::Micro)
}

/// [`evaluate_method`] with an explicit averaging mode. An empty testset
/// produces all-zero counts and undefined precision and recall.
pub fn evaluate_method_with(
    mut method: impl FnMut(&str) -> CountryPrediction,
    testset: &[AnnotatedCaption],
    averaging: Averaging,
) -> MethodScore {
    let mut confusion: BTreeMap<(String, String), usize> = BTreeMap::new();
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for sample in testset {
        let prediction = method(&sample.caption);
        let predicted = prediction.located();
        let gold = sample.gold.as_ref();
        *confusion.entry((label(gold), label(predicted))).or_insert(0) += 1;
        match (gold, predicted) {
            (Some(g), Some(p)) if g.iso2 == p.iso2 => tp += 1,
            (Some(_), Some(_)) => {
                fp += 1;
                fn_ += 1;
            }
            (Some(_), None) => fn_ += 1,
            (None, Some(_)) => fp += 1,
            (None, None) => {}
        }
    }
    let (precision, recall) = match averaging {
        Averaging::Micro => (ratio(tp, tp + fp), ratio(tp, tp + fn_)),
        Averaging::Macro => macro_scores(&confusion),
    };
    MethodScore {
        precision,
        recall,
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
        confusion,
    }
}

fn label(country: Option<&CanonicalCountry>) -> String {
    country.map_or_else(|| NO_COUNTRY_LABEL.to_string(), |c| c.name.clone())
}

fn ratio(numerator: usize, denominator: usize) -> Option<f64> {
    (denominator > 0).then(|| numerator as f64 / denominator as f64)
}

/// Per-country precision/recall averaged over every country that appears in
/// the confusion matrix (as gold or prediction). A country's precision only
/// enters the mean when it was predicted at least once, and its recall only
/// when it appears in gold at least once, so undefined per-country ratios
/// are skipped instead of distorting the average.
fn macro_scores(confusion: &BTreeMap<(String, String), usize>) -> (Option<f64>, Option<f64>) {
    // country -> (tp, fp, fn)
    let mut per_country: BTreeMap<&str, (usize, usize, usize)> = BTreeMap::new();
    for ((gold, predicted), &count) in confusion {
        if gold == predicted {
            if gold != NO_COUNTRY_LABEL {
                per_country.entry(gold).or_default().0 += count;
            }
            continue;
        }
        if predicted != NO_COUNTRY_LABEL {
            per_country.entry(predicted).or_default().1 += count;
        }
        if gold != NO_COUNTRY_LABEL {
            per_country.entry(gold).or_default().2 += count;
        }
    }
    let mut precisions = Vec::new();
    let mut recalls = Vec::new();
    for &(tp, fp, fn_) in per_country.values() {
        if let Some(p) = ratio(tp, tp + fp) {
            precisions.push(p);
        }
        if let Some(r) = ratio(tp, tp + fn_) {
            recalls.push(r);
        }
    }
    (mean(&precisions), mean(&recalls))
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// A boxed resolution method for side-by-side comparison.
pub type MethodFn<'a> = Box<dyn FnMut(&str) -> CountryPrediction + 'a>;

/// One comparison-table row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub method: String,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

/// Score several named methods on the identical testset, micro-averaged,
/// rows sorted by method name.
pub fn compare_methods(
    methods: Vec<(String, MethodFn<'_>)>,
    testset: &[AnnotatedCaption],
) -> Vec<ComparisonRow> {
    let mut rows: Vec<ComparisonRow> = methods
        .into_iter()
        .map(|(name, method)| {
            let score = evaluate_method(method, testset);
            ComparisonRow { method: name, precision: score.precision, recall: score.recall }
        })
        .collect();
    rows.sort_by(|a, b| a.method.cmp(&b.method));
    rows
}

/// Write a comparison table as CSV (`method,precision,recall`), four
/// decimals, empty cell for undefined scores.
pub fn write_comparison_csv<W: Write>(
    rows: &[ComparisonRow],
    writer: W,
) -> Result<(), EvalError> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["method", "precision", "recall"])?;
    for row in rows {
        csv.write_record([
            row.method.as_str(),
            &format_score(row.precision),
            &format_score(row.recall),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

fn format_score(score: Option<f64>) -> String {
    score.map_or_else(String::new, |s| format!("{s:.4}"))
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("template must contain exactly one {LOCATION_PLACEHOLDER} placeholder, found {found}")]
    Placeholder { found: usize },
    #[error("gold country {name:?} is not in the country table")]
    UnknownCountry { name: String },
    #[error("a missing gold country is only valid for manual annotation, not {origin:?}")]
    GoldRequired { origin: CaptionOrigin },
    #[error("caption is empty")]
    EmptyCaption,
    #[error("no caption templates supplied")]
    NoTemplates,
    #[error("no gazetteer entries with population >= {min_population}")]
    NoQualifyingEntries { min_population: u64 },
}

impl EvalError {
    fn at_line(line: usize, error: impl std::fmt::Display) -> Self {
        EvalError::Line { line, message: error.to_string() }
    }
}
