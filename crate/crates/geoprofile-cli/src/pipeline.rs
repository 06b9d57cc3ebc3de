//! The `profile` run: stream captions, resolve each to a country, roll the
//! predictions up into a report — resumable, deterministic, safe to kill.
//!
//! A run writes into `run.output_dir`:
//!
//! * `predictions.jsonl` — one line per accepted caption, in input order.
//! * `checkpoint.json` — progress marker tying the predictions to the config.
//! * `report.json`, `countries.csv`, `rollups.csv` — the rollup, written
//!   once the prediction pass has covered the whole input.
//!
//! The prediction pass appends in fixed-size batches and checkpoints every
//! `run.checkpoint_every` records. On restart, anything written after the
//! last checkpoint is truncated away and recomputed, so a torn final write
//! cannot corrupt the stream. The report pass then re-streams the inputs and
//! pairs them with the prediction lines one-to-one. Nothing in either pass
//! depends on the clock or on thread scheduling: a killed and resumed run
//! produces byte-identical artifacts to an uninterrupted one.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use geoprofile::assets;
use geoprofile::entity_filter::{predict_presence, ClassifierModel};
use geoprofile::gazetteer::{
    load_gazetteer, read_index_cache, CountryTable, GazetteerIndex, INDEX_CACHE_MAGIC,
};
use geoprofile::geolocate::{
    flags, CachingProvider, CaptionRecord, Geolocator, HttpProvider, Method, PredictionLine,
    RecordError, RecordedTranscriptProvider, TextCompletionProvider,
};
use geoprofile::metrics::{misalignment, CountryDistribution, EmbeddingSet, MisalignmentReport};
use geoprofile::profile::{
    correlate_indicator, frequency_diversity_correlation, read_indicator_csv_with_table,
    rollup_with_table, topn_concentration, underspecified_rate, EntityDistribution, EntityProfile,
    NamedCorrelation, ProfileReport, RollupLevel,
};

use crate::config::{InputFormat, LoadedConfig, MethodSection, RunConfig};

/// Pseudo-entity pooling every record; correlations and misalignment run on
/// this bucket. A real entity with the same name would be shadowed, which is
/// why the name is not a plausible entity tag.
pub const OVERALL_ENTITY: &str = "(overall)";

/// Grouping key for records that carry no entity tag (only reachable when
/// `profile.entities` is empty, which accepts them).
pub const UNSPECIFIED_ENTITY: &str = "(unspecified)";

/// Captions resolved per worker dispatch; also the granularity at which
/// checkpoints and `--stop-after` take effect.
const BATCH: usize = 64;

/// Ingest tallies for one full pass over the caption files.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IngestStats {
    pub lines_read: u64,
    pub records_accepted: u64,
    /// Lines that would not parse as a record at all.
    pub skipped_malformed: u64,
    /// Records that parsed but failed validation (blank caption, entity
    /// absent from its own caption).
    pub skipped_invalid: u64,
    /// Valid records whose entity is outside `profile.entities`.
    pub skipped_out_of_scope: u64,
}

/// What the entity-presence filter did to the accepted records.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FilterStats {
    pub kept: u64,
    pub dropped: u64,
    /// Records with no `embedding_row`; nothing to classify, so dropped.
    pub no_embedding: u64,
}

/// Everything `report.json` holds: run provenance, ingest and filter
/// accounting, and the geographic profile itself.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub version: u32,
    pub config_sha256: String,
    pub method: Method,
    pub gazetteer_sha256: String,
    pub gazetteer_entries: usize,
    pub prompt_checksums: BTreeMap<&'static str, String>,
    pub ingest: IngestStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterStats>,
    pub provider_errors: u64,
    pub provider_error_rate: f64,
    pub profile: ProfileReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub misalignment: Option<MisalignmentReport>,
}

/// Load a gazetteer from raw GeoNames TSV or from a `build-gazetteer` index,
/// sniffed by magic. `expect_min_population` pins the population floor: TSV
/// is loaded at it, an index must have been built at it. `None` takes any
/// index and loads TSV unfiltered.
pub fn load_index(
    path: &Path,
    expect_min_population: Option<u64>,
) -> anyhow::Result<GazetteerIndex> {
    let bytes =
        fs::read(path).with_context(|| format!("reading gazetteer {}", path.display()))?;
    if bytes.starts_with(INDEX_CACHE_MAGIC) {
        let index = read_index_cache(&mut &bytes[..])
            .with_context(|| format!("reading gazetteer index {}", path.display()))?;
        if let Some(want) = expect_min_population {
            if index.min_population() != want {
                bail!(
                    "gazetteer index {} was built at min_population {} but the config asks \
                     for {want}; rebuild it with `geoprofile build-gazetteer`",
                    path.display(),
                    index.min_population(),
                );
            }
        }
        Ok(index)
    } else {
        load_gazetteer(&bytes[..], expect_min_population.unwrap_or(0))
            .with_context(|| format!("parsing gazetteer {}", path.display()))
    }
}

/// The country table a run resolves against: built in, or a custom metadata
/// CSV combined with the built-in rule lists.
pub enum TableHandle {
    Builtin,
    Custom(CountryTable),
}

impl TableHandle {
    pub fn load(custom: Option<&Path>) -> anyhow::Result<TableHandle> {
        match custom {
            None => Ok(TableHandle::Builtin),
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading country metadata {}", path.display()))?;
                let table = CountryTable::from_parts(
                    &text,
                    assets::US_STATES,
                    assets::UK_CONSTITUENTS,
                    assets::VAGUE_REGIONS,
                )
                .with_context(|| format!("parsing country metadata {}", path.display()))?;
                Ok(TableHandle::Custom(table))
            }
        }
    }

    pub fn get(&self) -> &CountryTable {
        match self {
            TableHandle::Builtin => CountryTable::builtin(),
            TableHandle::Custom(table) => table,
        }
    }
}

/// The completion provider a method section wires up. `None` when neither an
/// endpoint nor a transcript is configured — fine for `string_match`, an
/// error surfaced by [`build_geolocator`] for anything that prompts.
pub enum ProviderHandle {
    Http(HttpProvider),
    Caching(CachingProvider<HttpProvider>),
    Replay(RecordedTranscriptProvider),
}

impl ProviderHandle {
    pub fn build(method: &MethodSection) -> anyhow::Result<Option<ProviderHandle>> {
        let handle = match (&method.provider_endpoint, &method.provider_cache) {
            (None, None) => return Ok(None),
            (Some(endpoint), cache) => {
                let mut http =
                    HttpProvider::new(endpoint.clone()).with_retries(method.retry_budget);
                if let Some(var) = &method.provider_auth_env {
                    http = http.with_auth_from_env(var)?;
                }
                match cache {
                    Some(path) => ProviderHandle::Caching(CachingProvider::open(path, http)?),
                    None => ProviderHandle::Http(http),
                }
            }
            (None, Some(path)) => {
                ProviderHandle::Replay(RecordedTranscriptProvider::open(path)?)
            }
        };
        Ok(Some(handle))
    }

    pub fn as_dyn(&self) -> &dyn TextCompletionProvider {
        match self {
            ProviderHandle::Http(p) => p,
            ProviderHandle::Caching(p) => p,
            ProviderHandle::Replay(p) => p,
        }
    }
}

pub fn build_geolocator<'a>(
    method: Method,
    index: &'a GazetteerIndex,
    table: &'a CountryTable,
    provider: Option<&'a dyn TextCompletionProvider>,
    icl_examples: Option<&str>,
) -> anyhow::Result<Geolocator<'a>> {
    let need = || {
        provider.with_context(|| {
            format!("method {method} prompts a provider; configure provider_endpoint or provider_cache")
        })
    };
    Ok(match method {
        Method::StringMatch => Geolocator::string_match(index, table),
        Method::ZeroShot => Geolocator::zero_shot(index, table, need()?),
        Method::Erp => Geolocator::erp(index, table, need()?),
        Method::Icl => {
            let examples = icl_examples
                .with_context(|| format!("method {method} needs an icl_examples file"))?;
            Geolocator::icl(index, table, need()?, examples)?
        }
    })
}

/// Streams caption records out of the configured files, in order, counting
/// every skip. Blank lines are ignored entirely.
pub struct RecordReader<'a> {
    format: InputFormat,
    files: std::slice::Iter<'a, PathBuf>,
    current: Option<std::io::Lines<BufReader<File>>>,
    lines_read: u64,
}

impl<'a> RecordReader<'a> {
    pub fn open(files: &'a [PathBuf], format: InputFormat) -> RecordReader<'a> {
        RecordReader { format, files: files.iter(), current: None, lines_read: 0 }
    }

    /// Raw lines consumed so far, blank and broken ones included; the unit
    /// checkpoints count in.
    pub fn lines_read(&self) -> u64 {
        self.lines_read
    }

    fn next_raw(&mut self) -> anyhow::Result<Option<String>> {
        loop {
            if let Some(lines) = &mut self.current {
                if let Some(line) = lines.next() {
                    self.lines_read += 1;
                    return Ok(Some(line?));
                }
                self.current = None;
            }
            match self.files.next() {
                Some(path) => {
                    let file = File::open(path)
                        .with_context(|| format!("opening captions {}", path.display()))?;
                    self.current = Some(BufReader::new(file).lines());
                }
                None => return Ok(None),
            }
        }
    }

    /// Skip `n` raw lines; errors if the stream ends first.
    fn fast_forward(&mut self, n: u64) -> anyhow::Result<()> {
        for _ in 0..n {
            if self.next_raw()?.is_none() {
                bail!("caption files are shorter than the checkpoint expects; the inputs changed — delete the output directory and rerun");
            }
        }
        Ok(())
    }

    /// The next record that parses, validates, and is in scope. Skips are
    /// tallied into `stats` by reason, never silently.
    pub fn next_record(
        &mut self,
        allow: Option<&BTreeSet<String>>,
        stats: &mut IngestStats,
    ) -> anyhow::Result<Option<CaptionRecord>> {
        while let Some(line) = self.next_raw()? {
            stats.lines_read = self.lines_read;
            if line.trim().is_empty() {
                continue;
            }
            let parsed = match self.format {
                InputFormat::Jsonl => CaptionRecord::from_json_line(&line),
                InputFormat::Tsv => CaptionRecord::from_tsv_line(&line),
            };
            let record = match parsed {
                Ok(record) => record,
                Err(RecordError::EmptyCaption { .. } | RecordError::EntityMissing { .. }) => {
                    stats.skipped_invalid += 1;
                    continue;
                }
                Err(_) => {
                    stats.skipped_malformed += 1;
                    continue;
                }
            };
            if let Some(allow) = allow {
                if !record.entity.as_deref().is_some_and(|e| allow.contains(e)) {
                    stats.skipped_out_of_scope += 1;
                    continue;
                }
            }
            stats.records_accepted += 1;
            return Ok(Some(record));
        }
        stats.lines_read = self.lines_read;
        Ok(None)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Checkpoint {
    config_sha256: String,
    lines_consumed: u64,
    records_done: u64,
    predictions_bytes: u64,
}

struct PredictionPass {
    records_done: u64,
    stopped_early: bool,
}

/// Run a whole profiling job. Returns the process exit code: 0 on success,
/// 2 when the provider-error rate reached the configured ceiling.
pub fn run_profile(loaded: &LoadedConfig, stop_after: Option<u64>) -> anyhow::Result<u8> {
    let config = &loaded.config;
    fs::create_dir_all(&config.run.output_dir).with_context(|| {
        format!("creating output directory {}", config.run.output_dir.display())
    })?;

    let index = load_index(&config.gazetteer.source, Some(config.gazetteer.min_population))?;
    let table = TableHandle::load(config.gazetteer.country_metadata.as_deref())?;
    let provider = ProviderHandle::build(&config.method)?;
    let icl_text = match &config.method.icl_examples {
        Some(path) => Some(fs::read_to_string(path).with_context(|| {
            format!("reading icl examples {}", path.display())
        })?),
        None => None,
    };
    let geolocator = build_geolocator(
        config.method.name,
        &index,
        table.get(),
        provider.as_ref().map(|p| p.as_dyn()),
        icl_text.as_deref(),
    )?;

    let pass = predict_all(config, &loaded.sha256, &geolocator, stop_after)?;
    if pass.stopped_early {
        println!(
            "stopped after {} records; rerun without --stop-after to finish",
            pass.records_done
        );
        return Ok(0);
    }

    let report = build_report(config, &loaded.sha256, &index, table.get())?;
    write_report_files(&config.run.output_dir, &report)?;

    println!(
        "profiled {} records ({} skipped) into {} entities",
        report.ingest.records_accepted,
        report.ingest.skipped_malformed
            + report.ingest.skipped_invalid
            + report.ingest.skipped_out_of_scope,
        report.profile.entities.len().saturating_sub(1),
    );
    println!(
        "provider errors: {} ({:.4}% of accepted)",
        report.provider_errors,
        100.0 * report.provider_error_rate
    );
    println!("report: {}", config.run.output_dir.join("report.json").display());

    let healthy = report.provider_errors == 0
        || report.provider_error_rate < config.run.provider_error_ceiling;
    if !healthy {
        eprintln!(
            "provider-error rate {:.4} reached the ceiling {:.4}; treat this profile as unreliable",
            report.provider_error_rate, config.run.provider_error_ceiling
        );
    }
    Ok(if healthy { 0 } else { 2 })
}

/// Phase one: geolocate every accepted record, appending to
/// `predictions.jsonl` with periodic checkpoints.
fn predict_all(
    config: &RunConfig,
    config_sha: &str,
    geolocator: &Geolocator<'_>,
    stop_after: Option<u64>,
) -> anyhow::Result<PredictionPass> {
    let out = &config.run.output_dir;
    let predictions_path = out.join("predictions.jsonl");
    let checkpoint_path = out.join("checkpoint.json");

    let resume = match fs::read_to_string(&checkpoint_path) {
        Ok(text) => {
            let checkpoint: Checkpoint = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", checkpoint_path.display()))?;
            if checkpoint.config_sha256 != config_sha {
                bail!(
                    "{} belongs to a different config; use a fresh run.output_dir or delete the old outputs",
                    checkpoint_path.display(),
                );
            }
            Some(checkpoint)
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => {
            return Err(e).with_context(|| format!("reading {}", checkpoint_path.display()))
        }
    };

    let mut predictions = match &resume {
        Some(checkpoint) => {
            let file = OpenOptions::new()
                .read(true)
                .write(true)
                .open(&predictions_path)
                .with_context(|| format!("opening {}", predictions_path.display()))?;
            if file.metadata()?.len() < checkpoint.predictions_bytes {
                bail!(
                    "{} is shorter than its checkpoint claims; delete the output directory and rerun",
                    predictions_path.display(),
                );
            }
            // Anything after the checkpoint may be torn; recompute it.
            file.set_len(checkpoint.predictions_bytes)?;
            let mut file = file;
            file.seek(SeekFrom::End(0))?;
            file
        }
        None => File::create(&predictions_path)
            .with_context(|| format!("creating {}", predictions_path.display()))?,
    };

    let mut reader = RecordReader::open(&config.input.captions, config.input.format);
    let (mut records_done, mut predictions_bytes) = match &resume {
        Some(checkpoint) => {
            reader.fast_forward(checkpoint.lines_consumed)?;
            (checkpoint.records_done, checkpoint.predictions_bytes)
        }
        None => (0, 0),
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.method.concurrency)
        .build()
        .context("building the worker pool")?;
    let allow = config.entity_allowlist();
    // Phase-one stats are partial on resume; the report pass recounts.
    let mut stats = IngestStats::default();
    let mut since_checkpoint = 0u64;
    let mut stopped_early = false;

    loop {
        let mut batch = Vec::with_capacity(BATCH);
        let mut exhausted = false;
        while batch.len() < BATCH {
            match reader.next_record(allow.as_ref(), &mut stats)? {
                Some(record) => batch.push(record),
                None => {
                    exhausted = true;
                    break;
                }
            }
        }
        if !batch.is_empty() {
            let lines: Vec<PredictionLine> = pool.install(|| {
                batch
                    .par_iter()
                    .map(|record| geolocator.geolocate_caption(record).to_line(&record.id))
                    .collect()
            });
            let mut buf = Vec::new();
            for line in &lines {
                serde_json::to_writer(&mut buf, line)?;
                buf.push(b'\n');
            }
            predictions.write_all(&buf)?;
            records_done += lines.len() as u64;
            predictions_bytes += buf.len() as u64;
            since_checkpoint += lines.len() as u64;
        }

        // A stop that lands exactly at the end of input is a completion.
        if stop_after.is_some_and(|n| records_done >= n) && !exhausted {
            predictions.sync_all()?;
            stopped_early = true;
            break;
        }
        if exhausted || since_checkpoint >= config.run.checkpoint_every {
            predictions.sync_all()?;
            write_json_atomic(
                &checkpoint_path,
                &Checkpoint {
                    config_sha256: config_sha.to_string(),
                    lines_consumed: reader.lines_read(),
                    records_done,
                    predictions_bytes,
                },
            )?;
            since_checkpoint = 0;
        }
        if exhausted {
            break;
        }
    }
    Ok(PredictionPass { records_done, stopped_early })
}

/// Phase two: re-stream the inputs, pair each accepted record with its
/// prediction line, filter, aggregate, correlate.
fn build_report(
    config: &RunConfig,
    config_sha: &str,
    index: &GazetteerIndex,
    table: &CountryTable,
) -> anyhow::Result<RunReport> {
    let out = &config.run.output_dir;
    let predictions_path = out.join("predictions.jsonl");
    let predictions = File::open(&predictions_path)
        .with_context(|| format!("opening {}", predictions_path.display()))?;
    let mut prediction_lines = BufReader::new(predictions).lines();

    let filter_inputs = match &config.filter {
        Some(filter) => {
            let mut model_file = File::open(&filter.model)
                .with_context(|| format!("opening {}", filter.model.display()))?;
            let model = ClassifierModel::read_from(&mut model_file)
                .with_context(|| format!("reading model {}", filter.model.display()))?;
            let mut emb_file = File::open(&filter.embeddings)
                .with_context(|| format!("opening {}", filter.embeddings.display()))?;
            let embeddings = EmbeddingSet::read_from(&mut emb_file)
                .with_context(|| format!("reading embeddings {}", filter.embeddings.display()))?;
            if model.feature_dim() != embeddings.dim() {
                bail!(
                    "filter model expects {} dimensions but the embeddings have {}",
                    model.feature_dim(),
                    embeddings.dim(),
                );
            }
            Some((model, embeddings))
        }
        None => None,
    };

    let allow = config.entity_allowlist();
    let mut reader = RecordReader::open(&config.input.captions, config.input.format);
    let mut stats = IngestStats::default();
    let mut per_entity: BTreeMap<String, EntityDistribution> = BTreeMap::new();
    let mut overall = EntityDistribution::new(OVERALL_ENTITY);
    let mut filter_stats = FilterStats::default();
    let mut provider_errors = 0u64;
    let mut position = 0u64;

    while let Some(record) = reader.next_record(allow.as_ref(), &mut stats)? {
        position += 1;
        let line = match prediction_lines.next() {
            Some(line) => line?,
            None => bail!(
                "predictions.jsonl ends before the input does; the prediction pass is incomplete — rerun `geoprofile profile`"
            ),
        };
        let prediction: PredictionLine = serde_json::from_str(&line)
            .with_context(|| format!("predictions.jsonl line {position}"))?;
        if prediction.id != record.id {
            bail!(
                "prediction {} does not match record {} at position {position}; outputs are stale — delete the output directory and rerun",
                prediction.id,
                record.id,
            );
        }

        let provider_error = prediction.flags.iter().any(|f| f == flags::PROVIDER_ERROR);
        provider_errors += u64::from(provider_error);

        if let Some((model, embeddings)) = &filter_inputs {
            match record.embedding_row {
                None => {
                    filter_stats.no_embedding += 1;
                    continue;
                }
                Some(row) => {
                    let row = usize::try_from(row).context("embedding row out of range")?;
                    if row >= embeddings.len() {
                        bail!(
                            "record {} points at embedding row {row}, but the set has only {} rows",
                            record.id,
                            embeddings.len(),
                        );
                    }
                    if !predict_presence(model, embeddings.row(row))? {
                        filter_stats.dropped += 1;
                        continue;
                    }
                    filter_stats.kept += 1;
                }
            }
        }

        let country = match &prediction.country {
            Some(name) => Some(table.get_by_name(name).with_context(|| {
                format!(
                    "prediction for {} names unknown country {name:?}; was predictions.jsonl edited?",
                    record.id
                )
            })?),
            None => None,
        };
        let entity = record.entity.as_deref().unwrap_or(UNSPECIFIED_ENTITY);
        per_entity
            .entry(entity.to_string())
            .or_insert_with(|| EntityDistribution::new(entity))
            .record(country, provider_error);
        overall.record(country, provider_error);
    }
    if prediction_lines.next().is_some() {
        bail!(
            "predictions.jsonl is longer than the input; outputs are stale — delete the output directory and rerun"
        );
    }

    let mut entities: BTreeMap<String, EntityProfile> = per_entity
        .iter()
        .map(|(name, d)| (name.clone(), entity_profile(d, config.profile.top_n, table)))
        .collect();
    entities
        .insert(OVERALL_ENTITY.to_string(), entity_profile(&overall, config.profile.top_n, table));

    let mut correlations = Vec::new();
    for path in &config.profile.indicators {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let file =
            File::open(path).with_context(|| format!("opening indicator {}", path.display()))?;
        let indicator = read_indicator_csv_with_table(file, table)
            .with_context(|| format!("reading indicator {}", path.display()))?;
        let outcome = correlate_indicator(&overall, &indicator)
            .with_context(|| format!("correlating frequency with {name}"))?;
        correlations.push(NamedCorrelation { name, outcome });
    }
    if let Some(path) = &config.profile.diversity {
        let file =
            File::open(path).with_context(|| format!("opening diversity {}", path.display()))?;
        let diversity = read_indicator_csv_with_table(file, table)
            .with_context(|| format!("reading diversity {}", path.display()))?;
        let outcome =
            frequency_diversity_correlation(&overall, &diversity, config.profile.min_count)
                .context("correlating located frequency with diversity")?;
        correlations.push(NamedCorrelation { name: "frequency_diversity".into(), outcome });
    }

    let misalignment_report = match &config.profile.reference {
        Some(path) if overall.located_total() > 0 => {
            let reference = read_count_csv(path, table)?;
            Some(misalignment(
                &CountryDistribution::from_counts(overall.counts.clone()),
                &CountryDistribution::from_counts(reference),
                config.profile.r_threshold,
            )?)
        }
        // Nothing located: the counts in the report already say why.
        _ => None,
    };

    let provider_error_rate = if stats.records_accepted == 0 {
        0.0
    } else {
        provider_errors as f64 / stats.records_accepted as f64
    };

    Ok(RunReport {
        version: 1,
        config_sha256: config_sha.to_string(),
        method: config.method.name,
        gazetteer_sha256: index.source_sha256().to_string(),
        gazetteer_entries: index.len(),
        prompt_checksums: assets::prompt_checksums(),
        ingest: stats,
        filter: config.filter.as_ref().map(|_| filter_stats),
        provider_errors,
        provider_error_rate,
        profile: ProfileReport { entities, correlations },
        misalignment: misalignment_report,
    })
}

/// [`geoprofile::profile::build_entity_profile`] against a caller-chosen
/// table, so custom metadata flows into the rollups too.
fn entity_profile(d: &EntityDistribution, top_n: usize, table: &CountryTable) -> EntityProfile {
    let (top_countries, top_share) = match topn_concentration(d, top_n) {
        Ok((list, share)) => (list, Some(share)),
        Err(_) => (Vec::new(), None),
    };
    EntityProfile {
        underspecified_rate: underspecified_rate(d).ok(),
        top_countries,
        top_share,
        continents: rollup_with_table(d, RollupLevel::Continent, table),
        un_regions: rollup_with_table(d, RollupLevel::UnRegion, table),
        incomes: rollup_with_table(d, RollupLevel::Income, table),
        distribution: d.clone(),
    }
}

/// Read `country,count` rows, canonicalizing names through the table and
/// pooling rows that land on the same country. Names the table cannot place
/// keep their raw spelling, mirroring how indicator CSVs are read.
pub fn read_count_csv(path: &Path, table: &CountryTable) -> anyhow::Result<BTreeMap<String, u64>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let mut out: BTreeMap<String, u64> = BTreeMap::new();
    for (i, record) in csv.records().enumerate() {
        let row = i + 2; // header is row 1
        let record = record.with_context(|| format!("{} row {row}", path.display()))?;
        if record.len() != 2 {
            bail!(
                "{} row {row}: expected country,count but got {} fields",
                path.display(),
                record.len(),
            );
        }
        let raw = record[0].trim();
        let count: u64 = record[1]
            .trim()
            .parse()
            .with_context(|| format!("{} row {row}: bad count {:?}", path.display(), &record[1]))?;
        let key = match table.canonicalize(raw) {
            geoprofile::gazetteer::Canonicalized::Country(c) => c.name,
            geoprofile::gazetteer::Canonicalized::NoCountry(_) => raw.to_string(),
        };
        *out.entry(key).or_default() += count;
    }
    Ok(out)
}

fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let tmp = path.with_extension("tmp");
    let mut file =
        File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
    serde_json::to_writer_pretty(&mut file, value)?;
    file.write_all(b"\n")?;
    file.sync_all()?;
    drop(file);
    fs::rename(&tmp, path)
        .with_context(|| format!("moving {} into place", path.display()))?;
    Ok(())
}

fn write_report_files(out: &Path, report: &RunReport) -> anyhow::Result<()> {
    let mut report_json = serde_json::to_string_pretty(report)?;
    report_json.push('\n');
    fs::write(out.join("report.json"), report_json)?;
    fs::write(out.join("countries.csv"), countries_csv(report)?)?;
    fs::write(out.join("rollups.csv"), rollups_csv(report)?)?;
    Ok(())
}

/// Flatten every entity's per-country counts: `entity,country,count,share`,
/// share in percent of that entity's located records.
fn countries_csv(report: &RunReport) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["entity", "country", "count", "share"])?;
    for (entity, profile) in &report.profile.entities {
        let located = profile.distribution.located_total();
        for (country, &count) in &profile.distribution.counts {
            let share = 100.0 * count as f64 / located as f64;
            w.write_record([
                entity.as_str(),
                country.as_str(),
                &count.to_string(),
                &format!("{share:.6}"),
            ])?;
        }
    }
    finish_csv(w)
}

/// Flatten every entity's rollups: `entity,level,bucket,count,share`. Mass
/// that maps to no bucket appears as `(unmapped)` with an empty share.
fn rollups_csv(report: &RunReport) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["entity", "level", "bucket", "count", "share"])?;
    for (entity, profile) in &report.profile.entities {
        let levels = [
            ("continent", &profile.continents),
            ("un_region", &profile.un_regions),
            ("income", &profile.incomes),
        ];
        for (level, rollup) in levels {
            for (bucket, &count) in &rollup.counts {
                let share = rollup.shares.get(bucket).copied().unwrap_or_default();
                w.write_record([
                    entity.as_str(),
                    level,
                    bucket.as_str(),
                    &count.to_string(),
                    &format!("{share:.6}"),
                ])?;
            }
            if rollup.unmapped > 0 {
                w.write_record([
                    entity.as_str(),
                    level,
                    "(unmapped)",
                    &rollup.unmapped.to_string(),
                    "",
                ])?;
            }
        }
    }
    finish_csv(w)
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> anyhow::Result<String> {
    let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("flushing csv: {e}"))?;
    Ok(String::from_utf8(bytes)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{
        FilterSection, GazetteerSection, InputSection, MethodSection, ProfileSection, RunSection,
        CONFIG_VERSION,
    };
    use geoprofile::gazetteer::write_index_cache;
    use std::fmt::Write as _;

    /// A GeoNames-shaped TSV with one city per country, plus one namesake
    /// pair (Cambridge GB beats Cambridge US on population).
    fn tiny_gazetteer() -> String {
        let rows: &[(&str, &str, &str, &str, u64)] = &[
            ("90300001", "Paris", "FR", "P", 2138551),
            ("90300002", "London", "GB", "P", 8961989),
            ("90300003", "Mumbai", "IN", "P", 12691836),
            ("90300004", "Hokitika", "NZ", "P", 2867),
            ("90300005", "Cambridge", "GB", "P", 128515),
            ("90300006", "Cambridge", "US", "P", 118403),
        ];
        let mut out = String::new();
        for (id, name, country, class, population) in rows {
            writeln!(
                out,
                "{id}\t{name}\t{name}\t\t0.0\t0.0\t{class}\tPPL\t{country}\t\t\t\t\t\t{population}\t\t0\tEtc/UTC\t2024-01-01"
            )
            .unwrap();
        }
        out
    }

    fn write_captions(path: &Path, lines: &[&str]) {
        fs::write(path, lines.join("\n") + "\n").unwrap();
    }

    fn base_config(dir: &Path) -> RunConfig {
        RunConfig {
            version: CONFIG_VERSION,
            gazetteer: GazetteerSection {
                source: dir.join("places.tsv"),
                min_population: 0,
                country_metadata: None,
            },
            input: InputSection {
                captions: vec![dir.join("captions.jsonl")],
                format: InputFormat::Jsonl,
            },
            method: MethodSection {
                name: Method::StringMatch,
                provider_endpoint: None,
                provider_auth_env: None,
                provider_cache: None,
                concurrency: 2,
                retry_budget: 3,
                icl_examples: None,
            },
            filter: None,
            profile: ProfileSection::default(),
            run: RunSection {
                checkpoint_every: 1000,
                provider_error_ceiling: 0.01,
                output_dir: dir.join("out"),
            },
        }
    }

    /// Serialize the config to disk the way a user would write it, so the
    /// checkpoint's config hash is exercised for real.
    fn save_config(dir: &Path, name: &str, config: &RunConfig) -> LoadedConfig {
        let path = dir.join(name);
        fs::write(&path, toml::to_string(config).unwrap()).unwrap();
        RunConfig::load(&path).unwrap()
    }

    #[test]
    fn profile_run_end_to_end() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("places.tsv"), tiny_gazetteer()).unwrap();
        write_captions(
            &dir.path().join("captions.jsonl"),
            &[
                r#"{"id":"r1","caption":"a house in Paris","entity":"house"}"#,
                r#"{"id":"r2","caption":"a house in London","entity":"house"}"#,
                r#"{"id":"r3","caption":"a car parked in Mumbai","entity":"car"}"#,
                r#"{"id":"r4","caption":"a quiet street at dusk","entity":"street"}"#,
                "",
                r#"{"id":"r5","caption":"   ","entity":"house"}"#,
                "not json at all",
                r#"{"id":"r6","caption":"a small beach hut","entity":"boat"}"#,
            ],
        );
        let loaded = save_config(dir.path(), "run.toml", &base_config(dir.path()));
        assert_eq!(run_profile(&loaded, None).unwrap(), 0);

        let out = dir.path().join("out");
        let report: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
        assert_eq!(report["ingest"]["records_accepted"], 4);
        assert_eq!(report["ingest"]["skipped_malformed"], 1);
        assert_eq!(report["ingest"]["skipped_invalid"], 2);
        assert_eq!(report["ingest"]["skipped_out_of_scope"], 0);
        assert_eq!(report["provider_errors"], 0);
        assert_eq!(report["config_sha256"], serde_json::json!(loaded.sha256));

        let entities = report["profile"]["entities"].as_object().unwrap();
        let mut names: Vec<&String> = entities.keys().collect();
        names.sort();
        assert_eq!(names, ["(overall)", "car", "house", "street"]);
        assert_eq!(
            entities["house"]["distribution"]["counts"],
            serde_json::json!({"France": 1, "United Kingdom": 1})
        );
        assert_eq!(entities["car"]["distribution"]["counts"]["India"], 1);
        assert_eq!(entities["street"]["distribution"]["underspecified"], 1);
        assert_eq!(entities["(overall)"]["distribution"]["total_processed"], 4);

        let predictions = fs::read_to_string(out.join("predictions.jsonl")).unwrap();
        assert_eq!(predictions.lines().count(), 4);
        assert!(predictions.lines().next().unwrap().contains(r#""country":"France""#));

        let countries = fs::read_to_string(out.join("countries.csv")).unwrap();
        assert!(countries.starts_with("entity,country,count,share\n"));
        assert!(countries.contains("house,France,1,50.000000"));
        let rollups = fs::read_to_string(out.join("rollups.csv")).unwrap();
        assert!(rollups.contains("house,continent,EU,2,100.000000"));
    }

    #[test]
    fn rerunning_a_complete_run_changes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("places.tsv"), tiny_gazetteer()).unwrap();
        write_captions(
            &dir.path().join("captions.jsonl"),
            &[
                r#"{"id":"r1","caption":"a house in Paris","entity":"house"}"#,
                r#"{"id":"r2","caption":"a car in Mumbai","entity":"car"}"#,
            ],
        );
        let loaded = save_config(dir.path(), "run.toml", &base_config(dir.path()));
        assert_eq!(run_profile(&loaded, None).unwrap(), 0);
        let out = dir.path().join("out");
        let first_report = fs::read(out.join("report.json")).unwrap();
        let first_predictions = fs::read(out.join("predictions.jsonl")).unwrap();

        assert_eq!(run_profile(&loaded, None).unwrap(), 0);
        assert_eq!(fs::read(out.join("report.json")).unwrap(), first_report);
        assert_eq!(fs::read(out.join("predictions.jsonl")).unwrap(), first_predictions);
    }

    #[test]
    fn killed_run_resumes_to_identical_bytes() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("places.tsv"), tiny_gazetteer()).unwrap();
        // Enough records that --stop-after lands between checkpoints: with
        // checkpoint_every = 50 and batches of 64, the stop at >= 100
        // records happens at 128, after a checkpoint at 64.
        let cities = ["Paris", "London", "Mumbai", "Hokitika"];
        let lines: Vec<String> = (0..150)
            .map(|i| {
                format!(
                    r#"{{"id":"r{i}","caption":"a house in {}","entity":"house"}}"#,
                    cities[i % cities.len()]
                )
            })
            .collect();
        let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
        write_captions(&dir.path().join("captions.jsonl"), &refs);

        let mut config = base_config(dir.path());
        config.run.checkpoint_every = 50;

        // Uninterrupted reference run.
        config.run.output_dir = dir.path().join("straight");
        let straight = save_config(dir.path(), "straight.toml", &config);
        assert_eq!(run_profile(&straight, None).unwrap(), 0);

        // Killed-and-resumed run in a second directory.
        config.run.output_dir = dir.path().join("resumed");
        let resumed = save_config(dir.path(), "resumed.toml", &config);
        assert_eq!(run_profile(&resumed, Some(100)).unwrap(), 0);
        let partial = dir.path().join("resumed").join("predictions.jsonl");
        let partial_lines = fs::read_to_string(&partial).unwrap().lines().count();
        assert_eq!(partial_lines, 128, "stop lands at a batch boundary");
        assert!(
            !dir.path().join("resumed").join("report.json").exists(),
            "a stopped run must not report"
        );
        assert_eq!(run_profile(&resumed, None).unwrap(), 0);

        let read = |root: &str, file: &str| fs::read(dir.path().join(root).join(file)).unwrap();
        assert_eq!(read("straight", "predictions.jsonl"), read("resumed", "predictions.jsonl"));
        assert_eq!(read("straight", "countries.csv"), read("resumed", "countries.csv"));
        assert_eq!(read("straight", "rollups.csv"), read("resumed", "rollups.csv"));

        // The reports differ only in the config hash (different output_dir).
        let parse = |root: &str| -> serde_json::Value {
            serde_json::from_slice(&read(root, "report.json")).unwrap()
        };
        let mut a = parse("straight");
        let mut b = parse("resumed");
        a["config_sha256"] = serde_json::Value::Null;
        b["config_sha256"] = serde_json::Value::Null;
        assert_eq!(a, b);
    }

    #[test]
    fn checkpoint_from_another_config_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("places.tsv"), tiny_gazetteer()).unwrap();
        write_captions(
            &dir.path().join("captions.jsonl"),
            &[r#"{"id":"r1","caption":"a house in Paris","entity":"house"}"#],
        );
        let config = base_config(dir.path());
        let loaded = save_config(dir.path(), "run.toml", &config);
        assert_eq!(run_profile(&loaded, None).unwrap(), 0);

        let mut changed = config;
        changed.profile.top_n = 3;
        let changed = save_config(dir.path(), "changed.toml", &changed);
        let err = run_profile(&changed, None).unwrap_err().to_string();
        assert!(err.contains("different config"), "{err}");
    }

    #[test]
    fn entity_scope_and_unspecified_bucket() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("places.tsv"), tiny_gazetteer()).unwrap();
        write_captions(
            &dir.path().join("captions.jsonl"),
            &[
                r#"{"id":"r1","caption":"a house in Paris","entity":"house"}"#,
                r#"{"id":"r2","caption":"a car in Mumbai","entity":"car"}"#,
                r#"{"id":"r3","caption":"somewhere in London"}"#,
            ],
        );

        // Scoped: only house records survive ingestion.
        let mut config = base_config(dir.path());
        config.profile.entities = vec!["house".into()];
        config.run.output_dir = dir.path().join("scoped");
        let scoped = save_config(dir.path(), "scoped.toml", &config);
        assert_eq!(run_profile(&scoped, None).unwrap(), 0);
        let report: serde_json::Value = serde_json::from_str(
            &fs::read_to_string(dir.path().join("scoped").join("report.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(report["ingest"]["records_accepted"], 1);
        assert_eq!(report["ingest"]["skipped_out_of_scope"], 2);

        // Unscoped: the untagged record lands in the unspecified bucket.
        let mut config = base_config(dir.path());
        config.run.output_dir = dir.path().join("open");
        let open = save_config(dir.path(), "open.toml", &config);
        assert_eq!(run_profile(&open, None).unwrap(), 0);
        let report: serde_json::Value = serde_json::from_str(
            &fs::read_to_string(dir.path().join("open").join("report.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(
            report["profile"]["entities"][UNSPECIFIED_ENTITY]["distribution"]["counts"]
                ["United Kingdom"],
            1
        );
    }

    #[test]
    fn presence_filter_drops_and_counts() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("places.tsv"), tiny_gazetteer()).unwrap();
        write_captions(
            &dir.path().join("captions.jsonl"),
            &[
                r#"{"id":"r1","caption":"a house in Paris","entity":"house","embedding_row":0}"#,
                r#"{"id":"r2","caption":"a house in London","entity":"house","embedding_row":1}"#,
                r#"{"id":"r3","caption":"a house in Mumbai","entity":"house"}"#,
            ],
        );
        // One feature dimension: positive means the entity is present.
        let embeddings = EmbeddingSet::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        let mut file = File::create(dir.path().join("embeddings.bin")).unwrap();
        embeddings.write_to(&mut file).unwrap();
        let model = ClassifierModel {
            weights: vec![1.0, 0.0],
            bias: 0.0,
            c: 1.0,
            tolerance: 1e-4,
            iterations: 0,
        };
        let mut file = File::create(dir.path().join("presence.svm")).unwrap();
        model.write_to(&mut file).unwrap();

        let mut config = base_config(dir.path());
        config.filter = Some(FilterSection {
            model: dir.path().join("presence.svm"),
            embeddings: dir.path().join("embeddings.bin"),
        });
        let loaded = save_config(dir.path(), "run.toml", &config);
        assert_eq!(run_profile(&loaded, None).unwrap(), 0);

        let report: serde_json::Value = serde_json::from_str(
            &fs::read_to_string(dir.path().join("out").join("report.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(report["filter"]["kept"], 1);
        assert_eq!(report["filter"]["dropped"], 1);
        assert_eq!(report["filter"]["no_embedding"], 1);
        // Only the kept record reaches the distributions.
        assert_eq!(
            report["profile"]["entities"]["house"]["distribution"]["counts"],
            serde_json::json!({"France": 1})
        );
    }

    #[test]
    fn correlations_and_misalignment_flow_into_the_report() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("places.tsv"), tiny_gazetteer()).unwrap();
        let mut lines = Vec::new();
        for (city, n) in [("Paris", 4), ("London", 3), ("Mumbai", 2), ("Hokitika", 1)] {
            for i in 0..n {
                lines.push(format!(
                    r#"{{"id":"{city}{i}","caption":"a house in {city}","entity":"house"}}"#
                ));
            }
        }
        let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
        write_captions(&dir.path().join("captions.jsonl"), &refs);
        fs::write(
            dir.path().join("gdp.csv"),
            "country,value\nFrance,40000\nUnited Kingdom,45000\nIndia,2500\nNew Zealand,48000\n",
        )
        .unwrap();
        fs::write(
            dir.path().join("reference.csv"),
            "country,count\nFrance,1\nUnited Kingdom,1\nIndia,1\nNew Zealand,1\nJapan,1\n",
        )
        .unwrap();

        let mut config = base_config(dir.path());
        config.profile.indicators = vec![dir.path().join("gdp.csv")];
        config.profile.reference = Some(dir.path().join("reference.csv"));
        config.profile.r_threshold = 1.5;
        let loaded = save_config(dir.path(), "run.toml", &config);
        assert_eq!(run_profile(&loaded, None).unwrap(), 0);

        let report: serde_json::Value = serde_json::from_str(
            &fs::read_to_string(dir.path().join("out").join("report.json")).unwrap(),
        )
        .unwrap();
        let correlations = report["profile"]["correlations"].as_array().unwrap();
        assert_eq!(correlations.len(), 1);
        assert_eq!(correlations[0]["name"], "gdp");
        assert_eq!(correlations[0]["outcome"]["n"], 4);
        assert_eq!(correlations[0]["outcome"]["coverage"], 1.0);

        // Dataset shares vs uniform reference at r = 1.5: France holds 40%
        // of ten records against a 20% reference share (ratio 2.0, over);
        // Hokitika's single record is 10% against 20% (ratio 0.5, under);
        // Japan never shows up in the dataset, so its ratio collapses to 0.
        let misalignment = &report["misalignment"];
        assert_eq!(misalignment["r"], 1.5);
        assert!(misalignment["over"].as_array().unwrap().contains(&"France".into()));
        assert!(misalignment["under"].as_array().unwrap().contains(&"New Zealand".into()));
        assert_eq!(misalignment["ratios"]["Japan"], serde_json::json!(0.0));
        assert!(misalignment["under"].as_array().unwrap().contains(&"Japan".into()));
    }

    #[test]
    fn load_index_reads_tsv_and_cache_alike() {
        let dir = tempfile::tempdir().unwrap();
        let tsv_path = dir.path().join("places.tsv");
        fs::write(&tsv_path, tiny_gazetteer()).unwrap();
        let from_tsv = load_index(&tsv_path, Some(0)).unwrap();

        let cache_path = dir.path().join("places.idx");
        let mut file = File::create(&cache_path).unwrap();
        write_index_cache(&from_tsv, &mut file).unwrap();
        drop(file);
        let from_cache = load_index(&cache_path, Some(0)).unwrap();
        assert_eq!(from_cache.len(), from_tsv.len());
        assert_eq!(from_cache.source_sha256(), from_tsv.source_sha256());

        let err = load_index(&cache_path, Some(500)).unwrap_err().to_string();
        assert!(err.contains("min_population"), "{err}");
        // Unpinned loads take the cache as it is.
        assert_eq!(load_index(&cache_path, None).unwrap().len(), from_tsv.len());
    }

    #[test]
    fn multiple_caption_files_stream_in_order() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("places.tsv"), tiny_gazetteer()).unwrap();
        write_captions(
            &dir.path().join("a.jsonl"),
            &[r#"{"id":"a1","caption":"a house in Paris","entity":"house"}"#],
        );
        write_captions(
            &dir.path().join("b.jsonl"),
            &[r#"{"id":"b1","caption":"a house in London","entity":"house"}"#],
        );
        let mut config = base_config(dir.path());
        config.input.captions = vec![dir.path().join("a.jsonl"), dir.path().join("b.jsonl")];
        let loaded = save_config(dir.path(), "run.toml", &config);
        assert_eq!(run_profile(&loaded, None).unwrap(), 0);

        let predictions =
            fs::read_to_string(dir.path().join("out").join("predictions.jsonl")).unwrap();
        let ids: Vec<String> = predictions
            .lines()
            .map(|l| serde_json::from_str::<PredictionLine>(l).unwrap().id)
            .collect();
        assert_eq!(ids, ["a1", "b1"]);
    }

    #[test]
    fn tsv_captions_parse_too() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("places.tsv"), tiny_gazetteer()).unwrap();
        fs::write(
            dir.path().join("captions.tsv"),
            "t1\thouse\ta house in Paris\nt2\t\ta view of Mumbai\n",
        )
        .unwrap();
        let mut config = base_config(dir.path());
        config.input.captions = vec![dir.path().join("captions.tsv")];
        config.input.format = InputFormat::Tsv;
        let loaded = save_config(dir.path(), "run.toml", &config);
        assert_eq!(run_profile(&loaded, None).unwrap(), 0);
        let report: serde_json::Value = serde_json::from_str(
            &fs::read_to_string(dir.path().join("out").join("report.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(report["ingest"]["records_accepted"], 2);
        assert_eq!(
            report["profile"]["entities"][UNSPECIFIED_ENTITY]["distribution"]["counts"]["India"],
            1
        );
    }
}
