//! Versioned TOML configuration for profiling runs.
//!
//! One file drives a whole run: where the gazetteer and captions live, which
//! resolution method to use, how to reach (or replay) the completion
//! provider, and which report knobs apply. [`RunConfig::load`] resolves every
//! relative path against the config file's directory and keeps the SHA-256 of
//! the raw bytes, so artifacts can always be tied back to the exact
//! configuration that produced them — and a resumed run can refuse to mix
//! outputs from two different configs.
//!
//! Validation is batch-style: [`RunConfig::problems`] returns every issue it
//! can find, not just the first, so a bad config is fixable in one edit.

use std::collections::BTreeSet;
use std::env;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use geoprofile::gazetteer::source_checksum;
use geoprofile::geolocate::Method;
use geoprofile::profile::{DIVERSITY_MIN_COUNT, TOP_N_DEFAULT};

/// The only config layout this build reads.
pub const CONFIG_VERSION: u32 = 1;

/// A parsed config plus the checksum of the raw file bytes.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub gazetteer: GazetteerSection,
    pub input: InputSection,
    pub method: MethodSection,
    #[serde(default)]
    pub filter: Option<FilterSection>,
    #[serde(default)]
    pub profile: ProfileSection,
    pub run: RunSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GazetteerSection {
    /// GeoNames TSV, or a binary index built by `geoprofile build-gazetteer`.
    pub source: PathBuf,
    #[serde(default)]
    pub min_population: u64,
    /// Country metadata CSV replacing the built-in table. The rule lists
    /// (US states, UK constituents, vague regions) stay built in.
    #[serde(default)]
    pub country_metadata: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    /// Caption files, processed in order as one logical stream.
    pub captions: Vec<PathBuf>,
    #[serde(default)]
    pub format: InputFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputFormat {
    #[default]
    Jsonl,
    Tsv,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSection {
    pub name: Method,
    /// HTTP completion endpoint. Unset means offline: prompts are answered
    /// from `provider_cache` alone.
    #[serde(default)]
    pub provider_endpoint: Option<String>,
    /// Name of the environment variable holding the bearer token.
    #[serde(default)]
    pub provider_auth_env: Option<String>,
    /// Transcript file: a write-through cache when an endpoint is set, the
    /// only source of replies otherwise.
    #[serde(default)]
    pub provider_cache: Option<PathBuf>,
    /// Worker threads for the prediction pass (and so the provider
    /// concurrency ceiling).
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    /// Retries per prompt on transport errors and 5xx replies.
    #[serde(default = "default_retry_budget")]
    pub retry_budget: u32,
    /// Worked examples pasted into the prompt; required by `icl`.
    #[serde(default)]
    pub icl_examples: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSection {
    /// Entity-presence classifier from `geoprofile train-filter`.
    pub model: PathBuf,
    /// Embedding set the records' `embedding_row` fields point into.
    pub embeddings: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileSection {
    /// Entities to profile; empty means every record, grouped by its own
    /// entity tag.
    pub entities: Vec<String>,
    /// Countries kept in each concentration summary.
    pub top_n: usize,
    /// Ratio beyond which a country counts as over- or under-represented.
    pub r_threshold: f64,
    /// Minimum located count for a country to enter the diversity
    /// correlation.
    pub min_count: u64,
    /// `country,value` CSVs; one correlation per file, named by file stem.
    pub indicators: Vec<PathBuf>,
    /// `country,value` CSV of per-country diversity scores.
    pub diversity: Option<PathBuf>,
    /// `country,count` CSV: reference distribution for misalignment.
    pub reference: Option<PathBuf>,
}

impl Default for ProfileSection {
    fn default() -> Self {
        ProfileSection {
            entities: Vec::new(),
            top_n: TOP_N_DEFAULT,
            r_threshold: 2.0,
            min_count: DIVERSITY_MIN_COUNT,
            indicators: Vec::new(),
            diversity: None,
            reference: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Records between checkpoints during the prediction pass.
    #[serde(default = "default_checkpoint_every")]
    pub checkpoint_every: u64,
    /// Provider-error fraction at which the run exits nonzero.
    #[serde(default = "default_error_ceiling")]
    pub provider_error_ceiling: f64,
    pub output_dir: PathBuf,
}

fn default_concurrency() -> usize {
    4
}

fn default_retry_budget() -> u32 {
    3
}

fn default_checkpoint_every() -> u64 {
    1000
}

fn default_error_ceiling() -> f64 {
    0.01
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<LoadedConfig> {
        let bytes =
            fs::read(path).with_context(|| format!("reading config {}", path.display()))?;
        let text = std::str::from_utf8(&bytes)
            .with_context(|| format!("config {} is not UTF-8", path.display()))?;
        let mut config: RunConfig =
            toml::from_str(text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        config.rebase_paths(base);
        Ok(LoadedConfig { config, sha256: source_checksum(&bytes) })
    }

    fn rebase_paths(&mut self, base: &Path) {
        rebase(base, &mut self.gazetteer.source);
        if let Some(p) = &mut self.gazetteer.country_metadata {
            rebase(base, p);
        }
        for p in &mut self.input.captions {
            rebase(base, p);
        }
        if let Some(p) = &mut self.method.provider_cache {
            rebase(base, p);
        }
        if let Some(p) = &mut self.method.icl_examples {
            rebase(base, p);
        }
        if let Some(filter) = &mut self.filter {
            rebase(base, &mut filter.model);
            rebase(base, &mut filter.embeddings);
        }
        for p in &mut self.profile.indicators {
            rebase(base, p);
        }
        if let Some(p) = &mut self.profile.diversity {
            rebase(base, p);
        }
        if let Some(p) = &mut self.profile.reference {
            rebase(base, p);
        }
        rebase(base, &mut self.run.output_dir);
    }

    /// Every problem found, not just the first.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.version != CONFIG_VERSION {
            out.push(format!(
                "version {} is not supported (this build reads {CONFIG_VERSION})",
                self.version
            ));
        }
        require_file(&mut out, &self.gazetteer.source, "gazetteer.source");
        if let Some(p) = &self.gazetteer.country_metadata {
            require_file(&mut out, p, "gazetteer.country_metadata");
        }
        if self.input.captions.is_empty() {
            out.push("input.captions is empty".into());
        }
        for p in &self.input.captions {
            require_file(&mut out, p, "input.captions");
        }
        if self.method.name != Method::StringMatch {
            match (&self.method.provider_endpoint, &self.method.provider_cache) {
                (None, None) => out.push(format!(
                    "method.name = \"{}\" needs method.provider_endpoint or method.provider_cache",
                    self.method.name
                )),
                (None, Some(cache)) => {
                    require_file(&mut out, cache, "method.provider_cache (offline replay)")
                }
                (Some(_), _) => {
                    if let Some(var) = &self.method.provider_auth_env {
                        if env::var(var).is_err() {
                            out.push(format!(
                                "method.provider_auth_env: environment variable {var} is not set"
                            ));
                        }
                    }
                }
            }
        }
        if self.method.name == Method::Icl {
            match &self.method.icl_examples {
                None => out.push("method.name = \"icl\" needs method.icl_examples".into()),
                Some(p) => require_file(&mut out, p, "method.icl_examples"),
            }
        }
        if self.method.concurrency == 0 {
            out.push("method.concurrency must be at least 1".into());
        }
        if let Some(filter) = &self.filter {
            require_file(&mut out, &filter.model, "filter.model");
            require_file(&mut out, &filter.embeddings, "filter.embeddings");
        }
        if self.profile.top_n == 0 {
            out.push("profile.top_n must be at least 1".into());
        }
        if !(self.profile.r_threshold > 1.0) {
            out.push(format!(
                "profile.r_threshold must exceed 1 (got {})",
                self.profile.r_threshold
            ));
        }
        for p in &self.profile.indicators {
            require_file(&mut out, p, "profile.indicators");
        }
        if let Some(p) = &self.profile.diversity {
            require_file(&mut out, p, "profile.diversity");
        }
        if let Some(p) = &self.profile.reference {
            require_file(&mut out, p, "profile.reference");
        }
        if self.run.checkpoint_every == 0 {
            out.push("run.checkpoint_every must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.run.provider_error_ceiling) {
            out.push(format!(
                "run.provider_error_ceiling must be within [0, 1] (got {})",
                self.run.provider_error_ceiling
            ));
        }
        out
    }

    /// The allow-list built from `profile.entities`; `None` profiles
    /// every record.
    pub fn entity_allowlist(&self) -> Option<BTreeSet<String>> {
        if self.profile.entities.is_empty() {
            None
        } else {
            Some(self.profile.entities.iter().cloned().collect())
        }
    }
}

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn require_file(out: &mut Vec<String>, path: &Path, what: &str) {
    if !path.is_file() {
        out.push(format!("{what}: no such file: {}", path.display()));
    }
}
